use super::*;
use crate::applib::{cobb_douglas, leontief, prospect_value, ProspectParams};
use crate::domain::{BoxDomain, Interval, ProductDomain};
use crate::expr::{sum, AtomKind, Certificate, Expr};

fn sq_norm(coef: f64) -> Expr {
    Expr::atom(
        AtomKind::SqNorm { coef, center: None },
        BoxDomain::cube(-1.0, 1.0, 2).unwrap(),
    )
    .unwrap()
}

fn discontinuous() -> Expr {
    let ind = Expr::atom(
        AtomKind::ZeroIndicator,
        BoxDomain::from_bounds(&[(-1.0, 1.0)]).unwrap(),
    )
    .unwrap()
    .with_claim(Certificate::claimed([0.0], 0.0))
    .unwrap();
    let sq = Expr::atom(
        AtomKind::Power {
            exponent: 2.0,
            coef: 1.0,
        },
        BoxDomain::from_bounds(&[(-1.0, 1.0)]).unwrap(),
    )
    .unwrap()
    .with_claim(Certificate::claimed([0.0], 2.0))
    .unwrap();
    sum(vec![ind, sq], None).unwrap()
}

fn square(lo: f64, hi: f64) -> ProductDomain {
    ProductDomain::scalar_blocks(&[Interval::new(lo, hi).unwrap(); 2]).unwrap()
}

#[test]
fn lambda_grid_order() {
    let g = lambda_grid(21);
    assert_eq!(&g[..5], &[0.5, 0.25, 0.75, 0.0, 1.0]);
    assert_eq!(g.len(), 21);
    assert!(g.contains(&0.05) && g.contains(&0.95));
    let mut sorted = g.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    assert_eq!(sorted.len(), g.len());
}

#[test]
fn sq_norm_holds_with_modulus_two() {
    let e = sq_norm(1.0);
    let r = check_star_inequality(&e, &Certificate::claimed([0.0, 0.0], 2.0), 2000, 21, 0).unwrap();
    assert!(r.passed);
    assert_eq!(r.samples_used, 2000 * 21);
    // quadratic: the inequality is tight at every cell
    assert!(r.worst_slack.abs() <= 1e-12);
}

#[test]
fn discontinuous_sum_star_verdicts() {
    let e = discontinuous();
    assert!(
        check_star_inequality(&e, e.certificate().unwrap(), 2000, 21, 0)
            .unwrap()
            .passed
    );
    let r = check_star_inequality(&e, &Certificate::claimed([0.0, 0.0], 1.0), 2000, 21, 0).unwrap();
    assert!(!r.passed);
    let w = r.witness.unwrap();
    assert!(w.recheck(&e));
    assert!(w.lhs > w.rhs + w.tolerance);
}

#[test]
fn wrong_minimizer_is_caught() {
    let e = sq_norm(1.0);
    let r = check_star_inequality(&e, &Certificate::claimed([0.5, 0.5], 0.0), 200, 11, 0).unwrap();
    assert!(!r.passed);
}

#[test]
fn claimed_point_outside_domain() {
    let e = sq_norm(1.0);
    assert!(matches!(
        check_star_inequality(&e, &Certificate::claimed([2.0, 0.0], 0.0), 10, 5, 0),
        Err(VerifyError::OutsideDomain(_))
    ));
}

#[test]
fn sublevel_examples() {
    let v = prospect_value(&ProspectParams::uniform(2, -5.0, 5.0).unwrap()).unwrap();
    let xbar = v.certificate().unwrap().xbar.clone();
    assert!(
        check_sublevel_star(&v, &xbar, &[-4.0, 0.0, 2.0], 101)
            .unwrap()
            .passed
    );
    assert!(
        check_sublevel_star(&sq_norm(1.0), &Point::from([0.0, 0.0]), &[], 41)
            .unwrap()
            .passed
    );

    let g = cobb_douglas(1.0, &[0.5, 0.5], &square(1.0, 4.0)).unwrap();
    let r = check_sublevel_star(&g, &Point::from([4.0, 4.0]), &[], 41).unwrap();
    assert!(!r.passed);
    assert!(r.witness.unwrap().recheck(&g));
}

#[test]
fn ray_examples() {
    let l = leontief(2.0, &[1.0, 1.0], &square(1.0, 3.0)).unwrap();
    assert!(
        check_ray_quasiconvex(&l, &Point::from([1.0, 1.0]), 0.0, 64, 17, 0)
            .unwrap()
            .passed
    );

    let lin = Expr::atom(
        AtomKind::Linear {
            coefs: vec![1.0, 2.0],
            offset: 0.0,
        },
        BoxDomain::cube(0.0, 1.0, 2).unwrap(),
    )
    .unwrap();
    assert!(
        check_ray_quasiconvex(&lin, &Point::from([0.0, 0.0]), 0.0, 64, 17, 0)
            .unwrap()
            .passed
    );

    let neg = sq_norm(-1.0);
    let r = check_ray_quasiconvex(&neg, &Point::from([0.0, 0.0]), 0.0, 64, 17, 0).unwrap();
    assert!(!r.passed);
    assert!(r.witness.unwrap().recheck(&neg));
}

#[test]
fn quasiconvexity_falsifier() {
    let g = cobb_douglas(1.0, &[0.5, 0.5], &square(1.0, 4.0)).unwrap();
    let w = falsify_quasiconvex(&g, 2000, 21, 0).unwrap();
    assert!(w.recheck(&g));
    assert!(w.lhs > w.rhs);

    let campaign = Campaign::with_probes(vec![Point::from([0.0, 1.0]), Point::from([0.1, 0.0])]);
    let d = discontinuous();
    let w = falsify_quasiconvex_with(&campaign, &d, 100, 21, 0).unwrap();
    assert_eq!(w.lambda, 0.5);
    assert_eq!(w.lhs, 1.25);
    assert_eq!(w.rhs, 1.0);

    assert!(falsify_quasiconvex(&sq_norm(1.0), 2000, 21, 0).is_none());
}

#[test]
fn minimizer_falsifier() {
    let g = cobb_douglas(1.0, &[0.5, 0.5], &square(1.0, 4.0)).unwrap();
    assert!(falsify_minimizer(&g, &Point::from([1.0, 1.0]), 2000, 0).is_none());
    let w = falsify_minimizer(&g, &Point::from([2.0, 2.0]), 2000, 0).unwrap();
    assert!(w.recheck(&g));

    let c = Expr::atom(
        AtomKind::Constant { value: 3.0 },
        BoxDomain::cube(0.0, 1.0, 2).unwrap(),
    )
    .unwrap();
    assert!(falsify_minimizer(&c, &Point::from([0.5, 0.5]), 500, 0).is_none());
}

#[test]
fn characterizations_agree() {
    let v = prospect_value(&ProspectParams::uniform(2, -5.0, 5.0).unwrap()).unwrap();
    let xbar = v.certificate().unwrap().xbar.clone();
    let c = cross_check_characterizations(&v, &xbar, CrossCheckBudgets::default()).unwrap();
    assert!(c.agree && c.sublevel.passed);

    let origin = Point::from([0.0, 0.0]);
    let c = cross_check_characterizations(&sq_norm(1.0), &origin, CrossCheckBudgets::default())
        .unwrap();
    assert!(c.agree && c.ray.passed);
    let c = cross_check_characterizations(&sq_norm(-1.0), &origin, CrossCheckBudgets::default())
        .unwrap();
    assert!(c.agree && !c.ray.passed);
}

#[test]
fn witness_json_round_trip_fields() {
    let e = sq_norm(-1.0);
    let r = check_star_inequality(&e, &Certificate::claimed([0.0, 0.0], 0.0), 50, 5, 3).unwrap();
    let json = serde_json::to_value(r.witness.unwrap()).unwrap();
    assert_eq!(json["property"]["kind"], "star");
    assert!(json["lhs"].as_f64().unwrap() > json["rhs"].as_f64().unwrap());
}

#[test]
fn executors_agree() {
    let e = discontinuous();
    let cert = Certificate::claimed([0.0, 0.0], 0.5);
    let par = check_star_inequality(&e, &cert, 1000, 21, 11).unwrap();
    let seq =
        check_star_inequality_with(&Campaign::default().sequential(), &e, &cert, 1000, 21, 11)
            .unwrap();
    assert_eq!(par, seq);
}

#[test]
fn merge_keeps_first_witness() {
    let e = sq_norm(-1.0);
    let cert = Certificate::claimed([0.0, 0.0], 0.0);
    let a = check_star_inequality(&e, &cert, 10, 5, 1).unwrap();
    let b = check_star_inequality(&e, &cert, 10, 5, 2).unwrap();
    let m = a.clone().merge(b.clone());
    assert_eq!(m.samples_used, a.samples_used + b.samples_used);
    assert_eq!(m.witness, a.witness);
    assert_eq!(m.worst_slack, a.worst_slack.min(b.worst_slack));
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn pass_is_monotone_in_gamma(g1 in 0.0f64..4.0, g2 in 0.0f64..4.0, seed in 0u64..1000) {
            let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
            let e = sq_norm(1.0);
            let at = |g| check_star_inequality(&e, &Certificate::claimed([0.0, 0.0], g), 200, 11, seed).unwrap();
            let (rl, rh) = (at(lo), at(hi));
            prop_assert!(!rh.passed || rl.passed);
            prop_assert!(rl.worst_slack >= rh.worst_slack);
        }

        #[test]
        fn endpoints_never_fail(x in -1.0f64..=1.0, y in -1.0f64..=1.0, gamma in 0.0f64..10.0) {
            // at lambda in {0, 1} both sides coincide for any modulus
            let e = discontinuous();
            let xbar = [0.0, 0.0];
            for lambda in [0.0, 1.0] {
                let mut z = [0.0; 2];
                crate::domain::segment_into(&xbar, &[x, y], lambda, &mut z);
                let rhs = e.eval(&[x, y]) - lambda * (1.0 - lambda) * 0.5 * gamma * (x * x + y * y);
                prop_assert!(e.eval(&z) <= rhs);
            }
        }

        #[test]
        fn witnesses_are_sound(seed in 0u64..10_000, gamma in 0.5f64..3.0) {
            let e = discontinuous();
            let r = check_star_inequality(&e, &Certificate::claimed([0.0, 0.0], gamma), 100, 11, seed).unwrap();
            if let Some(w) = r.witness {
                prop_assert!(w.recheck(&e));
            }
        }
    }
}
