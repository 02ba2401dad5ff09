use approx::assert_relative_eq;

use super::*;
use crate::domain::{BoxDomain, Interval};
use crate::scalar::{Builtin, Monotonicity, ScalarTransform};
use crate::verify::check_star_inequality;

fn line(lo: f64, hi: f64) -> BoxDomain {
    BoxDomain::from_bounds(&[(lo, hi)]).unwrap()
}

fn square() -> Expr {
    Expr::atom(
        AtomKind::Power {
            exponent: 2.0,
            coef: 1.0,
        },
        line(-1.0, 1.0),
    )
    .unwrap()
    .with_claim(Certificate::claimed([0.0], 2.0))
    .unwrap()
}

fn identity(lo: f64, hi: f64, gamma: f64) -> Expr {
    Expr::atom(
        AtomKind::Linear {
            coefs: vec![1.0],
            offset: 0.0,
        },
        line(lo, hi),
    )
    .unwrap()
    .with_claim(Certificate::claimed([lo], gamma))
    .unwrap()
}

/// `3 - t` on `[1, 2]`: positive, maximized at 1.
fn falling() -> Expr {
    Expr::atom(
        AtomKind::Linear {
            coefs: vec![-1.0],
            offset: 3.0,
        },
        line(1.0, 2.0),
    )
    .unwrap()
    .with_claim(Certificate::claimed_concave([1.0], 1.0))
    .unwrap()
}

fn rule_of(e: &Expr) -> String {
    match &e.certificate().unwrap().provenance {
        Provenance::DerivedRule(r) | Provenance::NumericallyScreened(r) => r.clone(),
        p => panic!("not derived: {p:?}"),
    }
}

fn holds(e: &Expr) -> bool {
    check_star_inequality(e, e.certificate().unwrap(), 500, 21, 7)
        .unwrap()
        .passed
}

#[test]
fn evaluates_examples() {
    let wide = Expr::atom(
        AtomKind::Power {
            exponent: 2.0,
            coef: 1.0,
        },
        line(-3.0, 3.0),
    )
    .unwrap()
    .with_claim(Certificate::claimed([0.0], 2.0))
    .unwrap();
    let h = sum(vec![wide.clone(), wide], None).unwrap();
    assert_eq!(h.evaluate(&[1.0, 2.0]).unwrap(), 5.0);

    let p = product(
        vec![identity(1.0, 2.0, 0.0), identity(1.0, 2.0, 0.0)],
        None,
        ProductBounds::None,
    )
    .unwrap();
    assert_relative_eq!(p.evaluate(&[1.5, 2.0]).unwrap(), 3.0, max_relative = 1e-15);

    let m = wqam(
        ScalarTransform::identity(),
        None,
        vec![0.5, 0.5],
        vec![identity(1.0, 5.0, 0.0), identity(1.0, 5.0, 0.0)],
    )
    .unwrap();
    assert_relative_eq!(m.evaluate(&[2.0, 4.0]).unwrap(), 3.0, max_relative = 1e-15);
}

#[test]
fn evaluate_rejects_points_outside() {
    let h = sum(vec![square(), square()], None).unwrap();
    assert!(matches!(
        h.evaluate(&[2.0, 0.0]),
        Err(EvalError::OutsideDomain(_))
    ));
}

#[test]
fn sum_concatenates_and_takes_min_modulus() {
    let h = sum(vec![square(), identity(1.0, 3.0, 1.0)], None).unwrap();
    let cert = h.certificate().unwrap();
    assert_eq!(&cert.xbar[..], &[0.0, 1.0]);
    assert_eq!(cert.gamma, 1.0);
    assert_eq!(rule_of(&h), "additive");
    assert!(holds(&h));
}

#[test]
fn sum_of_one_passes_through() {
    let h = sum(vec![square()], None).unwrap();
    assert_eq!(h.certificate(), square().certificate());
}

#[test]
fn sum_rejects_mixed_orientation() {
    assert!(matches!(
        sum(vec![square(), falling()], None),
        Err(BuildError::MixedOrientation { .. })
    ));
}

#[test]
fn sum_needs_certificates() {
    let bare = Expr::atom(AtomKind::ZeroIndicator, line(-1.0, 1.0)).unwrap();
    assert!(matches!(
        sum(vec![square(), bare], None),
        Err(BuildError::MissingCertificate { index: 1, .. })
    ));
    assert!(matches!(
        sum(vec![], None),
        Err(BuildError::NoChildren { .. })
    ));
}

#[test]
fn ln_of_identity_gets_one_third() {
    let h = compose_monotone(ScalarTransform::ln(), identity(1.0, 3.0, 1.0)).unwrap();
    let cert = h.certificate().unwrap();
    // inf of 1/t over [1, 3]
    assert_relative_eq!(cert.gamma, 1.0 / 3.0, max_relative = 1e-8);
    assert!(cert.gamma <= 1.0 / 3.0);
    assert_eq!(rule_of(&h), "monotone_composition");
    // the bound comes from the sampled supremum of the image
    assert!(cert.is_screened());
    assert!(holds(&h));
}

#[test]
fn exp_of_strongly_convex_child() {
    let h = compose_monotone(ScalarTransform::exp(), square()).unwrap();
    // exp' >= exp(0) on the image [0, 1]
    assert_relative_eq!(h.certificate().unwrap().gamma, 2.0, max_relative = 1e-8);
    assert!(!h.certificate().unwrap().is_screened());
    assert!(holds(&h));
}

#[test]
fn compose_keeps_zero_modulus() {
    let h = compose_monotone(ScalarTransform::exp(), identity(1.0, 3.0, 0.0)).unwrap();
    assert_eq!(h.certificate().unwrap().gamma, 0.0);
}

#[test]
fn compose_rejects_decreasing() {
    let g = ScalarTransform::builtin(Builtin::Negate);
    assert!(matches!(
        compose_monotone(g, square()),
        Err(BuildError::NotIncreasing(_))
    ));
}

#[test]
fn compose_rejects_undefined_range() {
    // ln on the image [0, 1] of t^2
    assert!(compose_monotone(ScalarTransform::ln(), square()).is_err());
}

#[test]
fn compose_custom_is_screened() {
    let g = ScalarTransform::custom("t^3+t", Monotonicity::Increasing, |t| t * t * t + t);
    let h = compose_monotone(g, identity(1.0, 3.0, 1.0)).unwrap();
    let cert = h.certificate().unwrap();
    assert!(cert.is_screened());
    // g' = 3t^2 + 1 >= 4 on [1, 3]; the estimate is shrunk, never inflated
    assert!(cert.gamma > 0.0 && cert.gamma <= 4.0 + 1e-6);
    assert!(holds(&h));
}

#[test]
fn compose_supplied_dini() {
    let g = ScalarTransform::custom("2t", Monotonicity::Increasing, |t| 2.0 * t).with_dini_inf(2.0);
    let h = compose_monotone(g, identity(1.0, 3.0, 1.0)).unwrap();
    assert_eq!(h.certificate().unwrap().gamma, 2.0);
    let bad =
        ScalarTransform::custom("2t", Monotonicity::Increasing, |t| 2.0 * t).with_dini_inf(-1.0);
    assert!(matches!(
        compose_monotone(bad, identity(1.0, 3.0, 1.0)),
        Err(BuildError::NegativeDini(_))
    ));
}

#[test]
fn reciprocal_scales_by_inverse_square_of_bound() {
    let h = reciprocal(falling()).unwrap();
    let cert = h.certificate().unwrap();
    assert_eq!(cert.orientation, Orientation::StarQuasiconvex);
    assert_eq!(&cert.xbar[..], &[1.0]);
    // range [1, 2]: modulus times 1 / 2^2
    assert_relative_eq!(cert.gamma, 0.25, max_relative = 1e-8);
    assert!(cert.gamma <= 0.25);
    assert_eq!(h.reciprocal_sign(), Some(Sign::Positive));
    assert!(holds(&h));
}

#[test]
fn reciprocal_flips_convex_positive_child() {
    let h = reciprocal(identity(1.0, 3.0, 0.0)).unwrap();
    let cert = h.certificate().unwrap();
    assert_eq!(cert.orientation, Orientation::StarQuasiconcave);
    assert_eq!(cert.gamma, 0.0);
    assert!(holds(&h));
}

#[test]
fn reciprocal_rejects_sign_change() {
    let e = Expr::atom(
        AtomKind::Linear {
            coefs: vec![1.0],
            offset: 0.0,
        },
        line(-1.0, 1.0),
    )
    .unwrap()
    .with_claim(Certificate::claimed([-1.0], 0.0))
    .unwrap();
    assert!(matches!(
        reciprocal(e),
        Err(BuildError::SignIndefinite { .. })
    ));
}

#[test]
fn min_drops_modulus() {
    let h = min_combine(vec![square(), square()], None).unwrap();
    let cert = h.certificate().unwrap();
    assert_eq!(cert.gamma, 0.0);
    assert_eq!(&cert.xbar[..], &[0.0, 0.0]);
    assert_eq!(rule_of(&h), "pointwise_min");
    assert_eq!(h.eval(&[0.5, -0.25]), 0.0625);
    assert!(holds(&h));

    let single = min_combine(vec![square()], None).unwrap();
    assert_eq!(single.certificate().unwrap().gamma, 0.0);
}

#[test]
fn product_with_bound() {
    let p = product(
        vec![identity(1.0, 3.0, 1.0)],
        None,
        ProductBounds::Supplied(vec![3.0]),
    )
    .unwrap();
    // H(xbar) * gamma / M = 1 * 1 / 3
    assert_relative_eq!(
        p.certificate().unwrap().gamma,
        1.0 / 3.0,
        max_relative = 1e-12
    );
    assert_eq!(p.product_bounds(), Some(&[3.0][..]));
    assert!(p.positivity_checked());
    assert_eq!(rule_of(&p), "product_separable");
    assert!(holds(&p));
}

#[test]
fn product_rejects_low_bound() {
    assert!(matches!(
        product(
            vec![identity(1.0, 3.0, 1.0)],
            None,
            ProductBounds::Supplied(vec![2.0])
        ),
        Err(BuildError::BoundBelowSup { index: 0, .. })
    ));
    assert!(matches!(
        product(
            vec![identity(1.0, 3.0, 1.0)],
            None,
            ProductBounds::Supplied(vec![3.0, 3.0])
        ),
        Err(BuildError::BoundCount { .. })
    ));
}

#[test]
fn product_rejects_nonpositive_factor() {
    assert!(matches!(
        product(
            vec![square(), identity(1.0, 2.0, 0.0)],
            None,
            ProductBounds::None
        ),
        Err(BuildError::NotPositive { index: 0, .. })
    ));
}

#[test]
fn product_zero_modulus_factor() {
    let p = product(
        vec![identity(1.0, 2.0, 0.0), identity(1.0, 3.0, 1.0)],
        None,
        ProductBounds::Estimate,
    )
    .unwrap();
    assert_eq!(p.certificate().unwrap().gamma, 0.0);
    assert!(holds(&p));
}

#[test]
fn product_via_log_scales_by_value_at_minimizer() {
    // f(t) = ln 2 + t^2 / 4 is strongly convex with modulus 1/2, H(0) = 2
    let f = sum(
        vec![Expr::atom(
            AtomKind::SqNorm {
                coef: 0.25,
                center: None,
            },
            line(-1.0, 1.0),
        )
        .unwrap()
        .with_claim(Certificate::claimed([0.0], 0.5))
        .unwrap()],
        None,
    )
    .unwrap();
    let shifted = Expr::custom("ln2+t^2/4", line(-1.0, 1.0), |x| {
        2f64.ln() + 0.25 * x[0] * x[0]
    })
    .with_claim(Certificate::claimed([0.0], 0.5))
    .unwrap();
    let h = product_via_log(vec![shifted], None, 0.5).unwrap();
    assert_relative_eq!(h.eval(&[0.0]), 2.0, max_relative = 1e-15);
    assert_relative_eq!(h.certificate().unwrap().gamma, 1.0, max_relative = 1e-12);
    assert_eq!(rule_of(&h), "product_log");
    assert!(holds(&h));

    let zero = product_via_log(vec![f], None, 0.0).unwrap();
    assert_eq!(zero.certificate().unwrap().gamma, 0.0);
}

#[test]
fn product_via_log_needs_claimed_modulus() {
    assert!(matches!(
        product_via_log(vec![identity(1.0, 2.0, 0.0)], None, 0.5),
        Err(BuildError::InsufficientModulus { .. })
    ));
}

#[test]
fn wqam_arithmetic_and_geometric() {
    let a = wqam(
        ScalarTransform::identity(),
        None,
        vec![0.5, 0.5],
        vec![identity(1.0, 4.0, 0.0), identity(1.0, 4.0, 0.0)],
    )
    .unwrap();
    assert_eq!(&a.certificate().unwrap().xbar[..], &[1.0, 1.0]);
    assert_eq!(rule_of(&a), "wqam");
    assert!(holds(&a));

    let g = wqam(
        ScalarTransform::ln(),
        None,
        vec![0.5, 0.5],
        vec![identity(1.0, 4.0, 0.0), identity(1.0, 4.0, 0.0)],
    )
    .unwrap();
    assert_relative_eq!(g.eval(&[1.0, 4.0]), 2.0, max_relative = 1e-14);
    assert!(holds(&g));
}

#[test]
fn wqam_harmonic_mean() {
    let h = wqam(
        ScalarTransform::builtin(Builtin::Reciprocal),
        None,
        vec![0.5, 0.5],
        vec![identity(1.0, 3.0, 0.0), identity(1.0, 3.0, 0.0)],
    )
    .unwrap();
    // 2 / (1/1 + 1/3)
    assert_relative_eq!(h.eval(&[1.0, 3.0]), 1.5, max_relative = 1e-14);
    assert_eq!(
        h.certificate().unwrap().orientation,
        Orientation::StarQuasiconvex
    );
    assert!(holds(&h));
}

#[test]
fn wqam_bisects_custom_generator() {
    let f = ScalarTransform::custom("t^3+t", Monotonicity::Increasing, |t| t * t * t + t);
    let h = wqam(
        f.clone(),
        None,
        vec![0.3, 0.7],
        vec![identity(1.0, 3.0, 0.0), identity(1.0, 3.0, 0.0)],
    )
    .unwrap();
    let (x1, x2) = (1.5, 2.5);
    let m = h.eval(&[x1, x2]);
    assert!((f.eval(m) - (0.3 * f.eval(x1) + 0.7 * f.eval(x2))).abs() <= 1e-9);
    assert!(holds(&h));
}

#[test]
fn wqam_positive_modulus() {
    let h = wqam(
        ScalarTransform::identity(),
        None,
        vec![0.5, 0.5],
        vec![square(), square()],
    )
    .unwrap();
    // inverse slope 1, min_i w_i gamma_i = 1
    assert_relative_eq!(h.certificate().unwrap().gamma, 1.0, max_relative = 1e-8);
    assert!(holds(&h));
}

#[test]
fn wqam_rejects_bad_weights() {
    let kids = || vec![identity(1.0, 2.0, 0.0), identity(1.0, 2.0, 0.0)];
    for w in [vec![0.5, 0.6], vec![1.0, 0.0], vec![0.5]] {
        assert!(
            wqam(ScalarTransform::identity(), None, w.clone(), kids()).is_err(),
            "{w:?}"
        );
    }
}

#[test]
fn wqam_matches_weighted_sum() {
    let pi = [0.4, 0.6];
    let kids = || vec![identity(1.0, 2.0, 0.0), identity(1.0, 2.0, 0.0)];
    let m = wqam(ScalarTransform::identity(), None, pi.to_vec(), kids()).unwrap();
    let scaled: Vec<Expr> = kids()
        .into_iter()
        .zip(pi)
        .map(|(k, w)| compose_monotone(ScalarTransform::scale(w), k).unwrap())
        .collect();
    let s = sum(scaled, None).unwrap();
    for x in [[1.0, 1.0], [1.3, 1.9], [2.0, 1.5]] {
        assert_relative_eq!(m.eval(&x), s.eval(&x), max_relative = 1e-14);
    }
    assert_eq!(m.certificate().unwrap().xbar, s.certificate().unwrap().xbar);
}

#[test]
fn screening_rejects_false_claim() {
    let neg = Expr::atom(
        AtomKind::SqNorm {
            coef: -1.0,
            center: None,
        },
        line(-1.0, 1.0),
    )
    .unwrap();
    assert!(matches!(
        neg.with_claim(Certificate::claimed([0.0], 0.0)),
        Err(BuildError::ClaimRejected(_))
    ));
    assert!(neg
        .with_trusted_claim(Certificate::claimed([0.0], 0.0))
        .is_ok());
}

#[test]
fn claim_outside_domain_rejected() {
    let e = Expr::atom(AtomKind::ZeroIndicator, line(-1.0, 1.0)).unwrap();
    assert!(matches!(
        e.with_claim(Certificate::claimed([2.0], 0.0)),
        Err(BuildError::BadCertificate(_))
    ));
}

#[test]
fn declared_domain_must_match() {
    let wrong = crate::domain::ProductDomain::scalar_blocks(&[Interval::new(0.0, 1.0).unwrap(); 2])
        .unwrap();
    assert!(matches!(
        sum(vec![square(), square()], Some(&wrong)),
        Err(BuildError::DomainMismatch)
    ));
}

#[test]
fn rule_chain_lists_rules() {
    let h = compose_monotone(
        ScalarTransform::exp(),
        sum(vec![square(), square()], None).unwrap(),
    )
    .unwrap();
    let chain = h.rule_chain();
    assert!(chain.iter().any(|r| r.contains("monotone_composition")));
    assert!(chain.iter().any(|r| r.contains("additive")));
    assert_eq!(certificate_of(&h).as_ref(), h.certificate());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn leaves() -> Vec<Expr> {
        vec![square(), identity(1.0, 3.0, 1.0), identity(0.5, 2.0, 0.0)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn increasing_transform_preserves_argmin(
            idx in 0usize..3,
            g in prop::sample::select(vec!["exp", "cube", "atan"]),
            s in 0.0f64..=1.0,
        ) {
            let child = leaves().swap_remove(idx);
            let t = match g {
                "exp" => ScalarTransform::exp(),
                "cube" => ScalarTransform::power(3.0),
                _ => ScalarTransform::custom("atan", Monotonicity::Increasing, f64::atan),
            };
            let h = compose_monotone(t, child.clone()).unwrap();
            let xbar = &h.certificate().unwrap().xbar;
            prop_assert_eq!(xbar, &child.certificate().unwrap().xbar);
            let iv = child.domain().blocks()[0].intervals()[0];
            let y = [iv.lerp(s)];
            prop_assert!(h.eval(xbar) <= h.eval(&y));
        }

        #[test]
        fn sum_minimizer_is_componentwise(a in 0usize..3, b in 0usize..3, s in 0.0f64..=1.0, u in 0.0f64..=1.0) {
            let (ca, cb) = (leaves().swap_remove(a), leaves().swap_remove(b));
            let h = sum(vec![ca.clone(), cb.clone()], None).unwrap();
            let xbar = &h.certificate().unwrap().xbar;
            let ia = ca.domain().blocks()[0].intervals()[0];
            let ib = cb.domain().blocks()[0].intervals()[0];
            prop_assert!(h.eval(xbar) <= h.eval(&[ia.lerp(s), ib.lerp(u)]));
        }

        #[test]
        fn degenerate_lambda_is_exact(idx in 0usize..3, s in 0.0f64..=1.0) {
            // lambda = 0 gives y, lambda = 1 gives xbar: both sides agree
            let e = leaves().swap_remove(idx);
            let cert = e.certificate().unwrap();
            let iv = e.domain().blocks()[0].intervals()[0];
            let y = [iv.lerp(s)];
            let mut z = [0.0];
            crate::domain::segment_into(&cert.xbar, &y, 0.0, &mut z);
            prop_assert_eq!(e.eval(&z), e.eval(&y));
            crate::domain::segment_into(&cert.xbar, &y, 1.0, &mut z);
            prop_assert_eq!(e.eval(&z), e.eval(&cert.xbar));
        }
    }
}
