#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use starqc::domain::BoxDomain;
use starqc::expr::{
    compose_monotone, min_combine, product, product_via_log, reciprocal, sum, wqam, AtomKind,
    Certificate, Expr, Orientation, ProductBounds,
};
use starqc::scalar::{Monotonicity, ScalarTransform};

pub const MAX_DIM: usize = 4;

fn interval(lo: f64, hi: f64) -> BoxDomain {
    BoxDomain::from_bounds(&[(lo, hi)]).unwrap()
}

fn claimed(kind: AtomKind, dom: BoxDomain, cert: Certificate) -> Expr {
    Expr::atom(kind, dom).unwrap().with_claim(cert).unwrap()
}

/// Star quasiconvex leaves with hand-checked certificates. The moduli are
/// the strong-convexity constants of the convex ones.
pub fn convex_atom(rng: &mut ChaCha8Rng) -> Expr {
    match rng.gen_range(0..9) {
        0 => claimed(
            AtomKind::Power {
                exponent: 2.0,
                coef: 1.0,
            },
            interval(-1.0, 1.0),
            Certificate::claimed([0.0], 2.0),
        ),
        1 => {
            let lo = rng.gen_range(0.5..1.5);
            claimed(
                AtomKind::Linear {
                    coefs: vec![1.0],
                    offset: 0.0,
                },
                interval(lo, lo + rng.gen_range(0.5..2.0)),
                Certificate::claimed([lo], 0.0),
            )
        }
        2 => claimed(
            AtomKind::Exp {
                coef: 1.0,
                rate: 1.0,
            },
            interval(0.0, 1.0),
            Certificate::claimed([0.0], 1.0),
        ),
        3 => claimed(
            AtomKind::Log {
                coef: 1.0,
                offset: 1.0,
            },
            interval(1.0, 3.0),
            Certificate::claimed([1.0], 0.0),
        ),
        4 => claimed(
            AtomKind::Prospect {
                alpha: 0.88,
                beta: 0.88,
                loss_aversion: 2.25,
            },
            interval(-2.0, 2.0),
            Certificate::claimed([-2.0], 0.0),
        ),
        5 => claimed(
            AtomKind::SqNorm {
                coef: 1.0,
                center: Some(vec![0.3]),
            },
            interval(-1.0, 1.0),
            Certificate::claimed([0.3], 2.0),
        ),
        6 => claimed(
            AtomKind::ZeroIndicator,
            interval(-1.0, 1.0),
            Certificate::claimed([0.0], 0.0),
        ),
        7 => claimed(
            AtomKind::Power {
                exponent: 0.5,
                coef: 1.0,
            },
            interval(0.5, 2.0),
            Certificate::claimed([0.5], 0.0),
        ),
        _ => claimed(
            AtomKind::SqNorm {
                coef: 0.5,
                center: None,
            },
            BoxDomain::cube(-1.0, 1.0, 2).unwrap(),
            Certificate::claimed([0.0, 0.0], 1.0),
        ),
    }
}

/// Star quasiconcave leaves.
pub fn concave_atom(rng: &mut ChaCha8Rng) -> Expr {
    match rng.gen_range(0..3) {
        0 => claimed(
            AtomKind::Linear {
                coefs: vec![-1.0],
                offset: 3.0,
            },
            interval(1.0, 2.0),
            Certificate::claimed_concave([1.0], 0.0),
        ),
        1 => claimed(
            AtomKind::Power {
                exponent: 0.5,
                coef: 1.0,
            },
            interval(1.0, 4.0),
            Certificate::claimed_concave([4.0], 0.0),
        ),
        _ => claimed(
            AtomKind::Log {
                coef: -1.0,
                offset: 2.0,
            },
            interval(1.0, 4.0),
            Certificate::claimed_concave([1.0], 0.0),
        ),
    }
}

fn transform(rng: &mut ChaCha8Rng) -> ScalarTransform {
    match rng.gen_range(0..6) {
        0 => ScalarTransform::exp(),
        1 => ScalarTransform::ln(),
        2 => ScalarTransform::power(3.0),
        3 => ScalarTransform::scale(2.0),
        4 => ScalarTransform::custom("t + sin(t)/2", Monotonicity::Increasing, |t| {
            t + 0.5 * t.sin()
        }),
        _ => ScalarTransform::custom("atan", Monotonicity::Increasing, f64::atan),
    }
}

fn generator(rng: &mut ChaCha8Rng) -> ScalarTransform {
    match rng.gen_range(0..4) {
        0 => ScalarTransform::identity(),
        1 => ScalarTransform::ln(),
        2 => ScalarTransform::exp(),
        _ => ScalarTransform::builtin(starqc::scalar::Builtin::Reciprocal),
    }
}

fn weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

fn children(
    rng: &mut ChaCha8Rng,
    depth: usize,
    orientation: Orientation,
    budget: usize,
) -> Option<Vec<Expr>> {
    let n = rng.gen_range(2..=3);
    let mut out = Vec::with_capacity(n);
    let mut used = 0;
    for _ in 0..n {
        let c = gen(rng, depth - 1, orientation, budget - used)?;
        used += c.dim();
        out.push(c);
        if used >= budget {
            break;
        }
    }
    (out.len() >= 2 || rng.gen_bool(0.3)).then_some(out)
}

/// A random certified expression of the given orientation, depth at most
/// `depth`, dimension at most `budget`. `None` when the draw violates a
/// rule precondition (the caller retries).
pub fn gen(
    rng: &mut ChaCha8Rng,
    depth: usize,
    orientation: Orientation,
    budget: usize,
) -> Option<Expr> {
    let leaf = |rng: &mut ChaCha8Rng| match orientation {
        Orientation::StarQuasiconvex => convex_atom(rng),
        Orientation::StarQuasiconcave => concave_atom(rng),
    };
    if depth == 0 || budget < 2 || rng.gen_bool(0.25) {
        let e = leaf(rng);
        return (e.dim() <= budget).then_some(e);
    }
    let e = match orientation {
        Orientation::StarQuasiconcave => match rng.gen_range(0..2) {
            0 => sum(children(rng, depth, orientation, budget)?, None).ok()?,
            _ => reciprocal(gen(rng, depth - 1, Orientation::StarQuasiconvex, budget)?).ok()?,
        },
        Orientation::StarQuasiconvex => {
            let rules = [0, 1, 2, 3, 4, 5, 6];
            match *rules.choose(rng).unwrap() {
                0 => sum(children(rng, depth, orientation, budget)?, None).ok()?,
                1 => {
                    let bounds = if rng.gen_bool(0.5) {
                        ProductBounds::Estimate
                    } else {
                        ProductBounds::None
                    };
                    product(children(rng, depth, orientation, budget)?, None, bounds).ok()?
                }
                2 => compose_monotone(transform(rng), gen(rng, depth - 1, orientation, budget)?)
                    .ok()?,
                3 => min_combine(children(rng, depth, orientation, budget)?, None).ok()?,
                4 => {
                    reciprocal(gen(rng, depth - 1, Orientation::StarQuasiconcave, budget)?).ok()?
                }
                5 => {
                    let cs = children(rng, depth, orientation, budget)?;
                    let w = weights(rng, cs.len());
                    wqam(generator(rng), None, w, cs).ok()?
                }
                _ => {
                    // log children are exponentiated; leaves keep the product finite
                    let cs = children(rng, 1, orientation, budget)?;
                    let gamma_log = cs
                        .iter()
                        .map(|c| c.certificate().unwrap().gamma)
                        .fold(f64::INFINITY, f64::min);
                    product_via_log(cs, None, gamma_log).ok()?
                }
            }
        }
    };
    (e.dim() <= budget).then_some(e)
}

/// Draws until a certified expression of depth at most `depth` builds.
pub fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> Expr {
    loop {
        if let Some(e) = gen(rng, depth, Orientation::StarQuasiconvex, MAX_DIM) {
            return e;
        }
    }
}
