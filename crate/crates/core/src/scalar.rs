//! Monotone scalar transforms, lower Dini derivative infima and bisection
//! inverses.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Shrink applied to an estimated (not analytic) Dini infimum before it
/// scales a modulus.
pub const DINI_SAFETY: f64 = 1.0 - 1e-3;

/// Default number of base points for [`estimate_dini_inf`].
pub const DEFAULT_BASE_POINTS: usize = 257;

/// Absolute target of [`invert_monotone`].
pub const INVERSE_TOL: f64 = 1e-12;

const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalarError {
    #[error("range must satisfy lo <= hi with finite bounds, got [{lo}, {hi}]")]
    BadRange { lo: f64, hi: f64 },
    #[error("{name} evaluated to a non-finite value at t = {t}")]
    NonFinite { name: String, t: f64 },
    #[error("{name} is not defined on [{lo}, {hi}]")]
    OutsideDomain { name: String, lo: f64, hi: f64 },
    #[error("target {y} lies outside the image [{lo}, {hi}] of the bracket")]
    OutsideImage { y: f64, lo: f64, hi: f64 },
    #[error("{name} is tagged {tagged:?} but is not monotone that way on the range")]
    MonotonicityMismatch { name: String, tagged: Monotonicity },
    #[error("Dini estimation needs at least two base points and positive steps")]
    BadGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

/// The interval over which a Dini infimum is taken, typically an image `h(K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeInterval {
    pub lo: f64,
    pub hi: f64,
}

impl RangeInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, ScalarError> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(ScalarError::BadRange { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Widens both ends by `rel * max(|lo|, |hi|, 1)`.
    pub fn widen(&self, rel: f64) -> Self {
        let pad = rel * self.lo.abs().max(self.hi.abs()).max(1.0);
        Self {
            lo: self.lo - pad,
            hi: self.hi + pad,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.lo > 0.0
    }

    pub fn is_negative(&self) -> bool {
        self.hi < 0.0
    }
}

/// Closed-form transforms addressable by name from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Builtin {
    Identity,
    Ln,
    Exp,
    Power {
        p: f64,
    },
    Negate,
    /// `t -> 1/t`
    Reciprocal,
    /// `t -> -1/t`, increasing on either sign-definite half line.
    NegReciprocal,
    /// `t -> scale * t + offset`
    Affine {
        scale: f64,
        offset: f64,
    },
}

impl Builtin {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Builtin::Identity => t,
            Builtin::Ln => t.ln(),
            Builtin::Exp => t.exp(),
            Builtin::Power { p } => pow(t, p),
            Builtin::Negate => -t,
            Builtin::Reciprocal => 1.0 / t,
            Builtin::NegReciprocal => -1.0 / t,
            Builtin::Affine { scale, offset } => scale * t + offset,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Builtin::Identity => 1.0,
            Builtin::Ln => 1.0 / t,
            Builtin::Exp => t.exp(),
            Builtin::Power { p } => {
                if p == 1.0 {
                    1.0
                } else {
                    p * pow(t, p - 1.0)
                }
            }
            Builtin::Negate => -1.0,
            Builtin::Reciprocal => -1.0 / (t * t),
            Builtin::NegReciprocal => 1.0 / (t * t),
            Builtin::Affine { scale, .. } => scale,
        }
    }

    pub fn inverse(&self) -> Option<Builtin> {
        Some(match *self {
            Builtin::Identity => Builtin::Identity,
            Builtin::Ln => Builtin::Exp,
            Builtin::Exp => Builtin::Ln,
            Builtin::Power { p } if p != 0.0 => Builtin::Power { p: 1.0 / p },
            Builtin::Power { .. } => return None,
            Builtin::Negate => Builtin::Negate,
            Builtin::Reciprocal => Builtin::Reciprocal,
            Builtin::NegReciprocal => Builtin::NegReciprocal,
            Builtin::Affine { scale, offset } if scale != 0.0 => Builtin::Affine {
                scale: 1.0 / scale,
                offset: -offset / scale,
            },
            Builtin::Affine { .. } => return None,
        })
    }

    pub fn monotonicity(&self) -> Option<Monotonicity> {
        use Monotonicity::*;
        match *self {
            Builtin::Identity | Builtin::Ln | Builtin::Exp | Builtin::NegReciprocal => {
                Some(Increasing)
            }
            Builtin::Negate | Builtin::Reciprocal => Some(Decreasing),
            Builtin::Power { p } if p > 0.0 => Some(Increasing),
            Builtin::Power { p } if p < 0.0 => Some(Decreasing),
            Builtin::Affine { scale, .. } if scale > 0.0 => Some(Increasing),
            Builtin::Affine { scale, .. } if scale < 0.0 => Some(Decreasing),
            _ => None,
        }
    }

    /// Whether the transform is defined and strictly monotone on all of `r`.
    pub fn defined_on(&self, r: RangeInterval) -> bool {
        match *self {
            Builtin::Ln => r.lo > 0.0,
            Builtin::Power { p } => {
                if p.fract() == 0.0 && p > 0.0 {
                    // odd integer powers are monotone everywhere, even ones on a half line
                    (p as i64) % 2 == 1 || r.lo >= 0.0
                } else if p > 0.0 {
                    r.lo >= 0.0
                } else {
                    r.lo > 0.0
                }
            }
            Builtin::Reciprocal | Builtin::NegReciprocal => r.is_positive() || r.is_negative(),
            _ => true,
        }
    }

    fn name(&self) -> String {
        match *self {
            Builtin::Identity => "identity".into(),
            Builtin::Ln => "ln".into(),
            Builtin::Exp => "exp".into(),
            Builtin::Power { p } => format!("power({p})"),
            Builtin::Negate => "negate".into(),
            Builtin::Reciprocal => "reciprocal".into(),
            Builtin::NegReciprocal => "neg_reciprocal".into(),
            Builtin::Affine { scale, offset } => format!("affine({scale}, {offset})"),
        }
    }
}

/// `t^p` that stays exact for integer `p` and odd roots of negative values.
fn pow(t: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        t.powi(p as i32)
    } else {
        t.powf(p)
    }
}

type CustomFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Func {
    Builtin(Builtin),
    Custom(CustomFn),
}

/// A strictly monotone continuous map `R -> R` with its monotonicity tag and,
/// optionally, a supplied lower bound on its lower Dini derivative.
#[derive(Clone)]
pub struct ScalarTransform {
    name: String,
    func: Func,
    monotonicity: Monotonicity,
    dini_inf: Option<f64>,
}

impl fmt::Debug for ScalarTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarTransform")
            .field("name", &self.name)
            .field("monotonicity", &self.monotonicity)
            .field("dini_inf", &self.dini_inf)
            .finish()
    }
}

impl ScalarTransform {
    /// Panics if `b` has no monotonicity (a zero power or zero scale).
    pub fn builtin(b: Builtin) -> Self {
        let monotonicity = b
            .monotonicity()
            .expect("builtin transform must be strictly monotone");
        Self {
            name: b.name(),
            func: Func::Builtin(b),
            monotonicity,
            dini_inf: None,
        }
    }

    pub fn try_builtin(b: Builtin) -> Option<Self> {
        b.monotonicity().map(|_| Self::builtin(b))
    }

    pub fn identity() -> Self {
        Self::builtin(Builtin::Identity)
    }

    pub fn ln() -> Self {
        Self::builtin(Builtin::Ln)
    }

    pub fn exp() -> Self {
        Self::builtin(Builtin::Exp)
    }

    pub fn power(p: f64) -> Self {
        Self::builtin(Builtin::Power { p })
    }

    pub fn scale(s: f64) -> Self {
        Self::builtin(Builtin::Affine {
            scale: s,
            offset: 0.0,
        })
    }

    pub fn custom(
        name: impl Into<String>,
        monotonicity: Monotonicity,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            func: Func::Custom(Arc::new(f)),
            monotonicity,
            dini_inf: None,
        }
    }

    /// Attaches a closed-form lower bound `mu` of the lower Dini derivative.
    pub fn with_dini_inf(mut self, mu: f64) -> Self {
        self.dini_inf = Some(mu);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity
    }

    pub fn supplied_dini_inf(&self) -> Option<f64> {
        self.dini_inf
    }

    pub fn as_builtin(&self) -> Option<Builtin> {
        match self.func {
            Func::Builtin(b) => Some(b),
            Func::Custom(_) => None,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match &self.func {
            Func::Builtin(b) => b.eval(t),
            Func::Custom(f) => f(t),
        }
    }

    /// Closed-form inverse, available for builtins only.
    pub fn inverse(&self) -> Option<ScalarTransform> {
        self.as_builtin()
            .and_then(|b| b.inverse())
            .and_then(ScalarTransform::try_builtin)
    }

    /// `t -> -self(t)`, monotone the other way.
    pub fn negated(&self) -> ScalarTransform {
        let inner = self.clone();
        let flipped = match self.monotonicity {
            Monotonicity::Increasing => Monotonicity::Decreasing,
            Monotonicity::Decreasing => Monotonicity::Increasing,
        };
        let mut out =
            ScalarTransform::custom(format!("-{}", self.name), flipped, move |t| -inner.eval(t));
        out.func = match self.as_builtin() {
            Some(Builtin::Identity) => Func::Builtin(Builtin::Negate),
            Some(Builtin::Negate) => Func::Builtin(Builtin::Identity),
            Some(Builtin::Reciprocal) => Func::Builtin(Builtin::NegReciprocal),
            Some(Builtin::NegReciprocal) => Func::Builtin(Builtin::Reciprocal),
            Some(Builtin::Affine { scale, offset }) => Func::Builtin(Builtin::Affine {
                scale: -scale,
                offset: -offset,
            }),
            _ => out.func,
        };
        out
    }

    /// Checks the monotonicity tag against evaluations on a uniform grid.
    pub fn screen_monotonicity(&self, range: RangeInterval, n: usize) -> Result<(), ScalarError> {
        let n = n.max(2);
        let mut prev: Option<f64> = None;
        for k in 0..n {
            let t = lerp(range, k, n);
            let v = self.eval(t);
            if !v.is_finite() {
                return Err(ScalarError::NonFinite {
                    name: self.name.clone(),
                    t,
                });
            }
            if let Some(p) = prev {
                let ok = match self.monotonicity {
                    Monotonicity::Increasing => v >= p,
                    Monotonicity::Decreasing => v <= p,
                };
                if !ok {
                    return Err(ScalarError::MonotonicityMismatch {
                        name: self.name.clone(),
                        tagged: self.monotonicity,
                    });
                }
            }
            prev = Some(v);
        }
        Ok(())
    }

    /// Infimum of the lower Dini derivative of this (increasing) transform
    /// over `range`: the supplied value if any, the closed form for builtins,
    /// otherwise a finite-difference estimate with default settings.
    pub fn dini_inf_over(&self, range: RangeInterval) -> Result<DiniEstimate, ScalarError> {
        if let Some(mu) = self.dini_inf {
            return Ok(DiniEstimate::analytic(mu));
        }
        if let Some(b) = self.as_builtin() {
            if !b.defined_on(range) {
                return Err(ScalarError::OutsideDomain {
                    name: self.name.clone(),
                    lo: range.lo,
                    hi: range.hi,
                });
            }
            // every builtin has a derivative that is monotone on a range where
            // it is defined, so the infimum sits at an endpoint
            let d_lo = b.derivative(range.lo).abs();
            let d_hi = b.derivative(range.hi).abs();
            let mu = d_lo.min(d_hi);
            if mu.is_nan() {
                return Err(ScalarError::NonFinite {
                    name: self.name.clone(),
                    t: range.lo,
                });
            }
            return Ok(DiniEstimate::analytic(mu));
        }
        estimate_dini_inf(self, range, DEFAULT_BASE_POINTS, &default_steps(range))
    }
}

fn lerp(r: RangeInterval, k: usize, n: usize) -> f64 {
    if k == 0 {
        r.lo
    } else if k + 1 == n {
        r.hi
    } else {
        r.lo + (r.hi - r.lo) * (k as f64 / (n - 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiniEstimate {
    pub mu: f64,
    pub base_points: usize,
    pub steps: Vec<f64>,
    pub is_analytic: bool,
}

impl DiniEstimate {
    pub fn analytic(mu: f64) -> Self {
        Self {
            mu: mu.max(0.0),
            base_points: 0,
            steps: Vec::new(),
            is_analytic: true,
        }
    }

    /// The value allowed into a certificate: analytic values as-is,
    /// estimates shrunk by [`DINI_SAFETY`].
    pub fn certified_mu(&self) -> f64 {
        if self.is_analytic {
            self.mu
        } else {
            self.mu * DINI_SAFETY
        }
    }
}

/// `{1e-2, ..., 1e-6} * width`, with width floored at `max(|lo|, 1) * 1e-3`
/// so degenerate ranges still get positive steps.
pub fn default_steps(range: RangeInterval) -> Vec<f64> {
    let mut w = range.width();
    if w <= 0.0 {
        w = range.lo.abs().max(1.0) * 1e-3;
    }
    [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
        .iter()
        .map(|s| s * w)
        .collect()
}

/// Minimum forward difference quotient of `g` over a uniform grid of
/// `base_points` in `range` and the given `steps`, clamped below at zero.
///
/// Steps that would leave the range are taken inward instead, so the right
/// endpoint is probed with a backward quotient. Finite steps cannot certify
/// a liminf; the result is an estimate.
pub fn estimate_dini_inf(
    g: &ScalarTransform,
    range: RangeInterval,
    base_points: usize,
    steps: &[f64],
) -> Result<DiniEstimate, ScalarError> {
    if base_points < 2 || steps.is_empty() || steps.iter().any(|&s| !(s > 0.0)) {
        return Err(ScalarError::BadGrid);
    }
    let eval = |t: f64| {
        let v = g.eval(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ScalarError::NonFinite {
                name: g.name.clone(),
                t,
            })
        }
    };
    let mut mu = f64::INFINITY;
    for k in 0..base_points {
        let x = lerp(range, k, base_points);
        let gx = eval(x)?;
        for &t in steps {
            let q = if x + t <= range.hi || range.width() == 0.0 {
                (eval(x + t)? - gx) / t
            } else {
                (gx - eval(x - t)?) / t
            };
            mu = mu.min(q);
        }
    }
    Ok(DiniEstimate {
        mu: mu.max(0.0),
        base_points,
        steps: steps.to_vec(),
        is_analytic: false,
    })
}

/// Solves `g(x) = y` on `bracket` by bisection.
///
/// Stops once `|g(x) - y| <= 1e-12`, after 200 halvings, or when the bracket
/// can no longer be split in floating point; returns the best midpoint seen.
pub fn invert_monotone(
    g: &ScalarTransform,
    y: f64,
    bracket: RangeInterval,
) -> Result<f64, ScalarError> {
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let ga = g.eval(a);
    let gb = g.eval(b);
    for (t, v) in [(a, ga), (b, gb)] {
        if !v.is_finite() {
            return Err(ScalarError::NonFinite {
                name: g.name.clone(),
                t,
            });
        }
    }
    let (img_lo, img_hi) = (ga.min(gb), ga.max(gb));
    if !(img_lo..=img_hi).contains(&y) {
        return Err(ScalarError::OutsideImage {
            y,
            lo: img_lo,
            hi: img_hi,
        });
    }
    if (ga - y).abs() <= INVERSE_TOL {
        return Ok(a);
    }
    if (gb - y).abs() <= INVERSE_TOL {
        return Ok(b);
    }
    // orient so that f(a) < 0 < f(b) for f = g - y
    let increasing = gb > ga;
    let mut best = (f64::INFINITY, a);
    for _ in 0..MAX_BISECTIONS {
        let m = a + 0.5 * (b - a);
        if m <= a || m >= b {
            break;
        }
        let gm = g.eval(m);
        if !gm.is_finite() {
            return Err(ScalarError::NonFinite {
                name: g.name.clone(),
                t: m,
            });
        }
        let err = (gm - y).abs();
        if err < best.0 {
            best = (err, m);
        }
        if err <= INVERSE_TOL {
            break;
        }
        if (gm < y) == increasing {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(best.1)
}

/// Mean value inequality `g(b) - g(a) >= mu * (b - a)` up to a tolerance of
/// `1e-9 * (1 + |g(a)| + |g(b)|)`.
pub fn mean_value_check(g: &ScalarTransform, a: f64, b: f64, mu: f64) -> bool {
    let ga = g.eval(a);
    let gb = g.eval(b);
    let tol = 1e-9 * (1.0 + ga.abs() + gb.abs());
    gb - ga >= mu * (b - a) - tol
}
