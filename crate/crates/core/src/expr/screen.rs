//! Grid screening of preconditions the calculus cannot prove: positivity,
//! sign, image ranges and claimed certificates.

use crate::domain::{Point, DEFAULT_OPEN_MARGIN};
use crate::par::{self, Exec};
use crate::scalar::RangeInterval;
use crate::verify;

use super::{BuildError, Expr, Provenance};

#[derive(Debug, Clone, Copy)]
pub struct ScreenConfig {
    pub grid_per_axis: usize,
    pub grid_cap: usize,
    pub extra_samples: usize,
    pub seed: u64,
    /// Relative widening of an observed image range.
    pub range_widen: f64,
    /// Safety factor applied to estimated sup bounds.
    pub bound_safety: f64,
    pub claim_points: usize,
    pub claim_lambdas: usize,
}

pub const SCREEN: ScreenConfig = ScreenConfig {
    grid_per_axis: 33,
    grid_cap: 100_000,
    extra_samples: 256,
    seed: 0,
    range_widen: 1e-9,
    bound_safety: 1e-6,
    claim_points: 200,
    claim_lambdas: 9,
};

/// Observed minimum and maximum of `e` over the screening set.
pub(crate) struct Observed {
    pub min: f64,
    pub max: f64,
}

fn screening_points(e: &Expr, margin: f64) -> Vec<Point> {
    let dom = if margin > 0.0 {
        e.domain().flat().shrink(margin)
    } else {
        e.domain().flat().clone()
    };
    let mut pts = dom.grid(SCREEN.grid_per_axis, SCREEN.grid_cap);
    pts.extend(dom.sample(SCREEN.extra_samples, SCREEN.seed ^ 0x5eed));
    pts
}

fn observe_with(e: &Expr, margin: f64) -> Result<Observed, BuildError> {
    let pts = screening_points(e, margin);
    let vals = par::map(Exec::default(), &pts, |p| e.eval(p));
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (p, &v) in pts.iter().zip(&vals) {
        if !v.is_finite() {
            return Err(BuildError::NonFinite {
                point: p.clone(),
                value: v,
            });
        }
        min = min.min(v);
        max = max.max(v);
    }
    Ok(Observed { min, max })
}

/// Observed extremes on the closed box; when the boundary produces
/// non-finite values, on the box shrunk by the open-set margin instead.
pub(crate) fn observe(e: &Expr) -> Result<Observed, BuildError> {
    match observe_with(e, 0.0) {
        Ok(o) => Ok(o),
        Err(BuildError::NonFinite { .. }) => observe_with(e, DEFAULT_OPEN_MARGIN),
        Err(err) => Err(err),
    }
}

/// Estimated image `e(K)`, widened by `1e-9` relative.
pub fn image_range(e: &Expr) -> Result<RangeInterval, BuildError> {
    let o = observe(e)?;
    Ok(RangeInterval::new(o.min, o.max)?.widen(SCREEN.range_widen))
}

pub(crate) fn screen_claim(e: &Expr) -> Result<(), BuildError> {
    let cert = e
        .claimed_certificate()
        .expect("screen_claim called on an expression without a claim");
    debug_assert_eq!(cert.provenance, Provenance::Claimed);
    let report = verify::check_star_inequality(
        e,
        cert,
        SCREEN.claim_points,
        SCREEN.claim_lambdas,
        SCREEN.seed,
    )
    .map_err(|err| match err {
        verify::VerifyError::NonFinite { point, value } => BuildError::NonFinite { point, value },
        verify::VerifyError::Domain(d) => BuildError::Domain(d),
        verify::VerifyError::OutsideDomain(p) => {
            BuildError::BadCertificate(format!("minimizer {p} lies outside the domain"))
        }
    })?;
    match report.witness {
        Some(w) => Err(BuildError::ClaimRejected(Box::new(w))),
        None => Ok(()),
    }
}
