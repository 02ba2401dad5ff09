use crate::domain::{Point, ProductDomain};
use crate::par::{self, Exec};
use crate::scalar::{
    default_steps, estimate_dini_inf, invert_monotone, DiniEstimate, Monotonicity, RangeInterval,
    ScalarTransform, DEFAULT_BASE_POINTS,
};

use super::screen::{observe, SCREEN};
use super::{BuildError, Certificate, Expr, Node, Orientation, Provenance, Sign, WqamInverse};

const WEIGHT_TOL: f64 = 1e-9;

/// Parent domain whose blocks are the children's (flattened) domains. A
/// declared domain must agree block for block.
fn parent_domain(
    rule: &'static str,
    children: &[Expr],
    declared: Option<&ProductDomain>,
) -> Result<ProductDomain, BuildError> {
    if children.is_empty() {
        return Err(BuildError::NoChildren { rule });
    }
    let blocks: Vec<_> = children.iter().map(|c| c.domain().flat().clone()).collect();
    if let Some(d) = declared {
        if d.blocks() != blocks.as_slice() {
            return Err(BuildError::DomainMismatch);
        }
    }
    Ok(ProductDomain::new(blocks)?)
}

fn child_certs<'a>(
    rule: &'static str,
    children: &'a [Expr],
) -> Result<Vec<&'a Certificate>, BuildError> {
    children
        .iter()
        .enumerate()
        .map(|(index, c)| {
            c.certificate()
                .ok_or(BuildError::MissingCertificate { rule, index })
        })
        .collect()
}

fn require_orientation(
    rule: &'static str,
    certs: &[&Certificate],
    expected: Orientation,
) -> Result<(), BuildError> {
    match certs.iter().position(|c| c.orientation != expected) {
        Some(index) => Err(BuildError::WrongOrientation {
            rule,
            index,
            expected,
        }),
        None => Ok(()),
    }
}

fn concat_xbar(certs: &[&Certificate]) -> Point {
    Point::concat(certs.iter().map(|c| &c.xbar))
}

fn min_gamma(certs: &[&Certificate]) -> f64 {
    certs.iter().map(|c| c.gamma).fold(f64::INFINITY, f64::min)
}

/// Additive separable combination `h(x_1, ..., x_m) = sum_i h_i(x_i)`.
///
/// All children must carry certificates of one orientation; the result has
/// the concatenated minimizer and modulus `min_i gamma_i`. A single child
/// passes its certificate through unchanged.
pub fn sum(children: Vec<Expr>, domain: Option<&ProductDomain>) -> Result<Expr, BuildError> {
    const RULE: &str = "additive";
    let domain = parent_domain(RULE, &children, domain)?;
    let certs = child_certs(RULE, &children)?;
    let orientation = certs[0].orientation;
    if certs.iter().any(|c| c.orientation != orientation) {
        return Err(BuildError::MixedOrientation { rule: RULE });
    }
    let cert = if certs.len() == 1 {
        certs[0].clone()
    } else {
        Certificate {
            xbar: concat_xbar(&certs),
            gamma: min_gamma(&certs),
            orientation,
            provenance: Provenance::rule(RULE, false),
        }
    };
    Ok(Expr::from_parts(Node::Sum(children), domain, Some(cert)))
}

/// Image range of a child with a known minimizer (or maximizer): the exact
/// value at `xbar` replaces the observed extreme on that side.
fn child_range(child: &Expr, cert: &Certificate) -> Result<(RangeInterval, f64), BuildError> {
    let o = observe(child)?;
    let at_xbar = child.eval(&cert.xbar);
    let (lo, hi) = match cert.orientation {
        Orientation::StarQuasiconvex => (o.min.min(at_xbar), o.max),
        Orientation::StarQuasiconcave => (o.min, o.max.max(at_xbar)),
    };
    // only the sampled end is widened; the end at the minimizer is exact
    let wide = RangeInterval::new(lo, hi)?.widen(SCREEN.range_widen);
    let range = match cert.orientation {
        Orientation::StarQuasiconvex => RangeInterval::new(lo, wide.hi)?,
        Orientation::StarQuasiconcave => RangeInterval::new(wide.lo, hi)?,
    };
    Ok((range, at_xbar))
}

/// Dini infimum of an increasing `g` over `range`, and whether the value
/// depended on the sampled end of the range rather than the exact one.
fn dini_for_certificate(
    g: &ScalarTransform,
    range: RangeInterval,
    exact_end: f64,
) -> Result<(f64, bool), BuildError> {
    if let Some(mu) = g.supplied_dini_inf() {
        if mu < 0.0 {
            return Err(BuildError::NegativeDini(mu));
        }
        return Ok((mu, false));
    }
    let est = g.dini_inf_over(range)?;
    if !est.is_analytic {
        return Ok((est.certified_mu(), true));
    }
    let at_exact = g.dini_inf_over(RangeInterval::new(exact_end, exact_end)?)?;
    Ok((est.mu, est.mu < at_exact.mu))
}

fn check_defined(g: &ScalarTransform, range: RangeInterval) -> Result<(), BuildError> {
    match g.as_builtin() {
        Some(b) if !b.defined_on(range) => Err(BuildError::Scalar(
            crate::scalar::ScalarError::OutsideDomain {
                name: g.name().to_string(),
                lo: range.lo,
                hi: range.hi,
            },
        )),
        Some(_) => Ok(()),
        None => Ok(g.screen_monotonicity(range, 65)?),
    }
}

/// `g o h` for an increasing continuous `g` and a star quasiconvex `h`.
///
/// The minimizer is preserved and the modulus becomes `mu * gamma`, where
/// `mu` bounds the lower Dini derivative of `g` over the image of `h`. The
/// image comes from grid screening, with the value at the minimizer as its
/// exact lower end.
pub fn compose_monotone(g: ScalarTransform, child: Expr) -> Result<Expr, BuildError> {
    const RULE: &str = "monotone_composition";
    if g.monotonicity() != Monotonicity::Increasing {
        return Err(BuildError::NotIncreasing(g.name().to_string()));
    }
    let cert = child
        .certificate()
        .ok_or(BuildError::MissingCertificate {
            rule: RULE,
            index: 0,
        })?
        .clone();
    require_orientation(RULE, &[&cert], Orientation::StarQuasiconvex)?;
    let (range, at_xbar) = child_range(&child, &cert)?;
    check_defined(&g, range)?;
    let (mu, screened) = if cert.gamma == 0.0 {
        (0.0, false)
    } else {
        dini_for_certificate(&g, range, at_xbar)?
    };
    let derived = Certificate {
        xbar: cert.xbar.clone(),
        gamma: mu * cert.gamma,
        orientation: Orientation::StarQuasiconvex,
        provenance: Provenance::rule(RULE, screened),
    };
    let domain = child.domain().clone();
    Ok(Expr::from_parts(
        Node::Compose {
            transform: g,
            child,
        },
        domain,
        Some(derived),
    ))
}

/// `1 / h` for a sign-definite `h`. Orientation flips and the modulus
/// becomes `mu * gamma` with `mu = inf 1/t^2` over the image of `h`.
pub fn reciprocal(child: Expr) -> Result<Expr, BuildError> {
    const RULE: &str = "reciprocal";
    let cert = child
        .certificate()
        .ok_or(BuildError::MissingCertificate {
            rule: RULE,
            index: 0,
        })?
        .clone();
    let o = observe(&child)?;
    let sign = if o.min > 0.0 {
        Sign::Positive
    } else if o.max < 0.0 {
        Sign::Negative
    } else {
        return Err(BuildError::SignIndefinite {
            lo: o.min,
            hi: o.max,
        });
    };
    let (range, _) = child_range(&child, &cert)?;
    let mu = match sign {
        Sign::Positive => 1.0 / (range.hi * range.hi),
        Sign::Negative => 1.0 / (range.lo * range.lo),
    };
    let derived = Certificate {
        xbar: cert.xbar.clone(),
        gamma: mu * cert.gamma,
        orientation: cert.orientation.flipped(),
        provenance: Provenance::rule(RULE, true),
    };
    let domain = child.domain().clone();
    Ok(Expr::from_parts(
        Node::Reciprocal { child, sign },
        domain,
        Some(derived),
    ))
}

/// Pointwise minimum `min_i h_i(x_i)` of star quasiconvex children.
///
/// The modulus is always 0: the active index can change along a segment,
/// so positive moduli do not survive.
pub fn min_combine(
    children: Vec<Expr>,
    domain: Option<&ProductDomain>,
) -> Result<Expr, BuildError> {
    const RULE: &str = "pointwise_min";
    let domain = parent_domain(RULE, &children, domain)?;
    let certs = child_certs(RULE, &children)?;
    require_orientation(RULE, &certs, Orientation::StarQuasiconvex)?;
    let cert = Certificate {
        xbar: concat_xbar(&certs),
        gamma: 0.0,
        orientation: Orientation::StarQuasiconvex,
        provenance: Provenance::rule(RULE, false),
    };
    Ok(Expr::from_parts(Node::Min(children), domain, Some(cert)))
}

/// Upper bounds `M_i >= sup h_i` for [`product`].
#[derive(Debug, Clone, PartialEq)]
pub enum ProductBounds {
    /// No bounds: modulus 0.
    None,
    Supplied(Vec<f64>),
    /// Grid maximum times `1 + 1e-6`.
    Estimate,
}

/// Product separable combination `H = prod_i h_i(x_i)` of positive star
/// quasiconvex factors. Without bounds the modulus is 0; with `h_i <= M_i`
/// it is `H(xbar) * min_i gamma_i / M_i`.
pub fn product(
    children: Vec<Expr>,
    domain: Option<&ProductDomain>,
    bounds: ProductBounds,
) -> Result<Expr, BuildError> {
    const RULE: &str = "product_separable";
    let domain = parent_domain(RULE, &children, domain)?;
    let certs = child_certs(RULE, &children)?;
    require_orientation(RULE, &certs, Orientation::StarQuasiconvex)?;
    let mut sups = Vec::with_capacity(children.len());
    for (index, c) in children.iter().enumerate() {
        let o = observe(c)?;
        if !(o.min > 0.0) {
            return Err(BuildError::NotPositive { index, min: o.min });
        }
        sups.push(o.max);
    }
    let h_at_xbar: f64 = children
        .iter()
        .zip(&certs)
        .map(|(c, cert)| c.eval(&cert.xbar))
        .product();
    let bounds = match bounds {
        ProductBounds::None => None,
        ProductBounds::Supplied(m) => {
            if m.len() != children.len() {
                return Err(BuildError::BoundCount {
                    expected: children.len(),
                    got: m.len(),
                });
            }
            for (index, (&bound, &sup)) in m.iter().zip(&sups).enumerate() {
                if !(bound >= sup) {
                    return Err(BuildError::BoundBelowSup { index, bound, sup });
                }
            }
            Some(m)
        }
        ProductBounds::Estimate => Some(
            sups.iter()
                .map(|s| s * (1.0 + SCREEN.bound_safety))
                .collect(),
        ),
    };
    let gamma = match &bounds {
        None => 0.0,
        Some(m) => {
            let ratio = certs
                .iter()
                .zip(m)
                .map(|(c, mi)| c.gamma / mi)
                .fold(f64::INFINITY, f64::min);
            h_at_xbar * ratio
        }
    };
    let cert = Certificate {
        xbar: concat_xbar(&certs),
        gamma,
        orientation: Orientation::StarQuasiconvex,
        provenance: Provenance::rule(RULE, true),
    };
    Ok(Expr::from_parts(
        Node::Product {
            children,
            positivity_checked: true,
            bounds,
            via_log: false,
        },
        domain,
        Some(cert),
    ))
}

/// `H = prod_i exp(f_i(x_i))` from log-factors `f_i = ln h_i` that share a
/// modulus of at least `gamma_log`; the result has modulus
/// `gamma_log * H(xbar)`.
pub fn product_via_log(
    log_children: Vec<Expr>,
    domain: Option<&ProductDomain>,
    gamma_log: f64,
) -> Result<Expr, BuildError> {
    const RULE: &str = "product_log";
    if !(gamma_log >= 0.0) || !gamma_log.is_finite() {
        return Err(BuildError::BadCertificate(format!(
            "common log-modulus must be finite and >= 0, got {gamma_log}"
        )));
    }
    let domain = parent_domain(RULE, &log_children, domain)?;
    let certs = child_certs(RULE, &log_children)?;
    require_orientation(RULE, &certs, Orientation::StarQuasiconvex)?;
    for (index, c) in certs.iter().enumerate() {
        if c.gamma < gamma_log {
            return Err(BuildError::InsufficientModulus {
                index,
                have: c.gamma,
                need: gamma_log,
            });
        }
    }
    let xbar = concat_xbar(&certs);
    let factors = log_children
        .iter()
        .cloned()
        .map(|f| compose_monotone(ScalarTransform::exp(), f))
        .collect::<Result<Vec<_>, _>>()?;
    let h_at_xbar: f64 = factors
        .iter()
        .zip(&certs)
        .map(|(c, cert)| c.eval(&cert.xbar))
        .product();
    if !(h_at_xbar > 0.0 && h_at_xbar.is_finite()) {
        return Err(BuildError::NonFinite {
            point: xbar,
            value: h_at_xbar,
        });
    }
    let cert = Certificate {
        xbar,
        gamma: gamma_log * h_at_xbar,
        orientation: Orientation::StarQuasiconvex,
        provenance: Provenance::rule(RULE, false),
    };
    Ok(Expr::from_parts(
        Node::Product {
            children: factors,
            positivity_checked: true,
            bounds: None,
            via_log: true,
        },
        domain,
        Some(cert),
    ))
}

fn check_weights(weights: &[f64], n: usize) -> Result<(), BuildError> {
    if weights.len() != n {
        return Err(BuildError::Weights(format!(
            "{} weights for {n} components",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(BuildError::Weights(format!("weight {w} is not positive")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(BuildError::Weights(format!(
            "weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Certificate of `f o c` derived from the certificate of `c` (star
/// quasiconvex): increasing `f` keeps the orientation, decreasing `f` flips it.
fn generator_component_cert(
    f: &ScalarTransform,
    child: &Expr,
    index: usize,
) -> Result<(Certificate, bool), BuildError> {
    const RULE: &str = "wqam";
    let cert = child
        .certificate()
        .ok_or(BuildError::MissingCertificate { rule: RULE, index })?;
    if cert.orientation != Orientation::StarQuasiconvex {
        return Err(BuildError::WrongOrientation {
            rule: RULE,
            index,
            expected: Orientation::StarQuasiconvex,
        });
    }
    let (range, at_xbar) = child_range(child, cert)?;
    let (increasing_part, orientation) = match f.monotonicity() {
        Monotonicity::Increasing => (f.clone(), Orientation::StarQuasiconvex),
        Monotonicity::Decreasing => (f.negated(), Orientation::StarQuasiconcave),
    };
    let (mu, screened) = if cert.gamma == 0.0 {
        (0.0, false)
    } else {
        dini_for_certificate(&increasing_part, range, at_xbar)?
    };
    Ok((
        Certificate {
            xbar: cert.xbar.clone(),
            gamma: mu * cert.gamma,
            orientation,
            provenance: Provenance::rule("monotone_composition", screened),
        },
        screened,
    ))
}

/// Weighted quasi-arithmetic mean `M_f = f^-1(sum_i w_i f(c_i(x_i)))`.
///
/// The component certificates for `f o c_i` are derived from the children:
/// increasing `f` needs star quasiconvex children, decreasing `f` turns
/// star quasiconvex children into star quasiconcave components. Without a
/// supplied inverse, builtins use their closed form and custom generators
/// are inverted by bisection.
pub fn wqam(
    f: ScalarTransform,
    f_inv: Option<ScalarTransform>,
    weights: Vec<f64>,
    children: Vec<Expr>,
) -> Result<Expr, BuildError> {
    let mut comps = Vec::with_capacity(children.len());
    let mut screened = false;
    for (i, c) in children.iter().enumerate() {
        let (cert, s) = generator_component_cert(&f, c, i)?;
        screened |= s;
        comps.push(cert);
    }
    build_wqam(f, f_inv, weights, children, comps, screened)
}

/// As [`wqam`], with claimed certificates for the components `f|X_i`
/// (`f o c_i`), each screened by sampling.
pub fn wqam_with_component_certs(
    f: ScalarTransform,
    f_inv: Option<ScalarTransform>,
    weights: Vec<f64>,
    children: Vec<Expr>,
    component_certs: Vec<Certificate>,
) -> Result<Expr, BuildError> {
    if component_certs.len() != children.len() {
        return Err(BuildError::Weights(format!(
            "{} component certificates for {} components",
            component_certs.len(),
            children.len()
        )));
    }
    let expected = match f.monotonicity() {
        Monotonicity::Increasing => Orientation::StarQuasiconvex,
        Monotonicity::Decreasing => Orientation::StarQuasiconcave,
    };
    for (index, (c, cert)) in children.iter().zip(&component_certs).enumerate() {
        if cert.orientation != expected {
            return Err(BuildError::WrongOrientation {
                rule: "wqam",
                index,
                expected,
            });
        }
        let composite = Expr::from_parts(
            Node::Compose {
                transform: f.clone(),
                child: c.clone(),
            },
            c.domain().clone(),
            None,
        );
        composite.with_claim(cert.clone())?;
    }
    build_wqam(f, f_inv, weights, children, component_certs, true)
}

fn build_wqam(
    f: ScalarTransform,
    f_inv: Option<ScalarTransform>,
    weights: Vec<f64>,
    children: Vec<Expr>,
    comps: Vec<Certificate>,
    mut screened: bool,
) -> Result<Expr, BuildError> {
    const RULE: &str = "wqam";
    let domain = parent_domain(RULE, &children, None)?;
    check_weights(&weights, children.len())?;

    // hull of the children's values: the generator must be monotone there
    let mut hull_lo = f64::INFINITY;
    let mut hull_hi = f64::NEG_INFINITY;
    for c in &children {
        let o = observe(c)?;
        hull_lo = hull_lo.min(o.min);
        hull_hi = hull_hi.max(o.max);
    }
    let hull = RangeInterval::new(hull_lo, hull_hi)?;
    check_defined(&f, hull)?;

    let comp_refs: Vec<&Certificate> = comps.iter().collect();
    let xbar = concat_xbar(&comp_refs);
    let gamma_s = comps
        .iter()
        .zip(&weights)
        .map(|(c, w)| w * c.gamma)
        .fold(f64::INFINITY, f64::min);

    let inverse = match f_inv.clone().or_else(|| f.inverse()) {
        Some(inv) => WqamInverse::Closed(inv),
        None => {
            let pad = SCREEN.range_widen * hull_lo.abs().max(hull_hi.abs()).max(1.0);
            let wide = RangeInterval::new(hull_lo - pad, hull_hi + pad)?;
            let bracket = if f.as_builtin().is_none() && f.screen_monotonicity(wide, 3).is_ok() {
                wide
            } else {
                hull
            };
            WqamInverse::Bisection(bracket)
        }
    };

    let mu = if gamma_s == 0.0 {
        0.0
    } else {
        // range of S = sum_i w_i f(c_i) over the domain; S(xbar) is its exact
        // minimum (f increasing) or maximum (f decreasing)
        let ranges = domain.block_ranges();
        let s_eval = |x: &[f64]| -> f64 {
            children
                .iter()
                .zip(&ranges)
                .zip(&weights)
                .map(|((c, r), w)| w * f.eval(c.eval(&x[r.clone()])))
                .sum()
        };
        let s_at_xbar = s_eval(&xbar);
        let flat = domain.flat();
        let mut pts = flat.grid(SCREEN.grid_per_axis, SCREEN.grid_cap);
        pts.extend(flat.sample(SCREEN.extra_samples, SCREEN.seed ^ 0x5eed));
        let vals = par::map(Exec::default(), &pts, |p| s_eval(p));
        let (mut s_lo, mut s_hi) = (s_at_xbar, s_at_xbar);
        for (p, &v) in pts.iter().zip(&vals) {
            if !v.is_finite() {
                return Err(BuildError::NonFinite {
                    point: p.clone(),
                    value: v,
                });
            }
            s_lo = s_lo.min(v);
            s_hi = s_hi.max(v);
        }
        let s_range = RangeInterval::new(s_lo, s_hi)?.widen(SCREEN.range_widen);
        let increasing = f.monotonicity() == Monotonicity::Increasing;
        let (mu, s) = inverse_dini(&f, &inverse, s_range, s_at_xbar, increasing)?;
        screened |= s;
        mu
    };

    let cert = Certificate {
        xbar,
        gamma: mu * gamma_s,
        orientation: Orientation::StarQuasiconvex,
        provenance: Provenance::rule(RULE, screened),
    };
    Ok(Expr::from_parts(
        Node::Wqam {
            generator: f,
            inverse,
            weights,
            children,
        },
        domain,
        Some(cert),
    ))
}

/// Dini infimum of `f^-1` over `S(X)` (increasing `f`), or of
/// `t -> f^-1(-t)` over `(-S)(X)` (decreasing `f`).
fn inverse_dini(
    f: &ScalarTransform,
    inverse: &WqamInverse,
    s_range: RangeInterval,
    s_at_xbar: f64,
    increasing: bool,
) -> Result<(f64, bool), BuildError> {
    if let WqamInverse::Closed(inv) = inverse {
        if let Some(mu) = inv.supplied_dini_inf() {
            if mu < 0.0 {
                return Err(BuildError::NegativeDini(mu));
            }
            return Ok((mu, false));
        }
        if inv.as_builtin().is_some() {
            // closed-form |(f^-1)'| is monotone on the range; reflecting both
            // the argument and the range leaves its endpoint values unchanged
            return dini_for_certificate(&absolute_slope(inv), s_range, s_at_xbar);
        }
    }
    let g: Box<dyn Fn(f64) -> f64 + Send + Sync> = match inverse {
        WqamInverse::Closed(inv) => {
            let inv = inv.clone();
            Box::new(move |t| inv.eval(t))
        }
        WqamInverse::Bisection(bracket) => {
            let f = f.clone();
            let bracket = *bracket;
            Box::new(move |t| invert_monotone(&f, t, bracket).unwrap_or(f64::NAN))
        }
    };
    let (tilde, range) = if increasing {
        (
            ScalarTransform::custom("f^-1", Monotonicity::Increasing, g),
            s_range,
        )
    } else {
        (
            ScalarTransform::custom("f^-1(-t)", Monotonicity::Increasing, move |t| g(-t)),
            RangeInterval::new(-s_range.hi, -s_range.lo)?,
        )
    };
    let est: DiniEstimate =
        estimate_dini_inf(&tilde, range, DEFAULT_BASE_POINTS, &default_steps(range))?;
    Ok((est.certified_mu(), true))
}

/// A builtin viewed as increasing for Dini purposes: decreasing builtins are
/// negated, which keeps `|g'|`.
fn absolute_slope(g: &ScalarTransform) -> ScalarTransform {
    match g.monotonicity() {
        Monotonicity::Increasing => g.clone(),
        Monotonicity::Decreasing => g.negated(),
    }
}
