//! Sampling-based verification and falsification.
//!
//! Every check is falsification-grade: a pass means no violation was found
//! among the sampled cells, not that the property holds. Reports carry
//! `falsification_grade: true` to say so.
//!
//! Slack is measured relative to the scale of the inequality,
//! `(rhs - lhs) / (1 + |reference|)`, so one tolerance of `1e-9` serves
//! functions of any magnitude and `passed == (worst_slack >= -tolerance)`.

use std::fmt;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{dist_sq, segment_into, BoxDomain, DomainError, Point};
use crate::expr::{Certificate, Expr, Orientation};
use crate::par::{self, Exec};

/// Relative tolerance factor: a cell fails when `lhs > rhs + 1e-9 * (1 + |reference|)`.
pub const TOLERANCE: f64 = 1e-9;

/// Points on every λ grid, in the order they are tried.
const PRIORITY_LAMBDAS: [f64; 5] = [0.5, 0.25, 0.75, 0.0, 1.0];

const SUBLEVEL_LAMBDAS: usize = 33;
const SUBLEVEL_GRID_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("non-finite value {value} at {point}")]
    NonFinite { point: Point, value: f64 },
    #[error("point {0} lies outside the domain")]
    OutsideDomain(Point),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Which inequality a [`Witness`] violates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessProperty {
    /// `s*h(λx + (1-λ)y) <= s*h(y) - λ(1-λ)(γ/2)|y-x|^2` with `x = xbar`,
    /// `s = +1` (star quasiconvex) or `-1` (star quasiconcave).
    Star { gamma: f64, sign: f64 },
    /// `h(λx + (1-λ)y) <= max(h(x), h(y))`.
    Quasiconvex,
    /// `h(xbar) <= h(y)`, with `x = xbar`.
    Minimizer,
    /// `h(λx + (1-λ)y) <= delta` for `h(y) <= delta`, `x = xbar`.
    Sublevel { delta: f64 },
    /// The quasiconvex pair inequality along a line through `xbar`, with a
    /// quadratic term of modulus `gamma`.
    Ray { gamma: f64 },
}

/// A counterexample: `lhs > rhs + tolerance`, reproducible from the stored
/// points with [`Witness::recheck`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: Point,
    pub y: Point,
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub property: WitnessProperty,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "x = {}, y = {}, lambda = {}: lhs {} > rhs {}",
            self.x, self.y, self.lambda, self.lhs, self.rhs
        )
    }
}

/// One evaluated cell of a campaign.
struct Cell {
    lhs: f64,
    rhs: f64,
    reference: f64,
}

impl Cell {
    fn tolerance(&self) -> f64 {
        TOLERANCE * (1.0 + self.reference.abs())
    }

    fn scaled_slack(&self) -> f64 {
        (self.rhs - self.lhs) / (1.0 + self.reference.abs())
    }

    fn violated(&self) -> bool {
        self.lhs > self.rhs + self.tolerance()
    }
}

fn star_cell(
    h: impl Fn(&[f64]) -> f64,
    x: &[f64],
    y: &[f64],
    lambda: f64,
    gamma: f64,
    sign: f64,
) -> Cell {
    let mut mid = vec![0.0; x.len()];
    segment_into(x, y, lambda, &mut mid);
    let hy = h(y);
    let quad = lambda * (1.0 - lambda) * 0.5 * gamma * dist_sq(x, y);
    Cell {
        lhs: sign * h(&mid),
        rhs: sign * hy - quad,
        reference: hy,
    }
}

fn pair_cell(h: impl Fn(&[f64]) -> f64, x: &[f64], y: &[f64], lambda: f64, gamma: f64) -> Cell {
    let mut mid = vec![0.0; x.len()];
    segment_into(x, y, lambda, &mut mid);
    let m = h(x).max(h(y));
    let quad = lambda * (1.0 - lambda) * 0.5 * gamma * dist_sq(x, y);
    Cell {
        lhs: h(&mid),
        rhs: m - quad,
        reference: m,
    }
}

fn cell_for(e: &Expr, w: &Witness) -> Cell {
    let h = |p: &[f64]| e.eval(p);
    match w.property {
        WitnessProperty::Star { gamma, sign } => star_cell(h, &w.x, &w.y, w.lambda, gamma, sign),
        WitnessProperty::Quasiconvex => pair_cell(h, &w.x, &w.y, w.lambda, 0.0),
        WitnessProperty::Ray { gamma } => pair_cell(h, &w.x, &w.y, w.lambda, gamma),
        WitnessProperty::Minimizer => {
            let hy = h(&w.y);
            Cell {
                lhs: h(&w.x),
                rhs: hy,
                reference: hy,
            }
        }
        WitnessProperty::Sublevel { delta } => {
            let mut mid = vec![0.0; w.x.len()];
            segment_into(&w.x, &w.y, w.lambda, &mut mid);
            Cell {
                lhs: h(&mid),
                rhs: delta,
                reference: delta,
            }
        }
    }
}

impl Witness {
    fn from_cell(
        x: &[f64],
        y: &[f64],
        lambda: f64,
        cell: &Cell,
        property: WitnessProperty,
    ) -> Self {
        Self {
            x: Point::new(x.to_vec()),
            y: Point::new(y.to_vec()),
            lambda,
            lhs: cell.lhs,
            rhs: cell.rhs,
            tolerance: cell.tolerance(),
            property,
        }
    }

    /// Re-evaluates the stored cell on `e`; true when it still violates.
    pub fn recheck(&self, e: &Expr) -> bool {
        cell_for(e, self).violated()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub property: String,
    pub passed: bool,
    pub samples_used: usize,
    /// Minimum over cells of `(rhs - lhs) / (1 + |reference|)`.
    pub worst_slack: f64,
    pub witness: Option<Witness>,
    pub tolerance: f64,
    pub seed: u64,
    pub falsification_grade: bool,
}

impl VerificationReport {
    fn new(property: &str, seed: u64) -> Self {
        Self {
            property: property.to_string(),
            passed: true,
            samples_used: 0,
            worst_slack: f64::INFINITY,
            witness: None,
            tolerance: TOLERANCE,
            seed,
            falsification_grade: true,
        }
    }

    /// Merges a partial campaign: slack by minimum, witness from the
    /// earlier partial. Merging in a fixed order is deterministic.
    pub fn merge(mut self, other: VerificationReport) -> Self {
        self.samples_used += other.samples_used;
        self.worst_slack = self.worst_slack.min(other.worst_slack);
        if self.witness.is_none() {
            self.witness = other.witness;
        }
        self.passed = self.witness.is_none();
        self
    }

    fn record(&mut self, x: &[f64], y: &[f64], lambda: f64, cell: Cell, property: WitnessProperty) {
        self.samples_used += 1;
        self.worst_slack = self.worst_slack.min(cell.scaled_slack());
        if self.witness.is_none() && cell.violated() {
            self.witness = Some(Witness::from_cell(x, y, lambda, &cell, property));
            self.passed = false;
        }
    }
}

/// Shared knobs of a campaign: the executor and extra points tried before
/// any sampled ones.
#[derive(Debug, Clone, Default)]
pub struct Campaign {
    pub exec: Exec,
    pub probes: Vec<Point>,
}

impl Campaign {
    pub fn with_probes(probes: Vec<Point>) -> Self {
        Self {
            probes,
            ..Self::default()
        }
    }

    pub fn sequential(mut self) -> Self {
        self.exec = Exec::Sequential;
        self
    }

    fn points(&self, dom: &BoxDomain, n: usize, seed: u64) -> Vec<Point> {
        let mut pts: Vec<Point> = self
            .probes
            .iter()
            .filter(|p| dom.contains(p).unwrap_or(false))
            .cloned()
            .collect();
        pts.extend(dom.sample(n, seed));
        pts
    }
}

/// `n` uniform values on `[0, 1]` (endpoints included) together with
/// `{0, 1/4, 1/2, 3/4, 1}`, ordered `1/2, 1/4, 3/4` first.
pub fn lambda_grid(n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = PRIORITY_LAMBDAS.to_vec();
    if n >= 2 {
        for k in 0..n {
            let l = if k + 1 == n {
                1.0
            } else {
                k as f64 / (n - 1) as f64
            };
            if !out.contains(&l) {
                out.push(l);
            }
        }
    }
    out
}

fn check_finite(p: &[f64], v: f64) -> Result<f64, VerifyError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(VerifyError::NonFinite {
            point: Point::new(p.to_vec()),
            value: v,
        })
    }
}

fn finite_eval(e: &Expr, p: &[f64]) -> Result<f64, VerifyError> {
    check_finite(p, e.eval(p))
}

fn require_inside(e: &Expr, p: &Point) -> Result<(), VerifyError> {
    if e.domain().contains(p)? {
        Ok(())
    } else {
        Err(VerifyError::OutsideDomain(p.clone()))
    }
}

/// Tests the defining inequality of `cert` on sampled `y` and a λ grid.
pub fn check_star_inequality(
    e: &Expr,
    cert: &Certificate,
    n_points: usize,
    n_lambdas: usize,
    seed: u64,
) -> Result<VerificationReport, VerifyError> {
    check_star_inequality_with(&Campaign::default(), e, cert, n_points, n_lambdas, seed)
}

pub fn check_star_inequality_with(
    campaign: &Campaign,
    e: &Expr,
    cert: &Certificate,
    n_points: usize,
    n_lambdas: usize,
    seed: u64,
) -> Result<VerificationReport, VerifyError> {
    require_inside(e, &cert.xbar)?;
    let sign = match cert.orientation {
        Orientation::StarQuasiconvex => 1.0,
        Orientation::StarQuasiconcave => -1.0,
    };
    let property = WitnessProperty::Star {
        gamma: cert.gamma,
        sign,
    };
    let xbar = &cert.xbar;
    finite_eval(e, xbar)?;
    let lambdas = lambda_grid(n_lambdas);
    let ys = campaign.points(e.domain().flat(), n_points, seed);
    let partials = par::map(campaign.exec, &ys, |y| {
        let mut rep = VerificationReport::new("star_inequality", seed);
        finite_eval(e, y)?;
        let mut mid = vec![0.0; y.len()];
        for &l in &lambdas {
            segment_into(xbar, y, l, &mut mid);
            finite_eval(e, &mid)?;
            let cell = star_cell(|p| e.eval(p), xbar, y, l, cert.gamma, sign);
            rep.record(xbar, y, l, cell, property);
        }
        Ok(rep)
    });
    merge_all("star_inequality", seed, partials)
}

fn merge_all(
    property: &str,
    seed: u64,
    partials: Vec<Result<VerificationReport, VerifyError>>,
) -> Result<VerificationReport, VerifyError> {
    let mut out = VerificationReport::new(property, seed);
    for p in partials {
        out = out.merge(p?);
    }
    Ok(out)
}

/// Checks that every sublevel set `{h <= delta}` met by the tensor grid is
/// star-shaped at `xbar`, along 33 values of λ. Empty `deltas` selects the
/// 10/25/50/75/90% quantiles of the grid values.
pub fn check_sublevel_star(
    e: &Expr,
    xbar: &Point,
    deltas: &[f64],
    grid_per_axis: usize,
) -> Result<VerificationReport, VerifyError> {
    check_sublevel_star_with(&Campaign::default(), e, xbar, deltas, grid_per_axis)
}

pub fn check_sublevel_star_with(
    campaign: &Campaign,
    e: &Expr,
    xbar: &Point,
    deltas: &[f64],
    grid_per_axis: usize,
) -> Result<VerificationReport, VerifyError> {
    require_inside(e, xbar)?;
    let grid = e
        .domain()
        .flat()
        .grid(grid_per_axis.max(3), SUBLEVEL_GRID_CAP);
    let values = par::map(campaign.exec, &grid, |p| e.eval(p));
    let deltas = if deltas.is_empty() {
        quantiles(&values, &[0.1, 0.25, 0.5, 0.75, 0.9])
    } else {
        deltas.to_vec()
    };
    let lambdas: Vec<f64> = (0..SUBLEVEL_LAMBDAS)
        .map(|k| k as f64 / (SUBLEVEL_LAMBDAS - 1) as f64)
        .collect();
    let mut out = VerificationReport::new("sublevel_star", 0);
    for &delta in &deltas {
        let members: Vec<usize> = (0..grid.len()).filter(|&i| values[i] <= delta).collect();
        let partials = par::map(campaign.exec, &members, |&i| {
            let p = &grid[i];
            let mut rep = VerificationReport::new("sublevel_star", 0);
            let mut mid = vec![0.0; p.len()];
            for &l in &lambdas {
                segment_into(xbar, p, l, &mut mid);
                let v = e.eval(&mid);
                let cell = Cell {
                    lhs: if v.is_nan() { f64::INFINITY } else { v },
                    rhs: delta,
                    reference: delta,
                };
                rep.record(xbar, p, l, cell, WitnessProperty::Sublevel { delta });
            }
            rep
        });
        for p in partials {
            out = out.merge(p);
        }
    }
    Ok(out)
}

fn quantiles(values: &[f64], qs: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return Vec::new();
    }
    v.sort_by(f64::total_cmp);
    qs.iter()
        .map(|q| v[((v.len() - 1) as f64 * q).round() as usize])
        .collect()
}

/// Restricts `e` to lines through `xbar` toward sampled domain points and
/// tests the pair inequality on each line.
///
/// Both rays of a line are covered: pairs on one side of `xbar` are tested
/// with modulus `gamma`, pairs straddling it with modulus 0 (a function
/// nondecreasing away from its minimizer on each ray is quasiconvex on the
/// whole line). Each sampled value is also compared with `h(xbar)`, since
/// monotone profiles pass the pair test even when `xbar` is a maximizer.
pub fn check_ray_quasiconvex(
    e: &Expr,
    xbar: &Point,
    gamma: f64,
    n_rays: usize,
    n_t: usize,
    seed: u64,
) -> Result<VerificationReport, VerifyError> {
    check_ray_quasiconvex_with(&Campaign::default(), e, xbar, gamma, n_rays, n_t, seed)
}

pub fn check_ray_quasiconvex_with(
    campaign: &Campaign,
    e: &Expr,
    xbar: &Point,
    gamma: f64,
    n_rays: usize,
    n_t: usize,
    seed: u64,
) -> Result<VerificationReport, VerifyError> {
    require_inside(e, xbar)?;
    let dom = e.domain().flat();
    let h_xbar = finite_eval(e, xbar)?;
    let targets = campaign.points(dom, n_rays.max(1), seed);
    let lambdas = lambda_grid(5);
    let n_t = n_t.max(2);
    let partials = par::map(campaign.exec, &targets, |target| {
        let mut rep = VerificationReport::new("ray_quasiconvex", seed);
        let diff: Vec<f64> = target.iter().zip(xbar.iter()).map(|(a, b)| a - b).collect();
        let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            return rep;
        }
        let dir: Vec<f64> = diff.iter().map(|d| d / norm).collect();
        let back: Vec<f64> = dir.iter().map(|d| -d).collect();
        let t_hi = dom.ray_exit(xbar, &dir);
        let t_lo = -dom.ray_exit(xbar, &back);
        let mut ts: Vec<f64> = (0..n_t)
            .map(|k| t_lo + (t_hi - t_lo) * k as f64 / (n_t - 1) as f64)
            .collect();
        ts.push(0.0);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let pts: Vec<Vec<f64>> = ts.iter().map(|&t| line_point(dom, xbar, &dir, t)).collect();
        for (i, p) in pts.iter().enumerate() {
            if ts[i] == 0.0 {
                continue;
            }
            let hp = e.eval(p);
            let cell = Cell {
                lhs: h_xbar,
                rhs: hp,
                reference: hp,
            };
            rep.record(xbar, p, 1.0, cell, WitnessProperty::Minimizer);
        }
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let same_side = ts[i] * ts[j] >= 0.0;
                let g = if same_side { gamma } else { 0.0 };
                for &l in &lambdas {
                    let cell = pair_cell(|p| e.eval(p), &pts[i], &pts[j], l, g);
                    rep.record(&pts[i], &pts[j], l, cell, WitnessProperty::Ray { gamma: g });
                }
            }
        }
        rep
    });
    let mut out = VerificationReport::new("ray_quasiconvex", seed);
    for p in partials {
        out = out.merge(p);
    }
    Ok(out)
}

fn line_point(dom: &BoxDomain, xbar: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    xbar.iter()
        .zip(dir)
        .zip(dom.intervals())
        .map(|((x, d), i)| (x + t * d).clamp(i.lo(), i.hi()))
        .collect()
}

/// Searches sampled `(x, y, λ)` for `h(λx + (1-λ)y) > max(h(x), h(y)) + tol`.
/// Pairs among the probes and corners are tried before random pairs.
pub fn falsify_quasiconvex(
    e: &Expr,
    n_pairs: usize,
    n_lambdas: usize,
    seed: u64,
) -> Option<Witness> {
    falsify_quasiconvex_with(&Campaign::default(), e, n_pairs, n_lambdas, seed)
}

pub fn falsify_quasiconvex_with(
    campaign: &Campaign,
    e: &Expr,
    n_pairs: usize,
    n_lambdas: usize,
    seed: u64,
) -> Option<Witness> {
    let dom = e.domain().flat();
    let mut anchors: Vec<Point> = campaign
        .probes
        .iter()
        .filter(|p| dom.contains(p).unwrap_or(false))
        .cloned()
        .collect();
    anchors.extend(dom.corners());
    let mut pairs = Vec::with_capacity(n_pairs);
    'outer: for i in 0..anchors.len() {
        for j in i + 1..anchors.len() {
            if pairs.len() >= n_pairs {
                break 'outer;
            }
            pairs.push((anchors[i].clone(), anchors[j].clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while pairs.len() < n_pairs {
        pairs.push((dom.random_point(&mut rng), dom.random_point(&mut rng)));
    }
    let lambdas = lambda_grid(n_lambdas);
    let found = par::map(campaign.exec, &pairs, |(x, y)| {
        lambdas.iter().find_map(|&l| {
            let cell = pair_cell(|p| e.eval(p), x, y, l, 0.0);
            cell.violated()
                .then(|| Witness::from_cell(x, y, l, &cell, WitnessProperty::Quasiconvex))
        })
    });
    found.into_iter().flatten().next()
}

/// Returns a sampled `y` with `h(y) < h(xbar) - tol`, if any.
pub fn falsify_minimizer(e: &Expr, xbar: &Point, n_points: usize, seed: u64) -> Option<Witness> {
    falsify_minimizer_with(&Campaign::default(), e, xbar, n_points, seed)
}

pub fn falsify_minimizer_with(
    campaign: &Campaign,
    e: &Expr,
    xbar: &Point,
    n_points: usize,
    seed: u64,
) -> Option<Witness> {
    let h_xbar = e.eval(xbar);
    let ys = campaign.points(e.domain().flat(), n_points, seed);
    let found = par::map(campaign.exec, &ys, |y| {
        let hy = e.eval(y);
        let cell = Cell {
            lhs: h_xbar,
            rhs: hy,
            reference: hy,
        };
        cell.violated()
            .then(|| Witness::from_cell(xbar, y, 1.0, &cell, WitnessProperty::Minimizer))
    });
    found.into_iter().flatten().next()
}

/// Budgets for [`cross_check_characterizations`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheckBudgets {
    pub grid_per_axis: usize,
    pub n_rays: usize,
    pub n_t: usize,
    pub seed: u64,
}

impl Default for CrossCheckBudgets {
    fn default() -> Self {
        Self {
            grid_per_axis: 41,
            n_rays: 64,
            n_t: 17,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub sublevel: VerificationReport,
    pub ray: VerificationReport,
    pub agree: bool,
}

/// Runs the sublevel and ray characterizations (modulus 0) and compares
/// their verdicts.
pub fn cross_check_characterizations(
    e: &Expr,
    xbar: &Point,
    budgets: CrossCheckBudgets,
) -> Result<CrossCheck, VerifyError> {
    cross_check_characterizations_with(&Campaign::default(), e, xbar, budgets)
}

pub fn cross_check_characterizations_with(
    campaign: &Campaign,
    e: &Expr,
    xbar: &Point,
    budgets: CrossCheckBudgets,
) -> Result<CrossCheck, VerifyError> {
    let sublevel = check_sublevel_star_with(campaign, e, xbar, &[], budgets.grid_per_axis)?;
    let ray = check_ray_quasiconvex_with(
        campaign,
        e,
        xbar,
        0.0,
        budgets.n_rays,
        budgets.n_t,
        budgets.seed,
    )?;
    let agree = sublevel.passed == ray.passed;
    Ok(CrossCheck {
        sublevel,
        ray,
        agree,
    })
}

#[cfg(test)]
mod tests;
