//! Ready-made certified expressions for economic and financial models, the
//! CFMM trade validator and a regression corpus of known verdicts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{BoxDomain, Interval, Point, ProductDomain};
use crate::expr::{
    compose_monotone, min_combine, product, sum, wqam, AtomKind, BuildError, Certificate, Expr,
    ProductBounds,
};
use crate::par::Exec;
use crate::scalar::ScalarTransform;
use crate::verify::{
    check_star_inequality_with, cross_check_characterizations_with, falsify_quasiconvex_with,
    Campaign, CrossCheck, CrossCheckBudgets, VerificationReport, VerifyError, Witness,
};

/// Relative tolerance of [`cfmm_validate_trade`].
pub const TRADE_TOL: f64 = 1e-9;
const SOLVE_REL_TOL: f64 = 1e-12;
const SOLVE_MAX_ITERS: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApplibError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("post-trade reserve {index} would be {value}")]
    NonPositiveReserve { index: usize, value: f64 },
    #[error("no output amount in (0, {max}) restores the invariant")]
    NoRoot { max: f64 },
}

fn param(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ApplibError> {
    if ok {
        Ok(())
    } else {
        Err(ApplibError::Param(msg()))
    }
}

/// Maps probabilities to decision weights.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProbabilityWeighting {
    #[default]
    Identity,
    /// `p^c / (p^c + (1-p)^c)^(1/c)`, inverse-S shaped for `c < 1`.
    InverseS { c: f64 },
}

impl ProbabilityWeighting {
    pub fn weight(&self, p: f64) -> f64 {
        match *self {
            ProbabilityWeighting::Identity => p,
            ProbabilityWeighting::InverseS { c } => {
                let pc = p.powf(c);
                pc / (pc + (1.0 - p).powf(c)).powf(1.0 / c)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProspectComponent {
    pub alpha: f64,
    pub beta: f64,
    pub loss_aversion: f64,
    pub probability: f64,
    pub interval: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProspectParams {
    pub components: Vec<ProspectComponent>,
    #[serde(default)]
    pub weighting: ProbabilityWeighting,
}

impl ProspectParams {
    /// `n` outcomes on `[lo, hi]` with equal probabilities and the
    /// Tversky-Kahneman estimates `alpha = beta = 0.88`, `loss_aversion = 2.25`.
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self, ApplibError> {
        param(n > 0, || "need at least one outcome".into())?;
        let interval = Interval::new(lo, hi).map_err(|e| ApplibError::Param(e.to_string()))?;
        Ok(Self {
            components: (0..n)
                .map(|_| ProspectComponent {
                    alpha: 0.88,
                    beta: 0.88,
                    loss_aversion: 2.25,
                    probability: 1.0 / n as f64,
                    interval,
                })
                .collect(),
            weighting: ProbabilityWeighting::Identity,
        })
    }

    /// Decision weights `pi_i = w(p_i)`.
    pub fn weights(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| self.weighting.weight(c.probability))
            .collect()
    }

    fn validate(&self) -> Result<(), ApplibError> {
        param(!self.components.is_empty(), || {
            "need at least one outcome".into()
        })?;
        let total: f64 = self.components.iter().map(|c| c.probability).sum();
        param((total - 1.0).abs() <= 1e-9, || {
            format!("probabilities sum to {total}, not 1")
        })?;
        if let ProbabilityWeighting::InverseS { c } = self.weighting {
            param(c > 0.0 && c.is_finite(), || {
                format!("weighting parameter must be positive, got {c}")
            })?;
        }
        for (i, c) in self.components.iter().enumerate() {
            param(
                c.alpha > 0.0 && c.alpha < 1.0 && c.beta > 0.0 && c.beta < 1.0,
                || format!("outcome {i}: alpha and beta must lie in (0,1)"),
            )?;
            param(c.loss_aversion > 1.0, || {
                format!("outcome {i}: loss aversion must exceed 1")
            })?;
            param(c.probability > 0.0, || {
                format!("outcome {i}: probability must be positive")
            })?;
        }
        param(self.weights().iter().all(|w| *w > 0.0), || {
            "decision weights must be positive".into()
        })
    }
}

/// `V(x) = sum_i pi_i u_i(x_i)`, certified at the lower corner with modulus 0.
pub fn prospect_value(params: &ProspectParams) -> Result<Expr, ApplibError> {
    params.validate()?;
    let children = params
        .components
        .iter()
        .zip(params.weights())
        .map(|(c, pi)| {
            let u = Expr::atom(
                AtomKind::Prospect {
                    alpha: c.alpha,
                    beta: c.beta,
                    loss_aversion: c.loss_aversion,
                },
                BoxDomain::new(vec![c.interval])?,
            )?
            .with_claim(Certificate::claimed([c.interval.lo()], 0.0))?;
            compose_monotone(ScalarTransform::scale(pi), u)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sum(children, None)?)
}

fn positive_intervals(domain: &ProductDomain, n: usize) -> Result<Vec<Interval>, ApplibError> {
    param(domain.block_dims().iter().all(|&d| d == 1), || {
        "every block must be a single interval".into()
    })?;
    let ivs: Vec<Interval> = domain.blocks().iter().map(|b| b.intervals()[0]).collect();
    param(ivs.len() == n, || {
        format!("{n} exponents for {} intervals", ivs.len())
    })?;
    param(ivs.iter().all(|i| i.lo() > 0.0), || {
        "interval lower bounds must be positive".into()
    })?;
    Ok(ivs)
}

fn interval_atom(kind: AtomKind, iv: Interval, at: f64) -> Result<Expr, ApplibError> {
    Ok(
        Expr::atom(kind, BoxDomain::new(vec![iv]).map_err(BuildError::from)?)?
            .with_claim(Certificate::claimed([at], 0.0))?,
    )
}

/// `A * prod_i x_i^alpha_i` on a box of positive intervals, certified at the
/// lower corner with modulus 0.
pub fn cobb_douglas(a: f64, alphas: &[f64], domain: &ProductDomain) -> Result<Expr, ApplibError> {
    param(a > 0.0, || format!("scale must be positive, got {a}"))?;
    param(alphas.iter().all(|x| *x > 0.0), || {
        "exponents must be positive".into()
    })?;
    let ivs = positive_intervals(domain, alphas.len())?;
    let children = alphas
        .iter()
        .zip(&ivs)
        .enumerate()
        .map(|(i, (&alpha, &iv))| {
            let coef = if i == 0 { a } else { 1.0 };
            interval_atom(
                AtomKind::Power {
                    exponent: alpha,
                    coef,
                },
                iv,
                iv.lo(),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(product(children, Some(domain), ProductBounds::None)?)
}

/// `min_i (x_i / alpha_i)^alpha`, certified at the lower corner with modulus 0.
pub fn leontief(alpha: f64, alphas: &[f64], domain: &ProductDomain) -> Result<Expr, ApplibError> {
    param(alpha > 0.0, || {
        format!("outer exponent must be positive, got {alpha}")
    })?;
    param(alphas.iter().all(|x| *x > 0.0), || {
        "input coefficients must be positive".into()
    })?;
    let ivs = positive_intervals(domain, alphas.len())?;
    let children = alphas
        .iter()
        .zip(&ivs)
        .map(|(&ai, &iv)| {
            interval_atom(
                AtomKind::Linear {
                    coefs: vec![1.0 / ai],
                    offset: 0.0,
                },
                iv,
                iv.lo(),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let inner = min_combine(children, Some(domain))?;
    Ok(compose_monotone(ScalarTransform::power(alpha), inner)?)
}

/// Weighted quasi-arithmetic mean of the coordinates of `domain`, with
/// generator `f`.
pub fn coordinate_mean(
    f: ScalarTransform,
    weights: &[f64],
    domain: &[Interval],
) -> Result<Expr, ApplibError> {
    let children = domain
        .iter()
        .map(|iv| Expr::coordinate(iv.lo(), iv.hi()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(wqam(f, None, weights.to_vec(), children)?)
}

/// Pool state of a constant function market maker: a trade paying `y` and
/// receiving `x` is accepted when `phi(R + gamma_fee * y - x) = phi(R)`.
#[derive(Debug, Clone)]
pub struct CfmmState {
    pub reserves: Vec<f64>,
    pub gamma_fee: f64,
    pub phi: Expr,
}

impl CfmmState {
    pub fn new(reserves: Vec<f64>, gamma_fee: f64, phi: Expr) -> Result<Self, ApplibError> {
        param(reserves.iter().all(|r| *r > 0.0 && r.is_finite()), || {
            "reserves must be positive".into()
        })?;
        param(gamma_fee > 0.0 && gamma_fee <= 1.0, || {
            format!("fee factor must lie in (0, 1], got {gamma_fee}")
        })?;
        param(phi.dim() == reserves.len(), || {
            format!(
                "trading function has dimension {} for {} assets",
                phi.dim(),
                reserves.len()
            )
        })?;
        Ok(Self {
            reserves,
            gamma_fee,
            phi,
        })
    }

    /// Equal-weight geometric mean pool.
    pub fn geometric(reserves: Vec<f64>, gamma_fee: f64) -> Result<Self, ApplibError> {
        let n = reserves.len();
        Self::weighted_geometric(reserves, gamma_fee, &vec![1.0 / n as f64; n])
    }

    pub fn weighted_geometric(
        reserves: Vec<f64>,
        gamma_fee: f64,
        weights: &[f64],
    ) -> Result<Self, ApplibError> {
        let phi = coordinate_mean(ScalarTransform::ln(), weights, &reserve_box(&reserves)?)?;
        Self::new(reserves, gamma_fee, phi)
    }

    /// Equal-weight arithmetic mean (constant sum) pool.
    pub fn arithmetic(reserves: Vec<f64>, gamma_fee: f64) -> Result<Self, ApplibError> {
        let n = reserves.len();
        let phi = coordinate_mean(
            ScalarTransform::identity(),
            &vec![1.0 / n as f64; n],
            &reserve_box(&reserves)?,
        )?;
        Self::new(reserves, gamma_fee, phi)
    }

    fn post_trade(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, ApplibError> {
        param(
            x.len() == self.reserves.len() && y.len() == self.reserves.len(),
            || "trade vectors must match the number of assets".into(),
        )?;
        param(x.iter().chain(y).all(|v| *v >= 0.0), || {
            "trade amounts must be nonnegative".into()
        })?;
        let post: Vec<f64> = self
            .reserves
            .iter()
            .zip(x)
            .zip(y)
            .map(|((r, xi), yi)| r + self.gamma_fee * yi - xi)
            .collect();
        match post.iter().position(|v| !(*v > 0.0)) {
            Some(index) => Err(ApplibError::NonPositiveReserve {
                index,
                value: post[index],
            }),
            None => Ok(post),
        }
    }
}

fn reserve_box(reserves: &[f64]) -> Result<Vec<Interval>, ApplibError> {
    reserves
        .iter()
        .map(|&r| Interval::new(r * 1e-3, r * 1e3))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ApplibError::Param(e.to_string()))
}

/// True iff the trade keeps the trading function within `1e-9` relative.
pub fn cfmm_validate_trade(state: &CfmmState, x: &[f64], y: &[f64]) -> Result<bool, ApplibError> {
    let post = state.post_trade(x, y)?;
    let before = state.phi.eval(&state.reserves);
    let after = state.phi.eval(&post);
    Ok((after - before).abs() <= TRADE_TOL * (1.0 + before.abs()))
}

/// Amount of `receive_asset` returned for paying `pay_amount` of
/// `pay_asset`, by bisection to `1e-12` relative.
pub fn cfmm_solve_output(
    state: &CfmmState,
    pay_asset: usize,
    pay_amount: f64,
    receive_asset: usize,
) -> Result<f64, ApplibError> {
    let n = state.reserves.len();
    param(
        pay_asset < n && receive_asset < n && pay_asset != receive_asset,
        || "asset indices must be distinct and in range".into(),
    )?;
    param(pay_amount > 0.0 && pay_amount.is_finite(), || {
        format!("payment must be positive, got {pay_amount}")
    })?;
    let target = state.phi.eval(&state.reserves);
    let mut post = state.reserves.clone();
    post[pay_asset] += state.gamma_fee * pay_amount;
    let r = state.reserves[receive_asset];
    let excess = |delta: f64| {
        let mut p = post.clone();
        p[receive_asset] = r - delta;
        state.phi.eval(&p) - target
    };
    // excess is decreasing in delta; nonfinite values at the empty-reserve
    // end count as a shortfall
    let (mut lo, mut hi) = (0.0, r);
    if !(excess(lo) >= 0.0) {
        return Err(ApplibError::NoRoot { max: r });
    }
    let at_hi = excess(hi);
    if at_hi.is_finite() && at_hi > 0.0 {
        return Err(ApplibError::NoRoot { max: r });
    }
    for _ in 0..SOLVE_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= SOLVE_REL_TOL * mid {
            break;
        }
        let v = excess(mid);
        if v.is_finite() && v >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Benefit-to-risk model `P(x, y) = c prod x_i^alpha_i / (d prod y_j^beta_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioParams {
    pub c: f64,
    pub d: f64,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub x_box: Vec<Interval>,
    pub y_box: Vec<Interval>,
}

impl RatioParams {
    /// Unit constants and exponents on `[1, 2]` for every variable.
    pub fn unit(m: usize, l: usize) -> Self {
        let iv = Interval::new(1.0, 2.0).expect("valid interval");
        Self {
            c: 1.0,
            d: 1.0,
            alphas: vec![1.0; m],
            betas: vec![1.0; l],
            x_box: vec![iv; m],
            y_box: vec![iv; l],
        }
    }

    fn validate(&self) -> Result<(), ApplibError> {
        param(self.c > 0.0 && self.d > 0.0, || {
            "c and d must be positive".into()
        })?;
        param(!self.alphas.is_empty() && !self.betas.is_empty(), || {
            "need at least one benefit and one risk factor".into()
        })?;
        param(
            self.alphas.iter().chain(&self.betas).all(|v| *v > 0.0),
            || "exponents must be positive".into(),
        )?;
        param(
            self.alphas.len() == self.x_box.len() && self.betas.len() == self.y_box.len(),
            || "one interval per factor".into(),
        )?;
        param(
            self.x_box.iter().chain(&self.y_box).all(|i| i.lo() > 0.0),
            || "interval lower bounds must be positive".into(),
        )
    }

    /// Signed log terms: `(coef, interval, minimizer)` per variable, `x`
    /// first. `sign = 1` gives `ln P`, `sign = -1` gives `-ln P`.
    fn log_terms(&self, sign: f64) -> Vec<(f64, Interval, f64)> {
        let xs = self.alphas.iter().zip(&self.x_box).map(|(&a, &iv)| {
            let coef = sign * a;
            (coef, iv, if coef > 0.0 { iv.lo() } else { iv.hi() })
        });
        let ys = self.betas.iter().zip(&self.y_box).map(|(&b, &iv)| {
            let coef = -sign * b;
            (coef, iv, if coef > 0.0 { iv.lo() } else { iv.hi() })
        });
        xs.chain(ys).collect()
    }

    fn log_sum(&self, sign: f64) -> Result<Expr, ApplibError> {
        self.validate()?;
        let constant = sign * (self.c.ln() - self.d.ln());
        let children = self
            .log_terms(sign)
            .into_iter()
            .enumerate()
            .map(|(i, (coef, iv, at))| {
                let offset = if i == 0 { constant } else { 0.0 };
                interval_atom(AtomKind::Log { coef, offset }, iv, at)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(sum(children, None)?)
    }
}

/// `-ln P = ln d - ln c + sum_j beta_j ln y_j - sum_i alpha_i ln x_i`,
/// certified with modulus 0 at `(b_1, ..., b_m, a_1, ..., a_l)`: each term is
/// monotone on its interval and minimized at one end.
pub fn ratio_log_expr(params: &RatioParams) -> Result<Expr, ApplibError> {
    params.log_sum(-1.0)
}

/// `P = exp(ln P)`, certified at the minimizer of `ln P`,
/// `(a_1, ..., a_m, b_1, ..., b_l)`.
pub fn ratio_expr(params: &RatioParams) -> Result<Expr, ApplibError> {
    Ok(compose_monotone(
        ScalarTransform::exp(),
        params.log_sum(1.0)?,
    )?)
}

/// Verdicts a corpus entry is expected to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Expected {
    /// Outcome of the star inequality for the entry's certificate.
    pub star: bool,
    /// Whether the quasiconvexity falsifier should come back empty; `None`
    /// leaves it untested.
    pub quasiconvex: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub expr: Expr,
    pub cert: Certificate,
    /// Points tried before sampled ones.
    pub probes: Vec<Point>,
    pub expected: Expected,
}

fn entry(
    name: &'static str,
    expr: Expr,
    cert: Option<Certificate>,
    star: bool,
    quasiconvex: Option<bool>,
) -> CorpusEntry {
    let cert = cert
        .or_else(|| expr.certificate().cloned())
        .expect("corpus expressions are certified");
    CorpusEntry {
        name,
        expr,
        cert,
        probes: Vec::new(),
        expected: Expected { star, quasiconvex },
    }
}

fn square(lo: f64, hi: f64) -> Vec<Interval> {
    vec![Interval::new(lo, hi).expect("valid interval"); 2]
}

/// Regression corpus with pinned verdicts, negative controls included.
pub fn builtin_corpus() -> Result<Vec<CorpusEntry>, ApplibError> {
    let mut out = Vec::new();

    out.push(entry(
        "prospect",
        prospect_value(&ProspectParams::uniform(2, -5.0, 5.0)?)?,
        None,
        true,
        Some(false),
    ));

    let unit_square = ProductDomain::scalar_blocks(&square(1.0, 2.0)).map_err(BuildError::from)?;
    out.push(entry(
        "cobb_douglas",
        cobb_douglas(1.0, &[1.0, 1.0], &unit_square)?,
        None,
        true,
        Some(false),
    ));
    out.push(entry(
        "leontief",
        leontief(2.0, &[1.0, 1.0], &unit_square)?,
        None,
        true,
        Some(false),
    ));

    let geo = coordinate_mean(ScalarTransform::ln(), &[0.5, 0.5], &square(1.0, 4.0))?;
    out.push(entry(
        "geometric_mean",
        geo.clone(),
        None,
        true,
        Some(false),
    ));
    out.push(entry(
        "arithmetic_mean",
        coordinate_mean(ScalarTransform::identity(), &[0.5, 0.5], &square(1.0, 4.0))?,
        None,
        true,
        Some(true),
    ));

    let line = BoxDomain::from_bounds(&[(-1.0, 1.0)]).map_err(BuildError::from)?;
    let h1 = Expr::atom(AtomKind::ZeroIndicator, line.clone())?
        .with_claim(Certificate::claimed([0.0], 0.0))?;
    let h2 = Expr::atom(
        AtomKind::Power {
            exponent: 2.0,
            coef: 1.0,
        },
        line,
    )?
    .with_claim(Certificate::claimed([0.0], 2.0))?;
    let mut disc = entry(
        "discontinuous_sum",
        sum(vec![h1, h2], None)?,
        None,
        true,
        Some(false),
    );
    disc.probes = vec![Point::from([0.0, 1.0]), Point::from([0.1, 0.0])];
    out.push(disc);

    let identity = Expr::atom(
        AtomKind::Linear {
            coefs: vec![1.0],
            offset: 0.0,
        },
        BoxDomain::from_bounds(&[(1.0, 3.0)]).map_err(BuildError::from)?,
    )?
    .with_claim(Certificate::claimed([1.0], 1.0))?;
    out.push(entry(
        "identity_on_1_3",
        identity.clone(),
        None,
        true,
        Some(true),
    ));
    out.push(entry(
        "ln_identity_claimed_1",
        compose_monotone(ScalarTransform::ln(), identity)?,
        Some(Certificate::claimed([1.0], 1.0)),
        false,
        Some(true),
    ));

    out.push(entry(
        "ratio_model",
        ratio_log_expr(&RatioParams::unit(2, 3))?,
        None,
        true,
        Some(false),
    ));

    let sq_box = BoxDomain::cube(-1.0, 1.0, 2).map_err(BuildError::from)?;
    let sq = Expr::atom(
        AtomKind::SqNorm {
            coef: 1.0,
            center: None,
        },
        sq_box.clone(),
    )?
    .with_claim(Certificate::claimed([0.0, 0.0], 2.0))?;
    out.push(entry("sq_norm", sq, None, true, Some(true)));

    let neg = Expr::atom(
        AtomKind::SqNorm {
            coef: -1.0,
            center: None,
        },
        sq_box,
    )?
    .with_trusted_claim(Certificate::claimed([0.0, 0.0], 0.0))?;
    out.push(entry("neg_sq", neg, None, false, Some(false)));

    out.push(entry(
        "geometric_mean_wrong_point",
        geo,
        Some(Certificate::claimed([4.0, 4.0], 0.0)),
        false,
        Some(false),
    ));

    out.push(entry(
        "weighted_geometric_pool",
        coordinate_mean(ScalarTransform::ln(), &[0.3, 0.7], &square(1.0, 10.0))?,
        None,
        true,
        Some(false),
    ));

    Ok(out)
}

/// Sampling budgets of a corpus run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusBudgets {
    pub star_points: usize,
    pub star_lambdas: usize,
    pub qcx_pairs: usize,
    pub qcx_lambdas: usize,
    pub cross: CrossCheckBudgets,
}

impl Default for CorpusBudgets {
    fn default() -> Self {
        Self {
            star_points: 2000,
            star_lambdas: 21,
            qcx_pairs: 2000,
            qcx_lambdas: 21,
            cross: CrossCheckBudgets::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EntryOutcome {
    pub name: &'static str,
    pub expected: Expected,
    pub star: VerificationReport,
    pub quasiconvex_witness: Option<Witness>,
    pub cross: CrossCheck,
    /// Star and quasiconvexity verdicts as expected, characterizations agree.
    pub matches: bool,
}

/// Runs every check of a corpus entry and compares against its expected verdicts.
pub fn check_entry(
    entry: &CorpusEntry,
    budgets: &CorpusBudgets,
    seed: u64,
    exec: Exec,
) -> Result<EntryOutcome, VerifyError> {
    let campaign = Campaign {
        exec,
        probes: entry.probes.clone(),
    };
    let star = check_star_inequality_with(
        &campaign,
        &entry.expr,
        &entry.cert,
        budgets.star_points,
        budgets.star_lambdas,
        seed,
    )?;
    let quasiconvex_witness = falsify_quasiconvex_with(
        &campaign,
        &entry.expr,
        budgets.qcx_pairs,
        budgets.qcx_lambdas,
        seed,
    );
    let cross = cross_check_characterizations_with(
        &campaign,
        &entry.expr,
        &entry.cert.xbar,
        CrossCheckBudgets {
            seed,
            ..budgets.cross
        },
    )?;
    let qcx_ok = match entry.expected.quasiconvex {
        Some(q) => q == quasiconvex_witness.is_none(),
        None => true,
    };
    let matches = star.passed == entry.expected.star && qcx_ok && cross.agree;
    Ok(EntryOutcome {
        name: entry.name,
        expected: entry.expected,
        star,
        quasiconvex_witness,
        cross,
        matches,
    })
}
