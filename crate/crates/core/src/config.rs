//! JSON expression configs.
//!
//! ```json
//! {
//!   "schema": 1,
//!   "expr": {"kind": "sum", "children": [
//!     {"kind": "atom", "atom": {"type": "zero_indicator"}, "domain": [[-1, 1]],
//!      "claim": {"xbar": [0], "gamma": 0}},
//!     {"kind": "atom", "atom": {"type": "power", "exponent": 2}, "domain": [[-1, 1]],
//!      "claim": {"xbar": [0], "gamma": 2}}
//!   ]},
//!   "probes": [[0, 1], [0.1, 0]]
//! }
//! ```
//!
//! A top-level `claim` replaces the expression's own certificate as the one
//! to verify; it is not screened, so a false claim surfaces as a failed
//! verification rather than a build error.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::applib::{self, ApplibError, ProbabilityWeighting, ProspectParams, RatioParams};
use crate::domain::{BoxDomain, Interval, Point, ProductDomain};
use crate::expr::{self, AtomKind, BuildError, Certificate, Expr, Orientation, ProductBounds};
use crate::scalar::{Builtin, ScalarTransform};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("unsupported schema version {0}")]
    Schema(u32),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Applib(#[from] ApplibError),
    #[error("{0}")]
    Invalid(String),
}

impl ConfigError {
    /// True for failures reading or parsing the config, false for failures
    /// building the expression it describes.
    pub fn is_parse(&self) -> bool {
        matches!(
            self,
            ConfigError::Io { .. } | ConfigError::Parse(_) | ConfigError::Schema(_)
        )
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema: u32,
    pub expr: NodeSpec,
    #[serde(default)]
    pub claim: Option<ClaimSpec>,
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimSpec {
    pub xbar: Vec<f64>,
    pub gamma: f64,
    #[serde(default = "convex")]
    pub orientation: Orientation,
    /// Skip the sampling screen when attaching the claim to an atom.
    #[serde(default)]
    pub trusted: bool,
}

fn convex() -> Orientation {
    Orientation::StarQuasiconvex
}

impl ClaimSpec {
    fn certificate(&self) -> Certificate {
        let c = Certificate::claimed(self.xbar.clone(), self.gamma);
        Certificate {
            orientation: self.orientation,
            ..c
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BoundsSpec {
    Supplied(Vec<f64>),
    Named(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeSpec {
    Atom {
        atom: AtomKind,
        domain: BoxDomain,
        #[serde(default)]
        claim: Option<ClaimSpec>,
    },
    Sum {
        children: Vec<NodeSpec>,
    },
    Product {
        children: Vec<NodeSpec>,
        #[serde(default)]
        bounds: Option<BoundsSpec>,
    },
    ProductViaLog {
        children: Vec<NodeSpec>,
        gamma_log: f64,
    },
    Min {
        children: Vec<NodeSpec>,
    },
    Compose {
        transform: Builtin,
        child: Box<NodeSpec>,
        #[serde(default)]
        dini_inf: Option<f64>,
    },
    Reciprocal {
        child: Box<NodeSpec>,
    },
    Wqam {
        generator: Builtin,
        #[serde(default)]
        inverse: Option<Builtin>,
        weights: Vec<f64>,
        children: Vec<NodeSpec>,
    },
    Prospect {
        #[serde(default)]
        params: Option<ProspectParams>,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
        #[serde(default)]
        weighting: Option<ProbabilityWeighting>,
    },
    CobbDouglas {
        #[serde(default = "one")]
        scale: f64,
        alphas: Vec<f64>,
        domain: Vec<Interval>,
    },
    Leontief {
        alpha: f64,
        alphas: Vec<f64>,
        domain: Vec<Interval>,
    },
    CoordinateMean {
        generator: Builtin,
        weights: Vec<f64>,
        domain: Vec<Interval>,
    },
    RatioLog {
        params: RatioParams,
    },
    Ratio {
        params: RatioParams,
    },
    Corpus {
        name: String,
    },
}

fn one() -> f64 {
    1.0
}

/// A built config: the expression, the certificate to verify (if any) and
/// the campaign extras.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub expr: Expr,
    pub cert: Option<Certificate>,
    pub probes: Vec<Point>,
    pub deltas: Vec<f64>,
    pub seed: Option<u64>,
}

pub fn parse(text: &str) -> Result<ConfigFile, ConfigError> {
    let cfg: ConfigFile =
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    if cfg.schema != SCHEMA_VERSION {
        return Err(ConfigError::Schema(cfg.schema));
    }
    Ok(cfg)
}

/// Reads `source` as inline JSON when it starts with `{`, as a path otherwise.
pub fn read_source(source: &str) -> Result<String, ConfigError> {
    if source.trim().is_empty() {
        return Err(ConfigError::Parse("empty config".into()));
    }
    if source.trim_start().starts_with('{') {
        return Ok(source.to_string());
    }
    std::fs::read_to_string(Path::new(source)).map_err(|e| ConfigError::Io {
        path: source.to_string(),
        source: e,
    })
}

pub fn load(source: &str) -> Result<Loaded, ConfigError> {
    build(&parse(&read_source(source)?)?)
}

pub fn build(cfg: &ConfigFile) -> Result<Loaded, ConfigError> {
    let (expr, mut cert, mut probes) = match &cfg.expr {
        NodeSpec::Corpus { name } => {
            let e = corpus_entry(name)?;
            (e.expr, Some(e.cert), e.probes)
        }
        spec => {
            let e = build_node(spec)?;
            let c = e.certificate().cloned();
            (e, c, Vec::new())
        }
    };
    if let Some(claim) = &cfg.claim {
        let c = claim.certificate();
        if c.xbar.dim() != expr.dim()
            || !expr.domain().contains(&c.xbar).map_err(BuildError::from)?
        {
            return Err(ConfigError::Invalid(format!(
                "claimed minimizer {} lies outside the domain",
                c.xbar
            )));
        }
        if !(c.gamma >= 0.0) || !c.gamma.is_finite() {
            return Err(ConfigError::Invalid(format!(
                "claimed modulus must be finite and >= 0, got {}",
                c.gamma
            )));
        }
        cert = Some(c);
    }
    for p in &cfg.probes {
        if p.len() != expr.dim() {
            return Err(ConfigError::Invalid(format!(
                "probe of dimension {} for an expression of dimension {}",
                p.len(),
                expr.dim()
            )));
        }
        probes.push(Point::new(p.clone()));
    }
    Ok(Loaded {
        expr,
        cert,
        probes,
        deltas: cfg.deltas.clone(),
        seed: cfg.seed,
    })
}

fn corpus_entry(name: &str) -> Result<applib::CorpusEntry, ConfigError> {
    applib::builtin_corpus()?
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| ConfigError::Invalid(format!("no corpus entry named {name:?}")))
}

fn transform(b: Builtin) -> Result<ScalarTransform, ConfigError> {
    ScalarTransform::try_builtin(b)
        .ok_or_else(|| ConfigError::Invalid(format!("transform {b:?} is not strictly monotone")))
}

fn children(specs: &[NodeSpec]) -> Result<Vec<Expr>, ConfigError> {
    specs.iter().map(build_node).collect()
}

fn scalar_domain(ivs: &[Interval]) -> Result<ProductDomain, ConfigError> {
    Ok(ProductDomain::scalar_blocks(ivs).map_err(BuildError::from)?)
}

pub fn build_node(spec: &NodeSpec) -> Result<Expr, ConfigError> {
    Ok(match spec {
        NodeSpec::Atom {
            atom,
            domain,
            claim,
        } => {
            let e = Expr::atom(atom.clone(), domain.clone())?;
            match claim {
                Some(c) if c.trusted => e.with_trusted_claim(c.certificate())?,
                Some(c) => e.with_claim(c.certificate())?,
                None => e,
            }
        }
        NodeSpec::Sum { children: c } => expr::sum(children(c)?, None)?,
        NodeSpec::Min { children: c } => expr::min_combine(children(c)?, None)?,
        NodeSpec::Product {
            children: c,
            bounds,
        } => {
            let bounds = match bounds {
                None => ProductBounds::None,
                Some(BoundsSpec::Supplied(m)) => ProductBounds::Supplied(m.clone()),
                Some(BoundsSpec::Named(s)) if s == "estimate" => ProductBounds::Estimate,
                Some(BoundsSpec::Named(s)) => {
                    return Err(ConfigError::Invalid(format!(
                        "bounds must be a list or \"estimate\", got {s:?}"
                    )))
                }
            };
            expr::product(children(c)?, None, bounds)?
        }
        NodeSpec::ProductViaLog {
            children: c,
            gamma_log,
        } => expr::product_via_log(children(c)?, None, *gamma_log)?,
        NodeSpec::Compose {
            transform: t,
            child,
            dini_inf,
        } => {
            let mut g = transform(*t)?;
            if let Some(mu) = dini_inf {
                g = g.with_dini_inf(*mu);
            }
            expr::compose_monotone(g, build_node(child)?)?
        }
        NodeSpec::Reciprocal { child } => expr::reciprocal(build_node(child)?)?,
        NodeSpec::Wqam {
            generator,
            inverse,
            weights,
            children: c,
        } => {
            let inv = (*inverse).map(transform).transpose()?;
            expr::wqam(transform(*generator)?, inv, weights.clone(), children(c)?)?
        }
        NodeSpec::Prospect {
            params,
            n,
            lo,
            hi,
            weighting,
        } => {
            let mut p = match params {
                Some(p) => p.clone(),
                None => {
                    ProspectParams::uniform(n.unwrap_or(2), lo.unwrap_or(-5.0), hi.unwrap_or(5.0))?
                }
            };
            if let Some(w) = weighting {
                p.weighting = *w;
            }
            applib::prospect_value(&p)?
        }
        NodeSpec::CobbDouglas {
            scale,
            alphas,
            domain,
        } => applib::cobb_douglas(*scale, alphas, &scalar_domain(domain)?)?,
        NodeSpec::Leontief {
            alpha,
            alphas,
            domain,
        } => applib::leontief(*alpha, alphas, &scalar_domain(domain)?)?,
        NodeSpec::CoordinateMean {
            generator,
            weights,
            domain,
        } => applib::coordinate_mean(transform(*generator)?, weights, domain)?,
        NodeSpec::RatioLog { params } => applib::ratio_log_expr(params)?,
        NodeSpec::Ratio { params } => applib::ratio_expr(params)?,
        NodeSpec::Corpus { name } => corpus_entry(name)?.expr,
    })
}
