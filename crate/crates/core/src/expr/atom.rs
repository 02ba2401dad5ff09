use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;

use super::BuildError;

/// Built-in leaf functions, addressable by `"type"` from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AtomKind {
    /// `coef * t^exponent`
    Power {
        exponent: f64,
        #[serde(default = "one")]
        coef: f64,
    },
    /// `<coefs, x> + offset`
    Linear {
        coefs: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `coef * ln(t) + offset`
    Log {
        #[serde(default = "one")]
        coef: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `coef * exp(rate * t)`
    Exp {
        #[serde(default = "one")]
        coef: f64,
        #[serde(default = "one")]
        rate: f64,
    },
    /// Piecewise power value function: `t^alpha` on gains,
    /// `-loss_aversion * (-t)^beta` on losses.
    Prospect {
        alpha: f64,
        beta: f64,
        loss_aversion: f64,
    },
    /// `0` at `t = 0`, `1` elsewhere.
    ZeroIndicator,
    /// `coef * ||x - center||^2`, centered at the origin when `center` is absent.
    SqNorm {
        #[serde(default = "one")]
        coef: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    Constant {
        value: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl AtomKind {
    fn is_scalar(&self) -> bool {
        matches!(
            self,
            AtomKind::Power { .. }
                | AtomKind::Log { .. }
                | AtomKind::Exp { .. }
                | AtomKind::Prospect { .. }
                | AtomKind::ZeroIndicator
        )
    }

    fn validate(&self, dim: usize) -> Result<(), BuildError> {
        if self.is_scalar() && dim != 1 {
            return Err(BuildError::BadAtom(format!(
                "{} atoms take a single coordinate, got dimension {dim}",
                self.name()
            )));
        }
        match self {
            AtomKind::Linear { coefs, .. } if coefs.len() != dim => {
                Err(BuildError::BadAtom(format!(
                    "linear atom has {} coefficients for dimension {dim}",
                    coefs.len()
                )))
            }
            AtomKind::SqNorm {
                center: Some(c), ..
            } if c.len() != dim => Err(BuildError::BadAtom(format!(
                "sq_norm center has dimension {} for a domain of dimension {dim}",
                c.len()
            ))),
            AtomKind::Prospect {
                alpha,
                beta,
                loss_aversion,
            } if !(*alpha > 0.0 && *alpha < 1.0 && *beta > 0.0 && *beta < 1.0 && *loss_aversion > 1.0) => {
                Err(BuildError::BadAtom(format!(
                    "prospect atom needs alpha, beta in (0,1) and loss_aversion > 1, got ({alpha}, {beta}, {loss_aversion})"
                )))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            AtomKind::Power { exponent, coef } => coef * powf(x[0], *exponent),
            AtomKind::Linear { coefs, offset } => {
                coefs.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + offset
            }
            AtomKind::Log { coef, offset } => coef * x[0].ln() + offset,
            AtomKind::Exp { coef, rate } => coef * (rate * x[0]).exp(),
            AtomKind::Prospect {
                alpha,
                beta,
                loss_aversion,
            } => prospect_value_fn(x[0], *alpha, *beta, *loss_aversion),
            AtomKind::ZeroIndicator => {
                if x[0] == 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            AtomKind::SqNorm { coef, center } => {
                let s: f64 = match center {
                    Some(c) => x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum(),
                    None => x.iter().map(|a| a * a).sum(),
                };
                coef * s
            }
            AtomKind::Constant { value } => *value,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AtomKind::Power { .. } => "power",
            AtomKind::Linear { .. } => "linear",
            AtomKind::Log { .. } => "log",
            AtomKind::Exp { .. } => "exp",
            AtomKind::Prospect { .. } => "prospect",
            AtomKind::ZeroIndicator => "zero_indicator",
            AtomKind::SqNorm { .. } => "sq_norm",
            AtomKind::Constant { .. } => "constant",
        }
    }
}

/// Gains `t^alpha`, losses `-loss_aversion * (-t)^beta`.
pub fn prospect_value_fn(t: f64, alpha: f64, beta: f64, loss_aversion: f64) -> f64 {
    if t >= 0.0 {
        t.powf(alpha)
    } else {
        -loss_aversion * (-t).powf(beta)
    }
}

fn powf(t: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
        t.powi(p as i32)
    } else {
        t.powf(p)
    }
}

type CustomAtomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub(crate) enum AtomFn {
    Builtin(AtomKind),
    Custom { name: String, f: CustomAtomFn },
}

/// A leaf function on a box.
#[derive(Clone)]
pub struct Atom {
    pub(crate) func: AtomFn,
    pub(crate) domain: BoxDomain,
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Atom")
            .field("name", &self.name())
            .field("domain", &self.domain)
            .finish()
    }
}

impl Atom {
    pub fn builtin(kind: AtomKind, domain: BoxDomain) -> Result<Self, BuildError> {
        kind.validate(domain.dim())?;
        Ok(Self {
            func: AtomFn::Builtin(kind),
            domain,
        })
    }

    /// An arbitrary pure function. Purity is the caller's contract.
    pub fn custom(
        name: impl Into<String>,
        domain: BoxDomain,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            func: AtomFn::Custom {
                name: name.into(),
                f: Arc::new(f),
            },
            domain,
        }
    }

    pub fn name(&self) -> String {
        match &self.func {
            AtomFn::Builtin(k) => k.name().to_string(),
            AtomFn::Custom { name, .. } => name.clone(),
        }
    }

    pub fn kind(&self) -> Option<&AtomKind> {
        match &self.func {
            AtomFn::Builtin(k) => Some(k),
            AtomFn::Custom { .. } => None,
        }
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.func {
            AtomFn::Builtin(k) => k.eval(x),
            AtomFn::Custom { f, .. } => f(x),
        }
    }
}
