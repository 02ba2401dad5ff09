use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    StarQuasiconvex,
    StarQuasiconcave,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::StarQuasiconvex => Orientation::StarQuasiconcave,
            Orientation::StarQuasiconcave => Orientation::StarQuasiconvex,
        }
    }

    /// Multiplier turning the certified function into a star quasiconvex one.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::StarQuasiconvex => 1.0,
            Orientation::StarQuasiconcave => -1.0,
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::StarQuasiconvex => "star_quasiconvex",
            Orientation::StarQuasiconcave => "star_quasiconcave",
        })
    }
}

/// Where a certificate came from.
///
/// `NumericallyScreened` marks certificates whose derivation relied on a
/// sampled precondition (positivity, sign, an image range or a Dini
/// estimate). Those are falsification-grade, not proofs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rule", rename_all = "snake_case")]
pub enum Provenance {
    Claimed,
    DerivedRule(String),
    NumericallyScreened(String),
}

impl Provenance {
    pub fn label(&self) -> String {
        match self {
            Provenance::Claimed => "claimed".to_string(),
            Provenance::DerivedRule(r) => r.clone(),
            Provenance::NumericallyScreened(r) => format!("{r} [screened]"),
        }
    }

    pub(crate) fn rule(rule: &str, screened: bool) -> Self {
        if screened {
            Provenance::NumericallyScreened(rule.to_string())
        } else {
            Provenance::DerivedRule(rule.to_string())
        }
    }
}

/// `(xbar, gamma)`: the function is star quasiconvex (or quasiconcave) with
/// modulus `gamma` with respect to `xbar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub xbar: Point,
    pub gamma: f64,
    pub orientation: Orientation,
    pub provenance: Provenance,
}

impl Certificate {
    /// A claimed star quasiconvex certificate.
    pub fn claimed(xbar: impl Into<Point>, gamma: f64) -> Self {
        Self {
            xbar: xbar.into(),
            gamma,
            orientation: Orientation::StarQuasiconvex,
            provenance: Provenance::Claimed,
        }
    }

    /// A claimed star quasiconcave certificate.
    pub fn claimed_concave(xbar: impl Into<Point>, gamma: f64) -> Self {
        Self {
            orientation: Orientation::StarQuasiconcave,
            ..Self::claimed(xbar, gamma)
        }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self {
            gamma,
            ..self.clone()
        }
    }

    pub fn is_screened(&self) -> bool {
        matches!(self.provenance, Provenance::NumericallyScreened(_))
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at {} with modulus {} ({})",
            self.orientation,
            self.xbar,
            self.gamma,
            self.provenance.label()
        )
    }
}
