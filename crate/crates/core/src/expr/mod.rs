//! Expression trees over boxes and the certificate calculus.
//!
//! Every combinator checks its preconditions and attaches a derived
//! [`Certificate`] computed from the children's certificates:
//!
//! | rule | minimizer | modulus |
//! |------|-----------|---------|
//! | [`sum`] | concatenation | `min_i gamma_i` |
//! | [`compose_monotone`] | unchanged | `mu * gamma`, `mu` = inf of the lower Dini derivative of `g` over `h(K)` |
//! | [`reciprocal`] | unchanged, orientation flips | `mu * gamma`, `mu = inf 1/t^2` over `h(K)` |
//! | [`min_combine`] | concatenation | `0` |
//! | [`product`] | concatenation | `0`, or `H(xbar) * min_i gamma_i / M_i` with bounds `h_i <= M_i` |
//! | [`product_via_log`] | concatenation | `gamma_log * H(xbar)` |
//! | [`wqam`] | concatenation | `mu * min_i w_i gamma_i`, `mu` from the inverse generator |
//!
//! Sums take the smallest child modulus: a function that is star
//! quasiconvex with modulus `gamma` is so with any `gamma' <= gamma`, since
//! the subtracted quadratic term only shrinks, so every child satisfies the
//! common-modulus hypothesis at `min_i gamma_i`.

mod atom;
mod cert;
mod rules;
mod screen;

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use thiserror::Error;

use crate::domain::{BoxDomain, DomainError, Point, ProductDomain};
use crate::scalar::{invert_monotone, RangeInterval, ScalarError, ScalarTransform};
use crate::verify::Witness;

pub use atom::{prospect_value_fn, Atom, AtomKind};
pub use cert::{Certificate, Orientation, Provenance};
pub use rules::{
    compose_monotone, min_combine, product, product_via_log, reciprocal, sum, wqam,
    wqam_with_component_certs, ProductBounds,
};
pub use screen::{image_range, ScreenConfig, SCREEN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("{0}")]
    BadAtom(String),
    #[error("{rule} needs at least one child")]
    NoChildren { rule: &'static str },
    #[error("child {index} of {rule} has no certificate")]
    MissingCertificate { rule: &'static str, index: usize },
    #[error("{rule} children carry mixed orientations")]
    MixedOrientation { rule: &'static str },
    #[error("{rule} needs a {expected} certificate on child {index}")]
    WrongOrientation {
        rule: &'static str,
        index: usize,
        expected: Orientation,
    },
    #[error("declared domain does not match the children's blocks")]
    DomainMismatch,
    #[error("transform {0} must be increasing")]
    NotIncreasing(String),
    #[error("lower Dini infimum must be nonnegative, got {0}")]
    NegativeDini(f64),
    #[error("child changes sign on its domain (observed range [{lo}, {hi}])")]
    SignIndefinite { lo: f64, hi: f64 },
    #[error("factor {index} is not positive on its block (observed minimum {min})")]
    NotPositive { index: usize, min: f64 },
    #[error("bound M_{index} = {bound} lies below the observed supremum {sup}")]
    BoundBelowSup { index: usize, bound: f64, sup: f64 },
    #[error("expected {expected} bounds, got {got}")]
    BoundCount { expected: usize, got: usize },
    #[error("child {index} has modulus {have} below the required {need}")]
    InsufficientModulus { index: usize, have: f64, need: f64 },
    #[error("invalid weights: {0}")]
    Weights(String),
    #[error("invalid certificate: {0}")]
    BadCertificate(String),
    #[error("claimed certificate rejected by screening: {0}")]
    ClaimRejected(Box<Witness>),
    #[error("non-finite value {value} at {point}")]
    NonFinite { point: Point, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("point {0} lies outside the domain")]
    OutsideDomain(Point),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("evaluation produced {value} at {point}")]
    NonFinite { point: Point, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

#[derive(Clone)]
pub(crate) enum WqamInverse {
    Closed(ScalarTransform),
    Bisection(RangeInterval),
}

#[derive(Clone)]
pub(crate) enum Node {
    Atom(Atom),
    Sum(Vec<Expr>),
    Product {
        children: Vec<Expr>,
        positivity_checked: bool,
        bounds: Option<Vec<f64>>,
        via_log: bool,
    },
    Min(Vec<Expr>),
    Compose {
        transform: ScalarTransform,
        child: Expr,
    },
    Reciprocal {
        child: Expr,
        sign: Sign,
    },
    Wqam {
        generator: ScalarTransform,
        inverse: WqamInverse,
        weights: Vec<f64>,
        children: Vec<Expr>,
    },
}

struct Inner {
    node: Node,
    domain: ProductDomain,
    ranges: Vec<Range<usize>>,
    claimed: Option<Certificate>,
    derived: Option<Certificate>,
}

/// An immutable expression over a product of boxes. Cloning is cheap.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Expr")
            .field("tree", &self.describe())
            .field("dim", &self.dim())
            .field("certificate", &self.certificate())
            .finish()
    }
}

impl Expr {
    pub(crate) fn from_parts(
        node: Node,
        domain: ProductDomain,
        derived: Option<Certificate>,
    ) -> Self {
        let ranges = domain.block_ranges();
        Expr(Arc::new(Inner {
            node,
            domain,
            ranges,
            claimed: None,
            derived,
        }))
    }

    /// An uncertified atom.
    pub fn atom(kind: AtomKind, domain: BoxDomain) -> Result<Self, BuildError> {
        let atom = Atom::builtin(kind, domain.clone())?;
        Ok(Self::from_atom(atom))
    }

    pub fn from_atom(atom: Atom) -> Self {
        let domain = ProductDomain::single(atom.domain.clone());
        Self::from_parts(Node::Atom(atom), domain, None)
    }

    /// An uncertified atom wrapping an arbitrary pure function.
    pub fn custom(
        name: impl Into<String>,
        domain: BoxDomain,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::from_atom(Atom::custom(name, domain, f))
    }

    /// `t -> t` on one interval, certified star quasiconvex at the left end
    /// with modulus 0.
    pub fn coordinate(lo: f64, hi: f64) -> Result<Self, BuildError> {
        let e = Self::atom(
            AtomKind::Linear {
                coefs: vec![1.0],
                offset: 0.0,
            },
            BoxDomain::from_bounds(&[(lo, hi)])?,
        )?;
        e.with_trusted_claim(Certificate::claimed([lo], 0.0))
    }

    /// Attaches a claimed certificate after a quick sampling screen
    /// (200 points).
    pub fn with_claim(&self, cert: Certificate) -> Result<Self, BuildError> {
        let out = self.with_trusted_claim(cert)?;
        screen::screen_claim(&out)?;
        Ok(out)
    }

    /// Attaches a claimed certificate without screening it.
    pub fn with_trusted_claim(&self, cert: Certificate) -> Result<Self, BuildError> {
        self.validate_certificate(&cert)?;
        let inner = &self.0;
        Ok(Expr(Arc::new(Inner {
            node: inner.node.clone(),
            domain: inner.domain.clone(),
            ranges: inner.ranges.clone(),
            claimed: Some(Certificate {
                provenance: Provenance::Claimed,
                ..cert
            }),
            derived: inner.derived.clone(),
        })))
    }

    fn validate_certificate(&self, cert: &Certificate) -> Result<(), BuildError> {
        if !(cert.gamma >= 0.0) || !cert.gamma.is_finite() {
            return Err(BuildError::BadCertificate(format!(
                "modulus must be finite and >= 0, got {}",
                cert.gamma
            )));
        }
        if !self.domain().contains(&cert.xbar)? {
            return Err(BuildError::BadCertificate(format!(
                "minimizer {} lies outside the domain",
                cert.xbar
            )));
        }
        Ok(())
    }

    pub fn domain(&self) -> &ProductDomain {
        &self.0.domain
    }

    pub fn dim(&self) -> usize {
        self.0.domain.dim()
    }

    pub(crate) fn node(&self) -> &Node {
        &self.0.node
    }

    /// Derived certificate if present, else the claimed one.
    pub fn certificate(&self) -> Option<&Certificate> {
        self.0.derived.as_ref().or(self.0.claimed.as_ref())
    }

    pub fn derived_certificate(&self) -> Option<&Certificate> {
        self.0.derived.as_ref()
    }

    pub fn claimed_certificate(&self) -> Option<&Certificate> {
        self.0.claimed.as_ref()
    }

    /// Evaluates without checking the domain. Failures (an inverse that
    /// cannot be computed, a logarithm of a negative number) surface as NaN.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let inner = &*self.0;
        match &inner.node {
            Node::Atom(a) => a.eval(x),
            Node::Sum(cs) => cs
                .iter()
                .zip(&inner.ranges)
                .map(|(c, r)| c.eval(&x[r.clone()]))
                .sum(),
            Node::Product { children, .. } => children
                .iter()
                .zip(&inner.ranges)
                .map(|(c, r)| c.eval(&x[r.clone()]))
                .product(),
            Node::Min(cs) => cs
                .iter()
                .zip(&inner.ranges)
                .map(|(c, r)| c.eval(&x[r.clone()]))
                .fold(f64::INFINITY, |m, v| {
                    if m.is_nan() || v.is_nan() {
                        f64::NAN
                    } else {
                        m.min(v)
                    }
                }),
            Node::Compose { transform, child } => transform.eval(child.eval(x)),
            Node::Reciprocal { child, .. } => 1.0 / child.eval(x),
            Node::Wqam {
                generator,
                inverse,
                weights,
                children,
            } => {
                let s: f64 = children
                    .iter()
                    .zip(&inner.ranges)
                    .zip(weights)
                    .map(|((c, r), w)| w * generator.eval(c.eval(&x[r.clone()])))
                    .sum();
                match inverse {
                    WqamInverse::Closed(inv) => inv.eval(s),
                    WqamInverse::Bisection(bracket) => {
                        invert_monotone(generator, s, *bracket).unwrap_or(f64::NAN)
                    }
                }
            }
        }
    }

    /// Domain-checked evaluation.
    pub fn evaluate(&self, p: &[f64]) -> Result<f64, EvalError> {
        if !self.domain().contains(p)? {
            return Err(EvalError::OutsideDomain(Point::new(p.to_vec())));
        }
        let v = self.eval(p);
        if v.is_nan() {
            return Err(EvalError::NonFinite {
                point: Point::new(p.to_vec()),
                value: v,
            });
        }
        Ok(v)
    }

    pub fn kind_name(&self) -> &'static str {
        match self.node() {
            Node::Atom(_) => "atom",
            Node::Sum(_) => "sum",
            Node::Product { via_log: true, .. } => "product_via_log",
            Node::Product { .. } => "product",
            Node::Min(_) => "min",
            Node::Compose { .. } => "compose",
            Node::Reciprocal { .. } => "reciprocal",
            Node::Wqam { .. } => "wqam",
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Atom(_) => vec![],
            Node::Sum(cs) | Node::Min(cs) => cs.iter().collect(),
            Node::Product { children, .. } | Node::Wqam { children, .. } => {
                children.iter().collect()
            }
            Node::Compose { child, .. } | Node::Reciprocal { child, .. } => vec![child],
        }
    }

    /// Compact one-line rendering of the tree.
    pub fn describe(&self) -> String {
        let kids = || {
            self.children()
                .iter()
                .map(|c| c.describe())
                .collect::<Vec<_>>()
                .join(", ")
        };
        match self.node() {
            Node::Atom(a) => a.name(),
            Node::Compose { transform, child } => {
                format!("{}({})", transform.name(), child.describe())
            }
            Node::Wqam { generator, .. } => format!("wqam[{}]({})", generator.name(), kids()),
            _ => format!("{}({})", self.kind_name(), kids()),
        }
    }

    /// Provenance labels of the tree in pre-order, `node: label`.
    pub fn rule_chain(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_rules(&mut out);
        out
    }

    fn collect_rules(&self, out: &mut Vec<String>) {
        let label = self
            .certificate()
            .map(|c| c.provenance.label())
            .unwrap_or_else(|| "uncertified".to_string());
        let name = match self.node() {
            Node::Atom(a) => format!("atom:{}", a.name()),
            Node::Compose { transform, .. } => format!("compose:{}", transform.name()),
            _ => self.kind_name().to_string(),
        };
        out.push(format!("{name}: {label}"));
        for c in self.children() {
            c.collect_rules(out);
        }
    }

    pub fn positivity_checked(&self) -> bool {
        matches!(
            self.node(),
            Node::Product {
                positivity_checked: true,
                ..
            }
        )
    }

    pub fn product_bounds(&self) -> Option<&[f64]> {
        match self.node() {
            Node::Product {
                bounds: Some(b), ..
            } => Some(b),
            _ => None,
        }
    }

    pub fn reciprocal_sign(&self) -> Option<Sign> {
        match self.node() {
            Node::Reciprocal { sign, .. } => Some(*sign),
            _ => None,
        }
    }
}

/// The certificate an expression carries: derived takes precedence over claimed.
pub fn certificate_of(e: &Expr) -> Option<Certificate> {
    e.certificate().cloned()
}

#[cfg(test)]
mod tests;
