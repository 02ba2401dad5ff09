//! Certification toolkit for star quasiconvex functions.
//!
//! Build functions compositionally from certified atoms ([`expr`]), let the
//! calculus propagate `(minimizer, modulus)` certificates, then check or try
//! to break them by sampling ([`verify`]).
//!
//! ```
//! use starqc::expr::{sum, AtomKind, Certificate, Expr};
//! use starqc::domain::BoxDomain;
//! use starqc::verify::check_star_inequality;
//!
//! let line = BoxDomain::from_bounds(&[(-1.0, 1.0)]).unwrap();
//! let sq = Expr::atom(AtomKind::Power { exponent: 2.0, coef: 1.0 }, line).unwrap()
//!     .with_claim(Certificate::claimed([0.0], 2.0)).unwrap();
//! let h = sum(vec![sq.clone(), sq], None).unwrap();
//! let cert = h.certificate().unwrap();
//! assert_eq!(cert.gamma, 2.0);
//! assert!(check_star_inequality(&h, cert, 500, 11, 0).unwrap().passed);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod applib;
pub mod cli;
pub mod config;
pub mod domain;
pub mod expr;
pub mod par;
pub mod scalar;
pub mod verify;
