//! Numerical toolkit for biorthogonal random-matrix ensembles.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: special functions, quadrature, small dense linear algebra.
//! * [`ensemble`]: generic biorthogonal ensembles: Gram matrix, correlation
//!   kernel, correlation functions, orthogonal-polynomial systems and the
//!   Christoffel–Darboux identity.
//! * [`multiple`]: multiple orthogonal polynomials of type I and II.
//! * [`chgue`]: the chiral Gaussian unitary ensemble with an external source.
//! * [`charpoly`]: Monte Carlo and quadrature averages of characteristic
//!   polynomials, and residue extraction.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod charpoly;
pub mod chgue;
pub mod ensemble;
mod error;
pub mod multiple;
pub mod numerics;

pub use error::{Error, Result};

/// Crate version, recorded in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use charpoly::{AvgEstimate, McConfig, SourceKind, SourceModel};
pub use chgue::{ChgueParams, ConfluentSpec};
pub use ensemble::{EnsembleSpec, KernelData, OrthoPolySystem};
pub use multiple::{Composition, TypeIFunction, TypeIIPolynomial, WeightSystem};
pub use numerics::{Interval, Matrix, Polynomial, QuadratureRule, RealFn, RuleKind};
