//! Special functions, polynomials, quadrature and dense linear algebra.

mod linalg;
mod poly;
mod quadrature;
mod special;
mod stieltjes;

use std::sync::Arc;

pub use linalg::{Lu, Matrix};
pub use poly::{
    complete_homogeneous, elem_sym, partial_fraction_weights, vandermonde, PartialFractions, Polynomial,
};
pub use quadrature::{
    gauss_hermite, gauss_laguerre, gauss_legendre, integrate_nd, integrate_nd_plain, QuadratureRule,
    RuleKind, MAX_TENSOR_DIM,
};
pub use special::{bessel_i, hyp0f1, hyp0f1_taylor, laguerre, laguerre_coeffs, laguerre_upto, log_gamma};
pub use stieltjes::cauchy_transform;

/// A real function of one real variable that can be shared across threads.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Wrap a closure as a [`RealFn`].
pub fn real_fn<F>(f: F) -> RealFn
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Support of an ensemble or weight.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Interval {
    /// `[0, ∞)`
    HalfLine,
    /// `[a, b]`
    Segment(f64, f64),
    /// `(-∞, ∞)`
    RealLine,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Interval::HalfLine => x >= 0.0,
            Interval::Segment(a, b) => (a..=b).contains(&x),
            Interval::RealLine => x.is_finite(),
        }
    }
}
