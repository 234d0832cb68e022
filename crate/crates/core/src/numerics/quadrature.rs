//! Gaussian quadrature by the Golub–Welsch construction.
//!
//! Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix,
//! found with implicit-shift QL. They are then polished by Newton's method on
//! the three-term recurrence, and the weights are taken from the Christoffel
//! numbers `1 / sum_k p_k(x)^2` of the orthonormal polynomials, which keeps
//! tiny tail weights accurate to full relative precision.

use crate::error::{Error, Result};
use crate::numerics::{log_gamma, Interval};

const QL_TOL: f64 = 1e-14;
const QL_MAX_SWEEPS: usize = 50;
const MAX_RULE_POINTS: usize = 128;

/// Largest dimension accepted by [`integrate_nd`].
pub const MAX_TENSOR_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleKind {
    /// Unit weight on `[a, b]`.
    GaussLegendre { a: f64, b: f64 },
    /// Weight `x^alpha e^{-x}` on `[0, ∞)`.
    GaussLaguerreGeneralized { alpha: f64 },
    /// Weight `e^{-x^2}` on the real line.
    GaussHermite,
}

/// Nodes and positive weights of an `n`-point Gauss rule.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `weights[i] / weight_fn(nodes[i])`, for integrating without the rule's weight.
    plain: Vec<f64>,
    kind: RuleKind,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights for integrating against Lebesgue measure.
    pub fn plain_weights(&self) -> &[f64] {
        &self.plain
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn interval(&self) -> Interval {
        match self.kind {
            RuleKind::GaussLegendre { a, b } => Interval::Segment(a, b),
            RuleKind::GaussLaguerreGeneralized { .. } => Interval::HalfLine,
            RuleKind::GaussHermite => Interval::RealLine,
        }
    }

    /// The weight function built into the rule.
    pub fn weight_fn(&self, x: f64) -> f64 {
        match self.kind {
            RuleKind::GaussLegendre { .. } => 1.0,
            RuleKind::GaussLaguerreGeneralized { alpha } => {
                if x == 0.0 {
                    if alpha == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (alpha * x.ln() - x).exp()
                }
            }
            RuleKind::GaussHermite => (-x * x).exp(),
        }
    }

    /// `sum_i w_i f(x_i)`, i.e. the integral of `f` times the rule weight.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Integral of `g` against Lebesgue measure on the rule's interval.
    pub fn integrate_plain(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.plain).map(|(&x, &w)| w * g(x)).sum()
    }
}

/// `n`-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if !(a < b) {
        return Err(Error::domain(format!("Gauss-Legendre interval [{a}, {b}] is empty")));
    }
    let (x, w) = golub_welsch(
        n,
        2.0,
        |_| 0.0,
        |k| {
            let k = k as f64;
            k * k / (4.0 * k * k - 1.0)
        },
    )?;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let nodes: Vec<f64> = x.iter().map(|&t| mid + half * t).collect();
    let weights: Vec<f64> = w.iter().map(|&t| half * t.exp()).collect();
    Ok(QuadratureRule { plain: weights.clone(), nodes, weights, kind: RuleKind::GaussLegendre { a, b } })
}

/// `n`-point generalised Gauss–Laguerre rule for the weight `x^alpha e^{-x}`.
pub fn gauss_laguerre(n: usize, alpha: f64) -> Result<QuadratureRule> {
    if alpha.is_nan() || alpha <= -1.0 {
        return Err(Error::domain(format!("Gauss-Laguerre requires alpha > -1, got {alpha}")));
    }
    let mu0 = log_gamma(alpha + 1.0)?.exp();
    let (nodes, logw) =
        golub_welsch(n, mu0, |k| 2.0 * k as f64 + alpha + 1.0, |k| k as f64 * (k as f64 + alpha))?;
    let weights = logw.iter().map(|l| l.exp()).collect();
    let plain = nodes.iter().zip(&logw).map(|(&x, &l)| (l + x - alpha * x.ln()).exp()).collect();
    Ok(QuadratureRule { nodes, weights, plain, kind: RuleKind::GaussLaguerreGeneralized { alpha } })
}

/// `n`-point Gauss–Hermite rule for the weight `e^{-x^2}`.
pub fn gauss_hermite(n: usize) -> Result<QuadratureRule> {
    let mu0 = std::f64::consts::PI.sqrt();
    let (nodes, logw) = golub_welsch(n, mu0, |_| 0.0, |k| 0.5 * k as f64)?;
    let weights = logw.iter().map(|l| l.exp()).collect();
    let plain = nodes.iter().zip(&logw).map(|(&x, &l)| (l + x * x).exp()).collect();
    Ok(QuadratureRule { nodes, weights, plain, kind: RuleKind::GaussHermite })
}

/// Returns sorted nodes and natural-log weights for the monic recurrence
/// `p_{k+1} = (x - diag(k)) p_k - offdiag_sq(k) p_{k-1}`.
fn golub_welsch(
    n: usize,
    mu0: f64,
    diag: impl Fn(usize) -> f64,
    offdiag_sq: impl Fn(usize) -> f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::domain("quadrature rule needs at least one point"));
    }
    if n > MAX_RULE_POINTS {
        return Err(Error::Capacity(format!(
            "quadrature rules are limited to {MAX_RULE_POINTS} points, requested {n}"
        )));
    }
    let a: Vec<f64> = (0..n).map(&diag).collect();
    let b: Vec<f64> = (0..=n).map(|k| if k == 0 { 0.0 } else { offdiag_sq(k) }).collect();
    let mut d = a.clone();
    let mut e: Vec<f64> = (0..n).map(|k| if k + 1 < n { b[k + 1].sqrt() } else { 0.0 }).collect();
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    implicit_ql(&mut d, &mut e, &mut z)?;

    let mut nodes = d;
    nodes.sort_by(f64::total_cmp);
    let mut logw = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        // Newton polish on the orthonormal recurrence.
        for _ in 0..4 {
            let (p, dp, _) = orthonormal_eval(*x, n, mu0, &a, &b);
            if dp == 0.0 || !dp.is_finite() {
                break;
            }
            let step = p / dp;
            *x -= step;
            if step.abs() <= f64::EPSILON * x.abs().max(1.0) {
                break;
            }
        }
        let (_, _, sum_sq) = orthonormal_eval(*x, n, mu0, &a, &b);
        logw.push(-sum_sq.ln());
    }
    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Numeric("quadrature nodes are not strictly increasing".into()));
    }
    Ok((nodes, logw))
}

/// Value and derivative of the degree-`n` orthonormal polynomial at `x`, and
/// `sum_{k<n} p_k(x)^2`.
fn orthonormal_eval(x: f64, n: usize, mu0: f64, a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut dp_prev = 0.0;
    let mut p = 1.0 / mu0.sqrt();
    let mut dp = 0.0;
    let mut sum_sq = p * p;
    for k in 0..n {
        let sb_next = b[k + 1].sqrt();
        let sb = b[k].sqrt();
        let p_next = ((x - a[k]) * p - sb * p_prev) / sb_next;
        let dp_next = (p + (x - a[k]) * dp - sb * dp_prev) / sb_next;
        p_prev = p;
        dp_prev = dp;
        p = p_next;
        dp = dp_next;
        if k + 1 < n {
            sum_sq += p * p;
        }
    }
    (p, dp, sum_sq)
}

/// Symmetric tridiagonal eigenproblem by implicit-shift QL, tracking only the
/// first row of the eigenvector matrix in `z`.
fn implicit_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= QL_TOL * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(Error::NonConvergence {
                    what: "implicit QL eigenvalue iteration",
                    iterations: QL_MAX_SWEEPS,
                    partial: d[l],
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let bb = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * bb;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - bb;
                let fz = z[i + 1];
                z[i + 1] = s * z[i] + c * fz;
                z[i] = c * z[i] - s * fz;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

fn tensor_sum(
    f: &dyn Fn(&[f64]) -> f64,
    rules: &[&QuadratureRule],
    pick: fn(&QuadratureRule) -> &[f64],
) -> Result<f64> {
    let dim = rules.len();
    if dim > MAX_TENSOR_DIM {
        return Err(Error::Capacity(format!(
            "tensor quadrature is limited to {MAX_TENSOR_DIM} dimensions, requested {dim}"
        )));
    }
    if dim == 0 {
        return Ok(f(&[]));
    }
    let mut idx = vec![0usize; dim];
    let mut point: Vec<f64> = rules.iter().map(|r| r.nodes[0]).collect();
    let mut total = 0.0;
    loop {
        let w: f64 = rules.iter().zip(&idx).map(|(r, &i)| pick(r)[i]).product();
        total += w * f(&point);
        // Lexicographic odometer, last coordinate fastest.
        let mut k = dim;
        loop {
            if k == 0 {
                return Ok(total);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < rules[k].len() {
                point[k] = rules[k].nodes[idx[k]];
                break;
            }
            idx[k] = 0;
            point[k] = rules[k].nodes[0];
        }
    }
}

/// Tensor-product quadrature of `f` against the product of the rules' weight
/// functions. At most [`MAX_TENSOR_DIM`] rules.
pub fn integrate_nd(f: &dyn Fn(&[f64]) -> f64, rules: &[&QuadratureRule]) -> Result<f64> {
    tensor_sum(f, rules, |r| &r.weights)
}

/// Tensor-product quadrature of `f` against Lebesgue measure.
pub fn integrate_nd_plain(f: &dyn Fn(&[f64]) -> f64, rules: &[&QuadratureRule]) -> Result<f64> {
    tensor_sum(f, rules, |r| &r.plain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lgamma(x: f64) -> f64 {
        log_gamma(x).unwrap()
    }

    #[test]
    fn trivial_rules() {
        let r = gauss_legendre(1, -1.0, 1.0).unwrap();
        assert!(r.nodes()[0].abs() < 1e-15);
        assert!((r.weights()[0] - 2.0).abs() < 1e-15);
        let l = gauss_laguerre(1, 0.0).unwrap();
        assert!((l.nodes()[0] - 1.0).abs() < 1e-15);
        assert!((l.weights()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn laguerre_fifth_moment() {
        let r = gauss_laguerre(20, 0.0).unwrap();
        assert!((r.integrate(|x| x.powi(5)) - 120.0).abs() < 1e-10 * 120.0);
    }

    #[test]
    fn laguerre_weights_sum_to_gamma() {
        for &alpha in &[0.0, 0.5, 1.0, 2.5] {
            for &n in &[1usize, 5, 20, 64] {
                let r = gauss_laguerre(n, alpha).unwrap();
                let total: f64 = r.weights().iter().sum();
                let expect = lgamma(alpha + 1.0).exp();
                assert!((total - expect).abs() < 1e-10 * expect, "alpha {alpha} n {n}");
                assert!(r.weights().iter().all(|&w| w > 0.0));
                assert!(r.nodes().windows(2).all(|w| w[1] > w[0]));
            }
        }
    }

    #[test]
    fn monomial_exactness_up_to_degree_2n_minus_1() {
        for &n in &[1usize, 2, 7, 16, 33, 64] {
            for &alpha in &[0.0, 0.5, 2.0] {
                let r = gauss_laguerre(n, alpha).unwrap();
                for k in 0..2 * n {
                    // Gamma(alpha + k + 1) in log space
                    let exact = lgamma(alpha + k as f64 + 1.0);
                    let q: f64 = r.nodes().iter().zip(r.weights()).map(|(&x, &w)| w * x.powi(k as i32)).sum();
                    let rel = (q.ln() - exact).abs();
                    assert!(rel < 1e-10, "laguerre n={n} alpha={alpha} k={k}: {rel:e}");
                }
            }
            let g = gauss_legendre(n, -1.0, 1.0).unwrap();
            for k in 0..2 * n {
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                let q = g.integrate(|x| x.powi(k as i32));
                assert!((q - exact).abs() < 1e-10 * exact.max(1e-3), "legendre n={n} k={k}");
            }
            let h = gauss_hermite(n).unwrap();
            for k in 0..2 * n {
                // Gamma((k+1)/2) for even k, zero for odd k
                let q = h.integrate(|x| x.powi(k as i32));
                if k % 2 == 1 {
                    let scale = lgamma(k as f64 / 2.0 + 1.0).exp();
                    assert!(q.abs() < 1e-10 * scale, "hermite n={n} k={k}");
                } else {
                    let exact = lgamma((k as f64 + 1.0) / 2.0).exp();
                    assert!((q - exact).abs() < 1e-10 * exact, "hermite n={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn plain_integration() {
        let r = gauss_laguerre(40, 1.5).unwrap();
        let exact = lgamma(2.5).exp() / 2f64.powf(2.5);
        let q = r.integrate_plain(|x| x.powf(1.5) * (-2.0 * x).exp());
        assert!((q - exact).abs() < 1e-10 * exact);
        let g = gauss_legendre(8, 1.0, 3.0).unwrap();
        assert!((g.integrate_plain(|x| x * x) - 26.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn tensor_examples() {
        let r = gauss_laguerre(10, 0.0).unwrap();
        let one = integrate_nd(&|_| 1.0, &[&r, &r]).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
        let xy = integrate_nd(&|p| p[0] * p[1], &[&r, &r]).unwrap();
        assert!((xy - 1.0).abs() < 1e-10);
        let f = |p: &[f64]| (p[0] - 0.3 * p[1]).powi(2) + p[0] * p[1];
        let swapped = |p: &[f64]| f(&[p[1], p[0]]);
        let sym = |p: &[f64]| f(p) + swapped(p);
        let a = integrate_nd(&sym, &[&r, &r]).unwrap();
        let b = integrate_nd(&|p| sym(&[p[1], p[0]]), &[&r, &r]).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs());
        assert!(matches!(integrate_nd(&|_| 1.0, &[&r, &r, &r, &r, &r]), Err(Error::Capacity(_))));
    }
}
