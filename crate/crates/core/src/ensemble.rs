//! Generic biorthogonal ensembles.
//!
//! An ensemble on an interval `I` is given by two families of `N` functions,
//! `eta` and `xi`, with joint density
//! `det[eta_i(x_j)] det[xi_i(x_j)] / Z_N`. Everything else follows from the
//! Gram matrix `g_ij = ∫ eta_i xi_j`: the kernel
//! `K_N(x, y) = sum_ij eta_i(x) c_ij xi_j(y)` with `c = g^{-T}`, the
//! normalisation `Z_N = N! det g`, and the correlation functions
//! `rho_n = det[K_N(x_i, x_j)]`.

use log::warn;

use crate::error::{Error, Result};
use crate::numerics::{
    gauss_hermite, gauss_laguerre, log_gamma, real_fn, Interval, Matrix, QuadratureRule, RealFn, RuleKind,
};

/// Default cap on the ensemble size.
pub const DEFAULT_MAX_N: usize = 12;

/// Environment variable that overrides [`DEFAULT_MAX_N`].
pub const MAX_N_ENV: &str = "BIORTHO_MAX_N";

/// Points of the fixed Gram rule used by the built-in ensembles.
pub const GRAM_RULE_POINTS: usize = 64;

/// Current cap on `N`, honouring the environment override.
pub fn max_n() -> usize {
    match std::env::var(MAX_N_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(cap) if cap != DEFAULT_MAX_N => {
            warn!(
                "ensemble size cap set to {cap} via {MAX_N_ENV}; monomial Gram matrices \
                 lose accuracy quickly beyond N = {DEFAULT_MAX_N}"
            );
            cap
        }
        Some(cap) => cap,
        None => DEFAULT_MAX_N,
    }
}

pub(crate) fn check_size(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("ensemble size must be at least 1"));
    }
    let cap = max_n();
    if n > cap {
        return Err(Error::Capacity(format!(
            "N = {n} exceeds the cap of {cap}; set {MAX_N_ENV} to raise it"
        )));
    }
    Ok(())
}

fn rule_matches(interval: Interval, rule: &QuadratureRule) -> bool {
    matches!(
        (interval, rule.kind()),
        (Interval::HalfLine, RuleKind::GaussLaguerreGeneralized { .. })
            | (Interval::RealLine, RuleKind::GaussHermite)
    ) || matches!((interval, rule.kind()), (Interval::Segment(a, b), RuleKind::GaussLegendre { a: ra, b: rb }) if a == ra && b == rb)
}

/// The data of a biorthogonal ensemble.
#[derive(Clone)]
pub struct EnsembleSpec {
    interval: Interval,
    eta: Vec<RealFn>,
    xi: Vec<RealFn>,
    quad: QuadratureRule,
}

impl std::fmt::Debug for EnsembleSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnsembleSpec")
            .field("n", &self.n())
            .field("interval", &self.interval)
            .field("quad_points", &self.quad.len())
            .finish()
    }
}

impl EnsembleSpec {
    /// Builds a spec and checks that its Gram matrix is non-singular.
    ///
    /// Gram integrals are evaluated against Lebesgue measure with `quad`, so
    /// the rule's weight should match the decay of `eta_i xi_j`.
    pub fn new(interval: Interval, eta: Vec<RealFn>, xi: Vec<RealFn>, quad: QuadratureRule) -> Result<Self> {
        if eta.len() != xi.len() {
            return Err(Error::domain(format!("eta has {} members but xi has {}", eta.len(), xi.len())));
        }
        check_size(eta.len())?;
        if !rule_matches(interval, &quad) {
            return Err(Error::domain(format!(
                "quadrature rule {:?} does not cover {interval:?}",
                quad.kind()
            )));
        }
        let spec = EnsembleSpec { interval, eta, xi, quad };
        spec.gram().lu().map_err(|e| e.in_context("Gram matrix"))?;
        Ok(spec)
    }

    /// Orthogonal-polynomial ensemble: `eta_i = x^{i-1}`, `xi_j = x^{j-1} w(x)`.
    pub fn orthogonal(weight: RealFn, interval: Interval, n: usize, quad: QuadratureRule) -> Result<Self> {
        let eta = (0..n).map(|i| real_fn(move |x: f64| x.powi(i as i32))).collect();
        let xi = (0..n)
            .map(|j| {
                let w = weight.clone();
                real_fn(move |x: f64| x.powi(j as i32) * w(x))
            })
            .collect();
        Self::new(interval, eta, xi, quad)
    }

    /// Laguerre ensemble with weight `x^alpha e^{-x}` on `[0, ∞)`.
    pub fn laguerre(n: usize, alpha: f64) -> Result<Self> {
        let rule = gauss_laguerre(GRAM_RULE_POINTS, alpha)?;
        Self::orthogonal(laguerre_weight(alpha), Interval::HalfLine, n, rule)
    }

    /// Hermite ensemble with weight `e^{-x^2}` on the real line.
    pub fn hermite(n: usize) -> Result<Self> {
        let rule = gauss_hermite(GRAM_RULE_POINTS)?;
        Self::orthogonal(real_fn(|x: f64| (-x * x).exp()), Interval::RealLine, n, rule)
    }

    pub fn n(&self) -> usize {
        self.eta.len()
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn eta(&self) -> &[RealFn] {
        &self.eta
    }

    pub fn xi(&self) -> &[RealFn] {
        &self.xi
    }

    pub fn quad(&self) -> &QuadratureRule {
        &self.quad
    }

    pub fn eta_at(&self, x: f64) -> Vec<f64> {
        self.eta.iter().map(|f| f(x)).collect()
    }

    pub fn xi_at(&self, x: f64) -> Vec<f64> {
        self.xi.iter().map(|f| f(x)).collect()
    }

    /// `g_ij = ∫ eta_i xi_j`.
    pub fn gram(&self) -> Matrix {
        let n = self.n();
        let nodes = self.quad.nodes();
        let w = self.quad.plain_weights();
        let eta: Vec<Vec<f64>> = self.eta.iter().map(|f| nodes.iter().map(|&x| f(x)).collect()).collect();
        let xi: Vec<Vec<f64>> = self.xi.iter().map(|f| nodes.iter().map(|&x| f(x)).collect()).collect();
        Matrix::from_fn(n, n, |i, j| (0..nodes.len()).map(|k| w[k] * eta[i][k] * xi[j][k]).sum())
    }

    /// Joint density `det[eta_i(x_j)] det[xi_i(x_j)] / Z_N`, with `Z_N` from `kernel`.
    pub fn pdf_eval(&self, kernel: &KernelData, x: &[f64]) -> Result<f64> {
        kernel.pdf_eval(x)
    }
}

/// `x^alpha e^{-x}`.
pub fn laguerre_weight(alpha: f64) -> RealFn {
    real_fn(move |x: f64| {
        if x <= 0.0 {
            if x == 0.0 && alpha == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            (alpha * x.ln() - x).exp()
        }
    })
}

/// Gram matrix, kernel coefficients and normalisation of an ensemble.
#[derive(Debug, Clone)]
pub struct KernelData {
    gram: Matrix,
    coeffs: Matrix,
    z_sign: f64,
    z_log: f64,
    spec: EnsembleSpec,
}

/// Computes the Gram matrix by quadrature and inverts it.
pub fn build_kernel(spec: &EnsembleSpec) -> Result<KernelData> {
    KernelData::from_gram(spec.clone(), spec.gram())
}

impl KernelData {
    /// Uses a Gram matrix supplied by the caller (for instance in closed form).
    pub fn from_gram(spec: EnsembleSpec, gram: Matrix) -> Result<Self> {
        let n = spec.n();
        if gram.rows() != n || gram.cols() != n {
            return Err(Error::domain(format!(
                "Gram matrix is {}x{}, expected {n}x{n}",
                gram.rows(),
                gram.cols()
            )));
        }
        let lu = gram.lu().map_err(|e| e.in_context("Gram matrix"))?;
        let mut coeffs = Matrix::zeros(n, n);
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            // column i of g^{-T}
            let row = lu.solve_transposed_vec(&e);
            for (j, v) in row.into_iter().enumerate() {
                coeffs[(j, i)] = v;
            }
        }
        let (sign, log_det) = lu.log_det();
        let log_fact = log_gamma(n as f64 + 1.0)?;
        Ok(KernelData { gram, coeffs, z_sign: sign, z_log: log_det + log_fact, spec })
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    /// `c = g^{-T}`.
    pub fn coeffs(&self) -> &Matrix {
        &self.coeffs
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    /// `Z_N` as `(sign, ln|Z_N|)`.
    pub fn z_log(&self) -> (f64, f64) {
        (self.z_sign, self.z_log)
    }

    pub fn z_n(&self) -> f64 {
        self.z_sign * self.z_log.exp()
    }

    /// `K_N(x, y) = sum_ij eta_i(x) c_ij xi_j(y)`.
    pub fn kernel_eval(&self, x: f64, y: f64) -> f64 {
        let ex = self.spec.eta_at(x);
        let xy = self.spec.xi_at(y);
        self.bilinear(&ex, &xy)
    }

    fn bilinear(&self, ex: &[f64], xy: &[f64]) -> f64 {
        let n = self.n();
        let mut total = 0.0;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| self.coeffs[(i, j)] * xy[j]).sum();
            total += ex[i] * row;
        }
        total
    }

    /// `rho_n(x_1..x_n) = det[K_N(x_i, x_j)]`.
    pub fn correlation(&self, points: &[f64]) -> Result<f64> {
        if points.len() > self.n() {
            return Err(Error::domain(format!(
                "{} points requested for an ensemble of size {}",
                points.len(),
                self.n()
            )));
        }
        let eta: Vec<Vec<f64>> = points.iter().map(|&x| self.spec.eta_at(x)).collect();
        let xi: Vec<Vec<f64>> = points.iter().map(|&x| self.spec.xi_at(x)).collect();
        let k = Matrix::from_fn(points.len(), points.len(), |i, j| self.bilinear(&eta[i], &xi[j]));
        Ok(k.det())
    }

    /// Joint density at `x` (length `N`).
    pub fn pdf_eval(&self, x: &[f64]) -> Result<f64> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::domain(format!("pdf needs {n} points, got {}", x.len())));
        }
        let eta = Matrix::from_fn(n, n, |i, j| self.spec.eta[i](x[j]));
        let xi = Matrix::from_fn(n, n, |i, j| self.spec.xi[i](x[j]));
        Ok(eta.det() * xi.det() * self.z_sign * (-self.z_log).exp())
    }
}

/// Monic orthogonal polynomials `p_{n+1} = (x - a_n) p_n - b_n p_{n-1}` for a weight.
#[derive(Clone)]
pub struct OrthoPolySystem {
    weight: RealFn,
    interval: Interval,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
    norms: Vec<f64>,
}

impl std::fmt::Debug for OrthoPolySystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OrthoPolySystem")
            .field("interval", &self.interval)
            .field("diag", &self.diag)
            .field("offdiag", &self.offdiag)
            .field("norms", &self.norms)
            .finish()
    }
}

impl OrthoPolySystem {
    pub fn weight(&self) -> &RealFn {
        &self.weight
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    /// Highest degree available.
    pub fn max_degree(&self) -> usize {
        self.diag.len()
    }

    /// `a_0 .. a_{N-1}`.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `b_0 .. b_{N-1}` with `b_0 = 0`.
    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// `h_0 .. h_N`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// `p_0(x) .. p_n(x)`.
    pub fn eval_upto(&self, n: usize, x: f64) -> Result<Vec<f64>> {
        if n > self.max_degree() {
            return Err(Error::domain(format!(
                "degree {n} requested but the system stops at {}",
                self.max_degree()
            )));
        }
        let mut out = Vec::with_capacity(n + 1);
        out.push(1.0);
        let mut prev = 0.0;
        for k in 0..n {
            let cur = out[k];
            let next = (x - self.diag[k]) * cur - self.offdiag[k] * prev;
            prev = cur;
            out.push(next);
        }
        Ok(out)
    }

    /// Monomial coefficients of `p_n`, lowest degree first.
    pub fn coeffs(&self, n: usize) -> Result<Vec<f64>> {
        if n > self.max_degree() {
            return Err(Error::domain(format!("degree {n} is not available")));
        }
        let mut prev: Vec<f64> = Vec::new();
        let mut cur = vec![1.0];
        for k in 0..n {
            let mut next = vec![0.0; k + 2];
            for (i, &c) in cur.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= self.diag[k] * c;
            }
            for (i, &c) in prev.iter().enumerate() {
                next[i] -= self.offdiag[k] * c;
            }
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// Laguerre system for `x^alpha e^{-x}` in closed form.
    pub fn laguerre(alpha: f64, n: usize) -> Result<Self> {
        if alpha <= -1.0 {
            return Err(Error::domain("Laguerre weight needs alpha > -1"));
        }
        let diag = (0..n).map(|k| 2.0 * k as f64 + alpha + 1.0).collect();
        let offdiag = (0..n).map(|k| k as f64 * (k as f64 + alpha)).collect();
        // h_k = k! Gamma(k + alpha + 1)
        let norms = (0..=n)
            .map(|k| {
                let k = k as f64;
                Ok((log_gamma(k + 1.0)? + log_gamma(k + alpha + 1.0)?).exp())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(OrthoPolySystem {
            weight: laguerre_weight(alpha),
            interval: Interval::HalfLine,
            diag,
            offdiag,
            norms,
        })
    }
}

/// Discretised Stieltjes procedure for the monic orthogonal polynomials of
/// `w` up to degree `n`, with the discrete measure taken from `rule` (its
/// Lebesgue weights times `w` at its nodes).
pub fn op_from_weight(
    weight: RealFn,
    interval: Interval,
    n: usize,
    rule: &QuadratureRule,
) -> Result<OrthoPolySystem> {
    if !rule_matches(interval, rule) {
        return Err(Error::domain(format!("rule {:?} does not cover {interval:?}", rule.kind())));
    }
    if rule.len() <= n {
        return Err(Error::domain(format!("a {}-point rule cannot resolve degree {n}", rule.len())));
    }
    let x = rule.nodes();
    let lambda: Vec<f64> = x.iter().zip(rule.plain_weights()).map(|(&t, &w)| w * weight(t)).collect();
    if lambda.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return Err(Error::domain("weight must be finite and non-negative on the interval"));
    }
    let mut diag = Vec::with_capacity(n);
    let mut offdiag = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n + 1);
    let mut prev = vec![0.0; x.len()];
    let mut cur = vec![1.0; x.len()];
    let mut h: f64 = lambda.iter().sum();
    norms.push(h);
    for k in 0..n {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Numeric(format!("norm h_{k} lost positivity; reduce N")));
        }
        let a = (0..x.len()).map(|i| lambda[i] * x[i] * cur[i] * cur[i]).sum::<f64>() / h;
        let b = if k == 0 { 0.0 } else { h / norms[k - 1] };
        diag.push(a);
        offdiag.push(b);
        let next: Vec<f64> = (0..x.len()).map(|i| (x[i] - a) * cur[i] - b * prev[i]).collect();
        prev = cur;
        cur = next;
        h = (0..x.len()).map(|i| lambda[i] * cur[i] * cur[i]).sum();
        norms.push(h);
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Numeric(format!("norm h_{n} lost positivity; reduce N")));
    }
    Ok(OrthoPolySystem { weight, interval, diag, offdiag, norms })
}

/// Both sides of the Christoffel–Darboux identity:
/// `sum_{n<N} p_n(x) p_n(y) / h_n` and
/// `(p_N(x) p_{N-1}(y) - p_{N-1}(x) p_N(y)) / (h_{N-1} (x - y))`.
pub fn cd_check(sys: &OrthoPolySystem, n: usize, x: f64, y: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::domain("Christoffel-Darboux needs N >= 1"));
    }
    if (x - y).abs() < 1e-12 {
        return Err(Error::domain("Christoffel-Darboux needs x != y"));
    }
    let px = sys.eval_upto(n, x)?;
    let py = sys.eval_upto(n, y)?;
    let h = sys.norms();
    let lhs = (0..n).map(|k| px[k] * py[k] / h[k]).sum();
    let rhs = (px[n] * py[n - 1] - px[n - 1] * py[n]) / (h[n - 1] * (x - y));
    Ok((lhs, rhs))
}

/// Independent evaluations used to validate the production formulas.
pub mod oracle {
    use super::*;
    use crate::numerics::{integrate_nd_plain, MAX_TENSOR_DIM};

    /// `N!/(N-n)! ∫ p_N(points, t) dt` over the remaining `N - n` variables.
    pub fn marginal_correlation(kernel: &KernelData, points: &[f64]) -> Result<f64> {
        let n = kernel.n();
        if points.len() > n {
            return Err(Error::domain("more points than particles"));
        }
        let rest = n - points.len();
        if rest > MAX_TENSOR_DIM {
            return Err(Error::Capacity(format!("{rest}-dimensional marginal")));
        }
        let rule = kernel.spec().quad();
        let rules = vec![rule; rest];
        let mut scratch = points.to_vec();
        scratch.resize(n, 0.0);
        let f = |t: &[f64]| {
            let mut full = scratch.clone();
            full[points.len()..].copy_from_slice(t);
            kernel.pdf_eval(&full).unwrap_or(f64::NAN)
        };
        let integral = integrate_nd_plain(&f, &rules)?;
        let ratio: f64 = ((rest + 1)..=n).map(|k| k as f64).product();
        Ok(ratio * integral)
    }

    /// `∫ K_N(x, x) dx`.
    pub fn trace(kernel: &KernelData) -> f64 {
        kernel.spec().quad().integrate_plain(|t| kernel.kernel_eval(t, t))
    }

    /// `∫ K_N(x, t) K_N(t, y) dt`.
    pub fn reproduce(kernel: &KernelData, x: f64, y: f64) -> f64 {
        kernel.spec().quad().integrate_plain(|t| kernel.kernel_eval(x, t) * kernel.kernel_eval(t, y))
    }

    /// `∫ pdf` over all `N` variables (`N <= 4`).
    pub fn total_mass(kernel: &KernelData) -> Result<f64> {
        marginal_correlation(kernel, &[])
    }
}
