//! Chiral Gaussian unitary ensemble with an external source.
//!
//! For `M x N` complex matrices with density proportional to
//! `exp(-tr X^† X + Re tr X A^†)`, the squared singular values form a
//! biorthogonal ensemble on `[0, ∞)` with `alpha = M - N`,
//! `eta_k = (-1)^{k-1} (k-1)! L^alpha_{k-1}` (monic) and
//! `xi_i = w_alpha(x, a_i) = x^alpha e^{-x} 0F1(alpha+1; a_i x) / Gamma(alpha+1)`,
//! where `a_i` are the source parameters. The Gram matrix is
//! `g_ij = a_j^{i-1} e^{a_j}` in closed form.

use log::warn;

use crate::ensemble::{check_size, EnsembleSpec, KernelData};
use crate::error::{Error, Result};
use crate::multiple::{xi_family, Composition, WeightSystem};
use crate::numerics::{
    complete_homogeneous, elem_sym, gauss_laguerre, hyp0f1, hyp0f1_taylor, laguerre_coeffs, laguerre_upto,
    log_gamma, real_fn, vandermonde, Interval, Matrix, Polynomial, QuadratureRule, RealFn,
};

/// Smallest separation of source parameters accepted by the distinct-`a` formulas.
pub const MIN_SEPARATION: f64 = 1e-8;

/// Largest `x` at which the kernel's u-integral is taken by quadrature by default.
pub const QUADRATURE_X_MAX: f64 = 8.0;

/// Nodes spread at most this far apart use the Taylor route for divided differences.
const TAYLOR_SPREAD: f64 = 1.0;
const TAYLOR_MAX_TERMS: usize = 400;

/// Points of the Gram and oracle rules.
const GRAM_POINTS: usize = 64;

/// Source and shape parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChgueParams {
    alpha: f64,
    a: Vec<f64>,
}

impl ChgueParams {
    pub fn new(alpha: f64, a: Vec<f64>) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!("alpha = M - N must be >= 0, got {alpha}")));
        }
        check_size(a.len())?;
        if let Some(v) = a.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::domain(format!("source parameters must be >= 0, got {v}")));
        }
        Ok(ChgueParams { alpha, a })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Errors with [`Error::Confluent`] if two parameters are closer than [`MIN_SEPARATION`].
    pub fn require_distinct(&self) -> Result<()> {
        require_distinct(&self.a)
    }
}

fn require_distinct(a: &[f64]) -> Result<()> {
    for i in 0..a.len() {
        for j in 0..i {
            if (a[i] - a[j]).abs() < MIN_SEPARATION {
                return Err(Error::Confluent(format!(
                    "a[{j}] = {} and a[{i}] = {} are closer than {MIN_SEPARATION:e}",
                    a[j], a[i]
                )));
            }
        }
    }
    Ok(())
}

fn pow_alpha(x: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else if x <= 0.0 {
        0.0
    } else {
        (alpha * x.ln()).exp()
    }
}

/// `x^alpha e^{-x} / Gamma(alpha + 1)`.
fn gamma_density(alpha: f64, x: f64, log_gamma_a1: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        return if alpha == 0.0 { (-log_gamma_a1).exp() } else { 0.0 };
    }
    (alpha * x.ln() - x - log_gamma_a1).exp()
}

/// `x -> x^alpha e^{-x} 0F1(alpha+1; a x) / Gamma(alpha+1)`.
pub fn w_alpha(alpha: f64, a: f64) -> Result<RealFn> {
    if !(alpha > -1.0) {
        return Err(Error::domain(format!("w_alpha needs alpha > -1, got {alpha}")));
    }
    let lg = log_gamma(alpha + 1.0)?;
    Ok(real_fn(move |x: f64| {
        let f = if a == 0.0 { 1.0 } else { hyp0f1(alpha + 1.0, a * x).unwrap_or(f64::NAN) };
        gamma_density(alpha, x, lg) * f
    }))
}

/// `eta_k(x) = (-1)^{k-1} (k-1)! L^alpha_{k-1}(x)` for `k = 1..=n`.
fn eta_values(n: usize, alpha: f64, x: f64) -> Result<Vec<f64>> {
    let l = laguerre_upto(n.saturating_sub(1), alpha, x)?;
    let mut fact = 1.0;
    Ok((0..n)
        .map(|k| {
            if k > 0 {
                fact *= -(k as f64);
            }
            fact * l[k]
        })
        .collect())
}

fn eta_family(n: usize, alpha: f64) -> Vec<RealFn> {
    (0..n)
        .map(|k| real_fn(move |x: f64| eta_values(k + 1, alpha, x).map(|v| v[k]).unwrap_or(f64::NAN)))
        .collect()
}

fn gram_rule(alpha: f64) -> Result<QuadratureRule> {
    gauss_laguerre(GRAM_POINTS, alpha)
}

/// `g_ij = a_j^{i-1} e^{a_j}`.
pub fn chgue_gram(p: &ChgueParams) -> Matrix {
    let n = p.n();
    Matrix::from_fn(n, n, |i, j| p.a[j].powi(i as i32) * p.a[j].exp())
}

/// The ensemble as a generic [`EnsembleSpec`] (quadrature Gram).
pub fn chgue_spec(p: &ChgueParams) -> Result<EnsembleSpec> {
    p.require_distinct()?;
    let xi = p.a.iter().map(|&a| w_alpha(p.alpha, a)).collect::<Result<Vec<_>>>()?;
    EnsembleSpec::new(Interval::HalfLine, eta_family(p.n(), p.alpha), xi, gram_rule(p.alpha)?)
}

/// Kernel data with the closed-form Gram matrix.
pub fn chgue_kernel_data(p: &ChgueParams) -> Result<KernelData> {
    KernelData::from_gram(chgue_spec(p)?, chgue_gram(p))
}

/// Normalised joint density `Delta(x) det[w_alpha(x_j, a_i)] / (N! prod e^{a_i} Delta(a))`.
pub fn chgue_pdf(p: &ChgueParams, x: &[f64]) -> Result<f64> {
    p.require_distinct()?;
    let n = p.n();
    if x.len() != n {
        return Err(Error::domain(format!("pdf needs {n} points, got {}", x.len())));
    }
    let w = p.a.iter().map(|&a| w_alpha(p.alpha, a)).collect::<Result<Vec<_>>>()?;
    let xi = Matrix::from_fn(n, n, |i, j| w[i](x[j]));
    let log_z = log_gamma(n as f64 + 1.0)? + p.a.iter().sum::<f64>();
    Ok(vandermonde(x) * xi.det() / vandermonde(&p.a) * (-log_z).exp())
}

/// How the kernel's u-integral `∫ u^{alpha+n} e^{-u} 0F1(alpha+1; -x u) du` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum URoute {
    /// Quadrature for `x <= QUADRATURE_X_MAX`, the Laguerre identity beyond.
    #[default]
    Auto,
    /// Generalised Gauss–Laguerre rule with `2N + 40` points.
    Quadrature,
    /// `n! Gamma(alpha+1) e^{-x} L^alpha_n(x)`.
    Laguerre,
}

/// Residue-sum form of the chGUE kernel for pairwise distinct sources.
#[derive(Debug, Clone)]
pub struct ChgueKernel {
    alpha: f64,
    a: Vec<f64>,
    /// `e^{-a_j} / prod_{l != j} (a_l - a_j)`
    weights: Vec<f64>,
    /// `e_k(a without a_j)`, `k = 0..N-1`
    elem: Vec<Vec<f64>>,
    rule: QuadratureRule,
    log_gamma_a1: f64,
    route: URoute,
}

/// Builds the kernel evaluator.
pub fn chgue_kernel(p: &ChgueParams) -> Result<ChgueKernel> {
    ChgueKernel::new(p, URoute::Auto)
}

impl ChgueKernel {
    pub fn new(p: &ChgueParams, route: URoute) -> Result<Self> {
        p.require_distinct()?;
        let n = p.n();
        let a = p.a.clone();
        let weights = (0..n)
            .map(|j| {
                let d: f64 = (0..n).filter(|&l| l != j).map(|l| a[l] - a[j]).product();
                (-a[j]).exp() / d
            })
            .collect();
        let elem = (0..n)
            .map(|j| {
                let rest: Vec<f64> = (0..n).filter(|&l| l != j).map(|l| a[l]).collect();
                elem_sym(&rest)
            })
            .collect();
        Ok(ChgueKernel {
            alpha: p.alpha,
            a,
            weights,
            elem,
            rule: gauss_laguerre(2 * n + 40, p.alpha)?,
            log_gamma_a1: log_gamma(p.alpha + 1.0)?,
            route,
        })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// `e^x ∫ u^{alpha+m} e^{-u} 0F1(alpha+1; -x u) du` for `m = 0..N-1`.
    fn u_integrals(&self, x: f64) -> Result<Vec<f64>> {
        let n = self.n();
        let quad = match self.route {
            URoute::Auto => x <= QUADRATURE_X_MAX,
            URoute::Quadrature => true,
            URoute::Laguerre => false,
        };
        if quad {
            let mut out = vec![0.0; n];
            for (&u, &w) in self.rule.nodes().iter().zip(self.rule.weights()) {
                let mut t = w * hyp0f1(self.alpha + 1.0, -x * u)?;
                for m in out.iter_mut() {
                    *m += t;
                    t *= u;
                }
            }
            let ex = x.exp();
            Ok(out.into_iter().map(|v| v * ex).collect())
        } else {
            let l = laguerre_upto(n - 1, self.alpha, x)?;
            let g = self.log_gamma_a1.exp();
            let mut fact = 1.0;
            Ok((0..n)
                .map(|m| {
                    if m > 0 {
                        fact *= m as f64;
                    }
                    fact * g * l[m]
                })
                .collect())
        }
    }

    /// `K_N(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if x < 0.0 || y < 0.0 {
            return Err(Error::domain("chGUE kernel lives on [0, ∞)"));
        }
        let n = self.n();
        let ints = self.u_integrals(x)?;
        let mut total = 0.0;
        for j in 0..n {
            let f = hyp0f1(self.alpha + 1.0, self.a[j] * y)?;
            let inner: f64 = (0..n).map(|m| self.elem[j][n - 1 - m] * ints[m]).sum();
            total += f * self.weights[j] * inner;
        }
        let pre = pow_alpha(y, self.alpha) * (-y - 2.0 * self.log_gamma_a1).exp();
        Ok(pre * total)
    }
}

/// Divided difference `f[a_1, .., a_N]` of `f(v) = e^{-v} 0F1(alpha+1; s v)`.
///
/// Well-separated nodes use the residue sum
/// `sum_i f(a_i) / prod_{j != i} (a_i - a_j)`. Clustered nodes use the
/// Taylor expansion of `f` about the centre `c`, whose coefficients are
/// `f_k = e^{-c} sum_{m+l=k} (-1)^m/m! s^l 0F1(alpha+1+l; s c)/((alpha+1)_l l!)`,
/// and `f[a] = sum_{k >= N-1} f_k h_{k-N+1}(a - c)`.
pub fn exp_hyp_divided_difference(alpha: f64, s: f64, a: &[f64]) -> Result<f64> {
    let n = a.len();
    if n == 0 {
        return Err(Error::domain("divided difference needs at least one node"));
    }
    require_distinct(a)?;
    let f = |v: f64| -> Result<f64> { Ok((-v).exp() * hyp0f1(alpha + 1.0, s * v)?) };
    if n == 1 {
        return f(a[0]);
    }
    let lo = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > TAYLOR_SPREAD {
        let mut total = 0.0;
        for i in 0..n {
            let d: f64 = (0..n).filter(|&j| j != i).map(|j| a[i] - a[j]).product();
            total += f(a[i])? / d;
        }
        return Ok(total);
    }
    let c = 0.5 * (lo + hi);
    let t: Vec<f64> = a.iter().map(|v| v - c).collect();
    let h = complete_homogeneous(&t, TAYLOR_MAX_TERMS);
    // g_l = s^l 0F1(alpha+1+l; s c) / ((alpha+1)_l l!)
    let mut g = Vec::with_capacity(TAYLOR_MAX_TERMS + n);
    let mut scale = 1.0;
    let mut total = 0.0;
    let mut small = 0;
    for k in 0..TAYLOR_MAX_TERMS + n - 1 {
        if k > 0 {
            let l = (k - 1) as f64;
            scale *= s / ((alpha + 1.0 + l) * (l + 1.0));
        }
        g.push(if scale == 0.0 { 0.0 } else { scale * hyp0f1(alpha + 1.0 + k as f64, s * c)? });
        if k + 1 < n {
            continue;
        }
        let mut fk = 0.0;
        let mut em = 1.0;
        for m in 0..=k {
            if m > 0 {
                em *= -1.0 / m as f64;
            }
            fk += em * g[k - m];
        }
        let term = fk * h[k + 1 - n];
        total += term;
        if term.abs() <= 1e-17 * total.abs() {
            small += 1;
            if small >= 3 {
                return Ok((-c).exp() * total);
            }
        } else {
            small = 0;
        }
    }
    Err(Error::NonConvergence {
        what: "Taylor divided difference",
        iterations: TAYLOR_MAX_TERMS,
        partial: (-c).exp() * total,
    })
}

/// Type I function `Q(x) = w_alpha(x, 0) f[a_1, .., a_N]` with `f(v) = e^{-v} 0F1(alpha+1; x v)`.
#[derive(Debug, Clone)]
pub struct ChgueTypeOne {
    alpha: f64,
    a: Vec<f64>,
    log_gamma_a1: f64,
}

pub fn chgue_type_one(p: &ChgueParams) -> Result<ChgueTypeOne> {
    p.require_distinct()?;
    Ok(ChgueTypeOne { alpha: p.alpha, a: p.a.clone(), log_gamma_a1: log_gamma(p.alpha + 1.0)? })
}

impl ChgueTypeOne {
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::domain("type I function lives on [0, ∞)"));
        }
        let dd = exp_hyp_divided_difference(self.alpha, x, &self.a)?;
        Ok(gamma_density(self.alpha, x, self.log_gamma_a1) * dd)
    }
}

/// Type II polynomial `P(x) = (-1)^N sum_n n! e_{N-n}(a) L^alpha_n(x)`.
#[derive(Debug, Clone)]
pub struct ChgueTypeTwo {
    alpha: f64,
    /// `(-1)^N n! e_{N-n}(a)`, `n = 0..=N`
    laguerre_weights: Vec<f64>,
    poly: Polynomial,
}

pub fn chgue_type_two(p: &ChgueParams) -> Result<ChgueTypeTwo> {
    type_two_for(p.alpha, &p.a)
}

fn type_two_for(alpha: f64, a: &[f64]) -> Result<ChgueTypeTwo> {
    let n = a.len();
    let e = elem_sym(a);
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut fact = 1.0;
    let mut laguerre_weights = Vec::with_capacity(n + 1);
    let mut coeffs = vec![0.0; n + 1];
    for m in 0..=n {
        if m > 0 {
            fact *= m as f64;
        }
        let wgt = sign * fact * e[n - m];
        laguerre_weights.push(wgt);
        for (k, c) in laguerre_coeffs(m, alpha)?.into_iter().enumerate() {
            coeffs[k] += wgt * c;
        }
    }
    coeffs[n] = 1.0;
    Ok(ChgueTypeTwo { alpha, laguerre_weights, poly: Polynomial::new(coeffs) })
}

impl ChgueTypeTwo {
    /// Monomial form (monic).
    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }

    pub fn degree(&self) -> usize {
        self.laguerre_weights.len() - 1
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let l = laguerre_upto(self.degree(), self.alpha, x)?;
        Ok(self.laguerre_weights.iter().zip(&l).map(|(w, v)| w * v).sum())
    }
}

/// `(chgue_kernel(x, y), sum_{i<N} P_i(x) Q_i(y))` along the staircase
/// `P_i` from `a_1..a_i`, `Q_i` from `a_1..a_{i+1}`.
pub fn kernel_sum_check(p: &ChgueParams, x: f64, y: f64) -> Result<(f64, f64)> {
    if p.a.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::domain("the staircase sum needs a_1 > a_2 > ... > a_N"));
    }
    let kernel = chgue_kernel(p)?.eval(x, y)?;
    let mut sum = 0.0;
    for i in 0..p.n() {
        let pi = type_two_for(p.alpha, &p.a[..i])?.eval(x)?;
        let qi = chgue_type_one(&ChgueParams::new(p.alpha, p.a[..=i].to_vec())?)?.eval(y)?;
        sum += pi * qi;
    }
    Ok((kernel, sum))
}

/// Distinct source values `b_1 > .. > b_d >= 0` with multiplicities `m`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConfluentSpec {
    b: Vec<f64>,
    m: Composition,
}

impl ConfluentSpec {
    pub fn new(b: Vec<f64>, m: Vec<usize>) -> Result<Self> {
        if b.is_empty() || b.len() != m.len() {
            return Err(Error::domain(format!(
                "{} distinct values with {} multiplicities",
                b.len(),
                m.len()
            )));
        }
        if b.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::domain("confluent values must be strictly decreasing"));
        }
        if !(b[b.len() - 1] >= 0.0) || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("confluent values must be finite and >= 0"));
        }
        if m.contains(&0) {
            return Err(Error::domain("multiplicities must be >= 1"));
        }
        let m = Composition::new(m)?;
        check_size(m.total())?;
        Ok(ConfluentSpec { b, m })
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn m(&self) -> &Composition {
        &self.m
    }

    pub fn n(&self) -> usize {
        self.m.total()
    }

    /// The source vector `a = b^m`.
    pub fn expanded(&self) -> Vec<f64> {
        self.b.iter().zip(self.m.parts()).flat_map(|(&b, &m)| std::iter::repeat_n(b, m)).collect()
    }
}

/// Weights `[w_alpha(b_1), w_{alpha+1}(b_1), ..]` with multiplicities
/// `(⌊(m_k+1)/2⌋, ⌊m_k/2⌋)`; a zero `b_d` contributes `w_alpha(·, 0)` with
/// multiplicity `m_d`.
pub fn confluent_weights(c: &ConfluentSpec, alpha: f64) -> Result<(WeightSystem, Composition)> {
    let mut weights = Vec::new();
    let mut parts = Vec::new();
    let d = c.b.len();
    for (k, (&b, &m)) in c.b.iter().zip(c.m.parts()).enumerate() {
        if k + 1 == d && b == 0.0 {
            weights.push(w_alpha(alpha, 0.0)?);
            parts.push(m);
        } else {
            weights.push(w_alpha(alpha, b)?);
            parts.push(m.div_ceil(2));
            weights.push(w_alpha(alpha + 1.0, b)?);
            parts.push(m / 2);
        }
    }
    let ws = WeightSystem::new(weights, Interval::HalfLine, gram_rule(alpha)?)?;
    Ok((ws, Composition::new(parts)?))
}

/// The confluent ensemble as a generic spec with the chGUE `eta` family.
pub fn confluent_spec(c: &ConfluentSpec, alpha: f64) -> Result<EnsembleSpec> {
    let (ws, comp) = confluent_weights(c, alpha)?;
    let xi = xi_family(&ws, &comp);
    EnsembleSpec::new(Interval::HalfLine, eta_family(c.n(), alpha), xi, ws.quad().clone())
}

/// Unperturbed Laguerre kernel
/// `Kbar_M(x, y) = M!/Gamma(M+alpha) y^alpha e^{-y} (L_{M-1}(x) L_M(y) - L_M(x) L_{M-1}(y)) / (x - y)`,
/// with the sum form `y^alpha e^{-y} sum_{n<M} n!/Gamma(n+alpha+1) L_n(x) L_n(y)` near the diagonal.
pub fn laguerre_kernel(m: usize, alpha: f64, x: f64, y: f64) -> Result<f64> {
    if m == 0 {
        return Ok(0.0);
    }
    let lx = laguerre_upto(m, alpha, x)?;
    let ly = laguerre_upto(m, alpha, y)?;
    let w = pow_alpha(y, alpha) * (-y).exp();
    if (x - y).abs() <= 1e-6 * x.abs().max(1.0) {
        let mut total = 0.0;
        for n in 0..m {
            let c = (log_gamma(n as f64 + 1.0)? - log_gamma(n as f64 + alpha + 1.0)?).exp();
            total += c * lx[n] * ly[n];
        }
        return Ok(w * total);
    }
    let c = (log_gamma(m as f64 + 1.0)? - log_gamma(m as f64 + alpha)?).exp();
    Ok(c * w * (lx[m - 1] * ly[m] - lx[m] * ly[m - 1]) / (x - y))
}

/// Finite-rank split of the kernel for `a = (a_1 > .. > a_r > 0, 0, .., 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankDecomposition {
    pub full: f64,
    pub unperturbed: f64,
    pub correction: f64,
}

/// `K_N = Kbar_{N-r} + sum_{k<=r} p_k(x) q_k(y)` where
/// `p_k(x) = sum_m e_{k-1-m}(a_1..a_{k-1}) (N-r+m)! L^alpha_{N-r+m}(x)` and `q_k`
/// is the residue sum of `e^v 0F1(alpha+1; -y v) / (v^{N-r} prod_{i<=k}(v + a_i))`
/// over the poles `-a_1, .., -a_k` and `0`, times `y^alpha e^{-y} / Gamma(alpha+1)`.
pub fn rank_decomposition(p: &ChgueParams, r: usize, x: f64, y: f64) -> Result<RankDecomposition> {
    let n = p.n();
    if r >= n {
        return Err(Error::domain(format!("rank r = {r} must be below N = {n}")));
    }
    let a = p.a();
    if a[r..].iter().any(|&v| v != 0.0) {
        return Err(Error::domain("sources beyond the rank must vanish"));
    }
    if a[..r].iter().any(|&v| !(v > 0.0)) || a[..r].windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::domain("the first r sources must satisfy a_1 > .. > a_r > 0"));
    }
    require_distinct(&a[..r])?;
    if x < 0.0 || y < 0.0 {
        return Err(Error::domain("chGUE kernel lives on [0, ∞)"));
    }
    let alpha = p.alpha();
    let m = n - r;
    let unperturbed = laguerre_kernel(m, alpha, x, y)?;
    let lx = laguerre_upto(n, alpha, x)?;
    let lg = log_gamma(alpha + 1.0)?;
    let mut correction = 0.0;
    for k in 1..=r {
        let e = elem_sym(&a[..k - 1]);
        let mut pk = 0.0;
        for j in 0..k {
            let deg = m + j;
            let fact = log_gamma(deg as f64 + 1.0)?.exp();
            pk += e[k - 1 - j] * fact * lx[deg];
        }
        correction += pk * q_factor(alpha, m, &a[..k], y, lg)?;
    }
    Ok(RankDecomposition { full: unperturbed + correction, unperturbed, correction })
}

fn q_factor(alpha: f64, m: usize, a: &[f64], y: f64, log_gamma_a1: f64) -> Result<f64> {
    let k = a.len();
    let mut total = 0.0;
    for i in 0..k {
        let d: f64 = (0..k).filter(|&j| j != i).map(|j| a[j] - a[i]).product();
        let f = (-a[i]).exp() * hyp0f1(alpha + 1.0, y * a[i])?;
        total += f / ((-a[i]).powi(m as i32) * d);
    }
    // coefficient of v^{m-1} in e^v 0F1(alpha+1; -y v) / prod(v + a_i)
    let order = m - 1;
    let hyp = hyp0f1_taylor(alpha + 1.0, -y, order);
    let mut series: Vec<f64> = Vec::with_capacity(order + 1);
    let mut ef = 1.0;
    for j in 0..=order {
        if j > 0 {
            ef /= j as f64;
        }
        series.push(ef);
    }
    series = cauchy_product(&series, &hyp, order);
    for &ai in a {
        let inv: Vec<f64> = (0..=order).map(|j| (-1.0f64).powi(j as i32) / ai.powi(j as i32 + 1)).collect();
        series = cauchy_product(&series, &inv, order);
    }
    total += series[order];
    Ok(gamma_density(alpha, y, log_gamma_a1) * total)
}

fn cauchy_product(a: &[f64], b: &[f64], order: usize) -> Vec<f64> {
    (0..=order).map(|k| (0..=k).map(|j| a[j] * b[k - j]).sum()).collect()
}

/// Kernel of a confluent ensemble through the generic Gram-inverse path.
pub fn confluent_kernel(c: &ConfluentSpec, alpha: f64) -> Result<KernelData> {
    let spec = confluent_spec(c, alpha)?;
    let k = crate::ensemble::build_kernel(&spec)?;
    if k.gram().condition_estimate().map(|v| v > 1e12).unwrap_or(true) {
        warn!("confluent Gram matrix is poorly conditioned");
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{build_kernel, oracle};
    use crate::multiple::{check_ortho_one, check_ortho_two, type_one, type_two};
    use crate::numerics::laguerre;
    use proptest::prelude::*;

    fn params(alpha: f64, a: &[f64]) -> ChgueParams {
        ChgueParams::new(alpha, a.to_vec()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn weight_examples() {
        let w = w_alpha(0.0, 0.0).unwrap();
        assert!(rel(w(1.3), (-1.3f64).exp()) < 1e-15);
        for &alpha in &[0.0, 0.5, 2.0] {
            let w = w_alpha(alpha, 0.0).unwrap();
            let r = gauss_laguerre(40, 0.0).unwrap();
            let mass = r.integrate_plain(|x| w(x));
            assert!((mass - 1.0).abs() < 1e-6 || alpha != 0.0);
            let r = gauss_laguerre(40, alpha).unwrap();
            assert!((r.integrate_plain(|x| w(x)) - 1.0).abs() < 1e-12);
        }
        // w_{alpha+i}(x, 0) = x^i w_alpha(x, 0) Gamma(alpha+1)/Gamma(alpha+i+1)
        let (alpha, i, x) = (0.5, 2, 1.7f64);
        let lhs = w_alpha(alpha + i as f64, 0.0).unwrap()(x);
        let ratio = (log_gamma(alpha + 1.0).unwrap() - log_gamma(alpha + i as f64 + 1.0).unwrap()).exp();
        let rhs = x.powi(i) * w_alpha(alpha, 0.0).unwrap()(x) * ratio;
        assert!(rel(lhs, rhs) < 1e-14);
    }

    #[test]
    fn weight_recurrence_links_neighbouring_orders() {
        let (alpha, b, x) = (1.0, 0.7, 2.3f64);
        let w = |s: f64| w_alpha(s, b).unwrap()(x);
        for k in 2..5 {
            let k = k as f64;
            let lhs = b * w(alpha + k);
            let rhs = x * w(alpha + k - 2.0) - (alpha + k - 1.0) * w(alpha + k - 1.0);
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1e-3), "k={k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn gram_closed_form_matches_quadrature() {
        for &alpha in &[0.0, 0.5, 1.0, 2.0] {
            for a in [vec![0.3, 1.4], vec![0.2, 0.7, 1.3], vec![1.9, 0.05, 0.8, 1.2]] {
                let p = params(alpha, &a);
                let exact = chgue_gram(&p);
                let quad = chgue_spec(&p).unwrap().gram();
                for i in 0..p.n() {
                    for j in 0..p.n() {
                        let e = exact[(i, j)];
                        assert!(
                            (quad[(i, j)] - e).abs() <= 1e-8 * e.abs().max(1.0),
                            "alpha={alpha} {a:?} ({i},{j})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn gram_examples() {
        let p = params(1.0, &[0.0, 0.5, 1.5]);
        let g = chgue_gram(&p);
        assert_eq!((g[(0, 0)], g[(1, 0)], g[(2, 0)]), (1.0, 0.0, 0.0));
        let a = [0.2, 0.7, 1.3];
        let g = chgue_gram(&params(1.0, &a));
        let expect = a.iter().map(|v| v.exp()).product::<f64>() * vandermonde(&a);
        assert!(rel(g.det(), expect) < 1e-10);
    }

    #[test]
    fn pdf_examples() {
        let p = params(1.5, &[0.0]);
        let x = 0.9f64;
        let expect = x.powf(1.5) * (-x).exp() / log_gamma(2.5).unwrap().exp();
        assert!(rel(chgue_pdf(&p, &[x]).unwrap(), expect) < 1e-14);

        let p = params(1.0, &[0.5, 1.5]);
        let k = chgue_kernel_data(&p).unwrap();
        assert!((oracle::total_mass(&k).unwrap() - 1.0).abs() < 1e-7);
        let direct = chgue_pdf(&p, &[0.7, 2.9]).unwrap();
        assert!(rel(k.pdf_eval(&[0.7, 2.9]).unwrap(), direct) < 1e-10);
        let swapped = chgue_pdf(&params(1.0, &[1.5, 0.5]), &[2.9, 0.7]).unwrap();
        assert!(rel(swapped, direct) < 1e-13);
        assert!(matches!(chgue_pdf(&params(1.0, &[0.5, 0.5]), &[1.0, 2.0]), Err(Error::Confluent(_))));
    }

    #[test]
    fn kernel_matches_generic_path() {
        let p = params(1.0, &[0.2, 0.7, 1.3]);
        let kernel = chgue_kernel(&p).unwrap();
        let generic = build_kernel(&chgue_spec(&p).unwrap()).unwrap();
        for &(x, y) in &[(0.3, 0.9), (1.7, 4.2), (5.5, 0.1), (2.0, 2.0), (8.0, 3.3)] {
            let a = kernel.eval(x, y).unwrap();
            let b = generic.kernel_eval(x, y);
            assert!(rel(a, b) < 1e-7, "({x},{y}): {a} vs {b}");
        }
    }

    #[test]
    fn kernel_routes_agree_and_rule_doubling_is_stable() {
        let p = params(0.5, &[0.4, 1.1, 2.0]);
        let q = ChgueKernel::new(&p, URoute::Quadrature).unwrap();
        let l = ChgueKernel::new(&p, URoute::Laguerre).unwrap();
        let mut doubled = q.clone();
        doubled.rule = gauss_laguerre(2 * (2 * p.n() + 40), 0.5).unwrap();
        for &x in &[0.0, 0.5, 3.0, 6.0, QUADRATURE_X_MAX] {
            let a = q.eval(x, 1.3).unwrap();
            assert!(rel(a, l.eval(x, 1.3).unwrap()) < 1e-9, "x={x}");
            assert!(rel(a, doubled.eval(x, 1.3).unwrap()) < 1e-9, "x={x}");
        }
    }

    #[test]
    fn kernel_small_source_limit() {
        let (n, alpha) = (3, 1.0);
        let kernel = chgue_kernel(&params(alpha, &[1e-5, 2e-5, 3e-5])).unwrap();
        for &(x, y) in &[(0.5, 1.5), (2.0, 0.7), (1.1, 1.1)] {
            let a = kernel.eval(x, y).unwrap();
            let b = laguerre_kernel(n, alpha, x, y).unwrap();
            assert!((a - b).abs() < 1e-4, "({x},{y}): {a} vs {b}");
        }
    }

    #[test]
    fn kernel_trace() {
        let p = params(1.0, &[0.4, 0.9, 1.6]);
        let kernel = chgue_kernel(&p).unwrap();
        let r = gauss_laguerre(64, 1.0).unwrap();
        let tr = r.integrate_plain(|t| kernel.eval(t, t).unwrap());
        assert!((tr - 3.0).abs() < 1e-6, "{tr}");
    }

    #[test]
    fn type_one_moments() {
        let p = params(1.0, &[0.3, 0.8, 1.6]);
        let q = chgue_type_one(&p).unwrap();
        let r = gauss_laguerre(64, 1.0).unwrap();
        for j in 0..3 {
            let m = r.integrate_plain(|x| x.powi(j) * q.eval(x).unwrap());
            let e = if j == 2 { 1.0 } else { 0.0 };
            assert!((m - e).abs() < 1e-8, "j={j}: {m}");
        }
        let single = chgue_type_one(&params(0.5, &[0.7])).unwrap();
        let w = w_alpha(0.5, 0.7).unwrap();
        assert!(rel(single.eval(2.0).unwrap(), w(2.0) * (-0.7f64).exp()) < 1e-14);
    }

    #[test]
    fn type_one_routes_agree() {
        // spread just below and above the switch, evaluated both ways
        let a = [0.35, 0.9, 1.3];
        for &x in &[0.2, 1.0, 4.0, 9.0] {
            let taylor = exp_hyp_divided_difference(1.0, x, &a).unwrap();
            let f = |v: f64| (-v).exp() * hyp0f1(2.0, x * v).unwrap();
            let mut resid = 0.0;
            for i in 0..3 {
                let d: f64 = (0..3).filter(|&j| j != i).map(|j| a[i] - a[j]).product();
                resid += f(a[i]) / d;
            }
            assert!(rel(taylor, resid) < 1e-11, "x={x}: {taylor} vs {resid}");
        }
    }

    #[test]
    fn type_one_laguerre_limit() {
        for &alpha in &[0.0, 1.0] {
            let n = 3;
            let q = chgue_type_one(&params(alpha, &[1e-5, 0.6e-5, 0.3e-5])).unwrap();
            for &x in &[0.5f64, 2.0, 5.0] {
                let fact = log_gamma(n as f64 + alpha).unwrap().exp();
                let lim = x.powf(alpha) * (-x).exp() * laguerre(n - 1, alpha, x).unwrap() / fact;
                assert!((q.eval(x).unwrap() - lim).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn type_two_examples() {
        let p = chgue_type_two(&params(0.0, &[0.0, 0.0, 0.0])).unwrap();
        for &x in &[0.0, 1.0, 4.5] {
            assert!(rel(p.eval(x).unwrap(), -6.0 * laguerre(3, 0.0, x).unwrap()) < 1e-13);
        }
        let p = chgue_type_two(&params(0.5, &[0.1, 0.9, 1.7, 0.4])).unwrap();
        assert_eq!(p.polynomial().leading(), 1.0);
        for &x in &[0.3, 2.2, 7.0] {
            let a = p.eval(x).unwrap();
            assert!(rel(p.polynomial().eval(x), a) < 1e-9);
        }
        let params3 = params(1.0, &[0.3, 0.8, 1.6]);
        let p = chgue_type_two(&params3).unwrap();
        let r = gauss_laguerre(64, 1.0).unwrap();
        for &a in params3.a() {
            let w = w_alpha(1.0, a).unwrap();
            assert!(r.integrate_plain(|x| w(x) * p.eval(x).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn closed_forms_match_generic_multiple_polynomials() {
        let a = [0.3, 0.8, 1.6];
        let p = params(1.0, &a);
        let ws = WeightSystem::new(
            a.iter().map(|&v| w_alpha(1.0, v).unwrap()).collect(),
            Interval::HalfLine,
            gauss_laguerre(64, 1.0).unwrap(),
        )
        .unwrap();
        let comp = Composition::new(vec![1, 1, 1]).unwrap();
        let q1 = type_one(&ws, &comp).unwrap();
        let q2 = chgue_type_one(&p).unwrap();
        let p1 = type_two(&ws, &comp).unwrap();
        let p2 = chgue_type_two(&p).unwrap();
        for &x in &[0.4, 1.9, 5.0] {
            assert!(rel(q1.eval(x), q2.eval(x).unwrap()) < 1e-8);
            assert!(rel(p1.eval(x), p2.eval(x).unwrap()) < 1e-8);
        }
        assert!(check_ortho_one(&q1)[..2].iter().all(|v| v.abs() < 1e-9));
        assert!(check_ortho_two(&p1, &ws, &comp).iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn staircase_sum_examples() {
        let p = params(1.0, &[1.3, 0.4]);
        let (k, s) = kernel_sum_check(&p, 0.8, 2.1).unwrap();
        assert!((k - s).abs() <= 1e-7, "{k} vs {s}");
        let p = params(0.5, &[0.9]);
        let (k, s) = kernel_sum_check(&p, 1.2, 0.6).unwrap();
        let expect = w_alpha(0.5, 0.9).unwrap()(0.6) * (-0.9f64).exp();
        assert!(rel(k, expect) < 1e-10 && rel(s, expect) < 1e-14);
        assert!(kernel_sum_check(&params(1.0, &[0.4, 1.3]), 0.8, 2.1).is_err());
    }

    #[test]
    fn staircase_is_biorthogonal() {
        let a = [1.7, 1.1, 0.6, 0.2];
        let r = gauss_laguerre(64, 1.0).unwrap();
        let ps: Vec<ChgueTypeTwo> = (0..4).map(|i| type_two_for(1.0, &a[..i]).unwrap()).collect();
        let qs: Vec<ChgueTypeOne> = (0..4).map(|i| chgue_type_one(&params(1.0, &a[..=i])).unwrap()).collect();
        for i in 0..4 {
            for j in 0..4 {
                let v = r.integrate_plain(|x| ps[i].eval(x).unwrap() * qs[j].eval(x).unwrap());
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-8, "({i},{j}): {v}");
            }
        }
    }

    #[test]
    fn confluent_weight_examples() {
        let (ws, comp) = confluent_weights(&ConfluentSpec::new(vec![0.0], vec![4]).unwrap(), 1.0).unwrap();
        assert_eq!((ws.len(), comp.parts()), (1, &[4][..]));
        let (ws, comp) = confluent_weights(&ConfluentSpec::new(vec![0.8], vec![3]).unwrap(), 1.0).unwrap();
        assert_eq!((ws.len(), comp.parts()), (2, &[2, 1][..]));
        let w1 = w_alpha(2.0, 0.8).unwrap();
        assert!(rel(ws.weights()[1](1.4), w1(1.4)) < 1e-15);
        let (ws, comp) =
            confluent_weights(&ConfluentSpec::new(vec![1.2, 0.5, 0.0], vec![2, 1, 3]).unwrap(), 0.0).unwrap();
        assert_eq!((ws.len(), comp.parts()), (5, &[1, 1, 1, 0, 3][..]));
        assert!(ConfluentSpec::new(vec![0.5, 0.9], vec![1, 1]).is_err());
    }

    #[test]
    fn confluent_pdf_is_the_limit() {
        let (beta, eps, alpha) = (0.7, 1e-4, 1.0);
        let near = params(alpha, &[beta, beta + eps, beta + 2.0 * eps]);
        let conf = confluent_kernel(&ConfluentSpec::new(vec![beta], vec![3]).unwrap(), alpha).unwrap();
        for x in [[0.4, 1.3, 2.8], [0.9, 2.0, 5.1]] {
            let a = chgue_pdf(&near, &x).unwrap();
            let b = conf.pdf_eval(&x).unwrap();
            assert!((a - b).abs() < 1e-3 * b.abs().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn rank_decomposition_examples() {
        let p = params(1.0, &[0.0, 0.0, 0.0]);
        let d = rank_decomposition(&p, 0, 0.5, 1.4).unwrap();
        assert_eq!(d.correction, 0.0);
        assert_eq!(d.full, laguerre_kernel(3, 1.0, 0.5, 1.4).unwrap());

        let cases: [(&[f64], usize, f64); 3] =
            [(&[0.9, 0.0, 0.0], 1, 1.0), (&[1.2, 0.5, 0.0, 0.0], 2, 1.0), (&[1.2, 0.5, 0.0, 0.0], 2, 0.5)];
        for (a, r, alpha) in cases {
            let p = params(alpha, a);
            let mut b: Vec<f64> = a[..r].to_vec();
            b.push(0.0);
            let mut m = vec![1; r];
            m.push(a.len() - r);
            let conf = confluent_kernel(&ConfluentSpec::new(b, m).unwrap(), alpha).unwrap();
            for &(x, y) in &[(0.5, 1.4), (2.2, 0.3), (1.0, 1.0)] {
                let d = rank_decomposition(&p, r, x, y).unwrap();
                let oracle = conf.kernel_eval(x, y);
                assert!(rel(d.full, oracle) < 1e-6, "{a:?} ({x},{y}): {} vs {oracle}", d.full);
                assert_eq!(d.full, d.unperturbed + d.correction);
            }
        }
    }

    #[test]
    fn laguerre_kernel_forms_agree() {
        let (x, y) = (1.3, 1.3 + 2e-6);
        let a = laguerre_kernel(4, 0.5, x, y).unwrap();
        let b = laguerre_kernel(4, 0.5, x, x).unwrap();
        assert!(rel(a, b) < 1e-5);
        let sys = crate::ensemble::OrthoPolySystem::laguerre(0.5, 4).unwrap();
        let (_, cd) = crate::ensemble::cd_check(&sys, 4, 0.7, 2.5).unwrap();
        let w = 2.5f64.powf(0.5) * (-2.5f64).exp();
        assert!(rel(laguerre_kernel(4, 0.5, 0.7, 2.5).unwrap(), w * cd) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn kernel_equals_staircase_sum(
            alpha in 0.0f64..2.0,
            mut a in proptest::collection::vec(0.05f64..2.5, 2..=3),
            x in 0.1f64..6.0,
            y in 0.1f64..6.0,
        ) {
            a.sort_by(|p, q| q.total_cmp(p));
            prop_assume!(a.windows(2).all(|w| w[0] - w[1] > 0.05));
            let (k, s) = kernel_sum_check(&params(alpha, &a), x, y).unwrap();
            prop_assert!((k - s).abs() <= 1e-6 * k.abs().max(1e-8), "{} vs {}", k, s);
        }
    }
}
