//! Averages of characteristic polynomials and their ratios.
//!
//! Two independent routes are provided: Monte Carlo sampling of the random
//! matrix models, and quadrature against the exact joint eigenvalue density
//! for small `N`. Residues `Res_{z=x}` are extracted by the `ε -> 0` limit of
//! `(1/π) Im F(x - iε)` with Richardson extrapolation over a halving schedule.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::chgue::{
    chgue_kernel, chgue_kernel_data, confluent_kernel, confluent_weights, ChgueKernel, ChgueParams,
    ConfluentSpec,
};
use crate::ensemble::{build_kernel, check_size, EnsembleSpec, KernelData};
use crate::error::{Error, Result};
use crate::multiple::{xi_family, Composition, WeightSystem};
use crate::numerics::{
    cauchy_transform, gauss_hermite, gauss_laguerre, gauss_legendre, real_fn, Interval, Matrix,
    QuadratureRule,
};

/// Samples per accumulation block.
pub const BLOCK: u64 = 1024;

/// Default `ε` schedule for residue extraction.
pub const DEFAULT_SCHEDULE: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Default error orders removed by Richardson extrapolation.
pub const DEFAULT_ORDERS: [u32; 2] = [1, 2];

/// Points per dimension of the oracle tensor rule.
const ORACLE_POINTS: usize = 48;

/// Confining potential of the Hermitian model.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// `V(x) = x^2`.
    Gaussian,
    /// `V(x) = sum_k c_k x^k`.
    Polynomial(Vec<f64>),
}

impl Potential {
    fn is_gaussian(&self) -> bool {
        match self {
            Potential::Gaussian => true,
            Potential::Polynomial(c) => {
                let mut c = c.clone();
                while c.last() == Some(&0.0) {
                    c.pop();
                }
                c == [0.0, 0.0, 1.0]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceKind {
    /// Density `∝ exp(-tr V(X) + tr A X)` on `N x N` Hermitian matrices, `A = diag(a)`.
    HermitianWithSource { potential: Potential, a: Vec<f64> },
    /// Density `∝ exp(-tr X^†X + Re tr X A^†)` on `(N + alpha) x N` complex matrices.
    ChiralWithSource { alpha: f64, a: Vec<f64> },
}

/// A random matrix model with an external source.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    kind: SourceKind,
}

impl SourceModel {
    pub fn hermitian(a: Vec<f64>) -> Result<Self> {
        Self::hermitian_with_potential(Potential::Gaussian, a)
    }

    pub fn hermitian_with_potential(potential: Potential, a: Vec<f64>) -> Result<Self> {
        check_size(a.len())?;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("source entries must be finite"));
        }
        Ok(SourceModel { kind: SourceKind::HermitianWithSource { potential, a } })
    }

    pub fn chiral(alpha: f64, a: Vec<f64>) -> Result<Self> {
        let p = ChgueParams::new(alpha, a)?;
        Ok(SourceModel { kind: SourceKind::ChiralWithSource { alpha: p.alpha(), a: p.a().to_vec() } })
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        match &self.kind {
            SourceKind::HermitianWithSource { a, .. } | SourceKind::ChiralWithSource { a, .. } => a.len(),
        }
    }

    pub fn interval(&self) -> Interval {
        match self.kind {
            SourceKind::HermitianWithSource { .. } => Interval::RealLine,
            SourceKind::ChiralWithSource { .. } => Interval::HalfLine,
        }
    }

    /// Checks that direct sampling is available.
    pub fn check_sampleable(&self) -> Result<()> {
        match &self.kind {
            SourceKind::HermitianWithSource { potential, .. } if !potential.is_gaussian() => {
                Err(Error::Unsupported("sampling needs the Gaussian potential V(x) = x^2".into()))
            }
            SourceKind::ChiralWithSource { alpha, .. } if alpha.fract() != 0.0 => {
                Err(Error::Unsupported(format!("sampling needs an integer alpha = M - N, got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    /// Distinct source values with multiplicities, in the order used by the weight system.
    fn grouped_sources(&self) -> (Vec<f64>, Vec<usize>) {
        let (a, descending) = match &self.kind {
            SourceKind::ChiralWithSource { a, .. } => (a, true),
            SourceKind::HermitianWithSource { a, .. } => (a, false),
        };
        let mut v = a.clone();
        v.sort_by(|p, q| if descending { q.total_cmp(p) } else { p.total_cmp(q) });
        let mut b: Vec<f64> = Vec::new();
        let mut m: Vec<usize> = Vec::new();
        for x in v {
            if b.last() == Some(&x) {
                *m.last_mut().unwrap() += 1;
            } else {
                b.push(x);
                m.push(1);
            }
        }
        (b, m)
    }

    /// Weights and multiplicities whose multiple orthogonal polynomials the
    /// characteristic-polynomial averages reproduce.
    pub fn weight_system(&self) -> Result<(WeightSystem, Composition)> {
        let (b, m) = self.grouped_sources();
        match &self.kind {
            SourceKind::ChiralWithSource { alpha, .. } => {
                confluent_weights(&ConfluentSpec::new(b, m)?, *alpha)
            }
            SourceKind::HermitianWithSource { potential, .. } => {
                if !potential.is_gaussian() {
                    return Err(Error::Unsupported("reference density needs V(x) = x^2".into()));
                }
                let weights = b.iter().map(|&s| real_fn(move |x: f64| (s * x - x * x).exp())).collect();
                let ws = WeightSystem::new(weights, Interval::RealLine, gauss_hermite(64)?)?;
                Ok((ws, Composition::new(m)?))
            }
        }
    }

    /// Exact kernel data of the eigenvalue process.
    pub fn reference_ensemble(&self) -> Result<KernelData> {
        match &self.kind {
            SourceKind::ChiralWithSource { alpha, a } => {
                let (b, m) = self.grouped_sources();
                if m.iter().all(|&k| k == 1) {
                    chgue_kernel_data(&ChgueParams::new(*alpha, a.clone())?)
                } else {
                    confluent_kernel(&ConfluentSpec::new(b, m)?, *alpha)
                }
            }
            SourceKind::HermitianWithSource { a, .. } => {
                let (ws, comp) = self.weight_system()?;
                let n = a.len();
                let eta = (0..n).map(|i| real_fn(move |x: f64| x.powi(i as i32))).collect();
                let spec =
                    EnsembleSpec::new(Interval::RealLine, eta, xi_family(&ws, &comp), ws.quad().clone())?;
                build_kernel(&spec)
            }
        }
    }

    /// The closed-form kernel for distinct chiral sources, else the generic kernel.
    pub fn reference_kernel(&self) -> Result<ReferenceKernel> {
        if let SourceKind::ChiralWithSource { alpha, a } = &self.kind {
            if let Ok(p) = ChgueParams::new(*alpha, a.clone()) {
                if p.require_distinct().is_ok() {
                    return Ok(ReferenceKernel::Chgue(chgue_kernel(&p)?));
                }
            }
        }
        Ok(ReferenceKernel::Generic(self.reference_ensemble()?))
    }
}

/// Kernel used as the reference curve of density checks.
#[derive(Debug, Clone)]
pub enum ReferenceKernel {
    Chgue(ChgueKernel),
    Generic(KernelData),
}

impl ReferenceKernel {
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        match self {
            ReferenceKernel::Chgue(k) => k.eval(x, y),
            ReferenceKernel::Generic(k) => Ok(k.kernel_eval(x, y)),
        }
    }
}

/// Draws one spectrum: eigenvalues of `A/2 + H` (Hermitian) or of `X^†X` with
/// `X = A/2 + G` (chiral), ascending.
pub fn sample_matrix<R: Rng + ?Sized>(m: &SourceModel, rng: &mut R) -> Result<Vec<f64>> {
    m.check_sampleable()?;
    Ok(draw(m, rng))
}

/// The spectrum used as sample `index` by every Monte Carlo routine seeded with `seed`.
pub fn sample_indexed(m: &SourceModel, seed: u64, index: u64) -> Result<Vec<f64>> {
    sample_matrix(m, &mut sample_rng(seed, index))
}

fn normal<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sd * z
}

fn draw<R: Rng + ?Sized>(m: &SourceModel, rng: &mut R) -> Vec<f64> {
    let n = m.n();
    let herm = match &m.kind {
        SourceKind::HermitianWithSource { a, .. } => {
            let mut h = DMatrix::<Complex64>::zeros(n, n);
            let sd_diag = 0.5f64.sqrt();
            for i in 0..n {
                h[(i, i)] = Complex64::new(0.5 * a[i] + normal(rng, sd_diag), 0.0);
                for j in i + 1..n {
                    let v = Complex64::new(normal(rng, 0.5), normal(rng, 0.5));
                    h[(i, j)] = v;
                    h[(j, i)] = v.conj();
                }
            }
            h
        }
        SourceKind::ChiralWithSource { alpha, a } => {
            let rows = n + *alpha as usize;
            let sd = 0.5f64.sqrt();
            let mut x = DMatrix::<Complex64>::zeros(rows, n);
            for r in 0..rows {
                for c in 0..n {
                    x[(r, c)] = Complex64::new(normal(rng, sd), normal(rng, sd));
                }
            }
            for i in 0..n {
                x[(i, i)] += a[i].sqrt();
            }
            x.adjoint() * x
        }
    };
    let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
    if matches!(m.kind, SourceKind::ChiralWithSource { .. }) {
        for v in ev.iter_mut() {
            *v = v.max(0.0);
        }
    }
    ev.sort_by(f64::total_cmp);
    ev
}

/// Monte Carlo settings. `workers = 0` uses all available threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        McConfig { samples, seed, workers: 0 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Estimate of an average.
#[derive(Debug, Clone, PartialEq)]
pub struct AvgEstimate {
    pub value: Complex64,
    /// Sample standard deviation over `sqrt(samples)`; zero for quadrature values.
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
    pub warning: Option<String>,
}

impl AvgEstimate {
    fn exact(value: Complex64) -> Self {
        AvgEstimate { value, std_error: 0.0, samples: 0, seed: 0, warning: None }
    }

    pub fn re(&self) -> f64 {
        self.value.re
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(a: Welford, b: Welford) -> Welford {
        if a.n == 0 {
            return b;
        }
        if b.n == 0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        Welford {
            n,
            mean: a.mean + d * (b.n as f64 / n as f64),
            m2: a.m2 + b.m2 + d * d * (a.n as f64 * b.n as f64 / n as f64),
        }
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

fn merge_tree(blocks: &[Vec<Welford>]) -> Vec<Welford> {
    match blocks.len() {
        0 => Vec::new(),
        1 => blocks[0].clone(),
        len => {
            let (l, r) = blocks.split_at(len / 2);
            merge_tree(l).into_iter().zip(merge_tree(r)).map(|(a, b)| Welford::merge(a, b)).collect()
        }
    }
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `observe(spectrum, out)` over `cfg.samples` draws, accumulating `dims`
/// real observables. Results depend only on `(seed, samples)`.
fn monte_carlo<F>(m: &SourceModel, cfg: &McConfig, dims: usize, observe: F) -> Result<Vec<Welford>>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    m.check_sampleable()?;
    if cfg.samples == 0 {
        return Err(Error::domain("Monte Carlo needs at least one sample"));
    }
    let blocks = cfg.samples.div_ceil(BLOCK);
    let run_block = |b: u64| {
        let mut acc = vec![Welford::default(); dims];
        let mut out = vec![0.0; dims];
        for i in b * BLOCK..((b + 1) * BLOCK).min(cfg.samples) {
            let ev = draw(m, &mut sample_rng(cfg.seed, i));
            observe(&ev, &mut out);
            for (a, &v) in acc.iter_mut().zip(&out) {
                a.push(v);
            }
        }
        acc
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    let per_block: Vec<Vec<Welford>> = pool.install(|| (0..blocks).into_par_iter().map(run_block).collect());
    Ok(merge_tree(&per_block))
}

fn estimate(re: Welford, im: Option<Welford>, cfg: &McConfig) -> AvgEstimate {
    let (value, se) = match im {
        Some(im) => (Complex64::new(re.mean, im.mean), re.std_error().hypot(im.std_error())),
        None => (Complex64::new(re.mean, 0.0), re.std_error()),
    };
    AvgEstimate { value, std_error: se, samples: cfg.samples, seed: cfg.seed, warning: None }
}

/// `<det(x - X)>` at each point of `xs`.
pub fn avg_charpoly_at(m: &SourceModel, xs: &[f64], cfg: &McConfig) -> Result<Vec<AvgEstimate>> {
    let acc = monte_carlo(m, cfg, xs.len(), |ev, out| {
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = ev.iter().map(|l| x - l).product();
        }
    })?;
    Ok(acc.into_iter().map(|w| estimate(w, None, cfg)).collect())
}

/// `<det(x - X)>`.
pub fn avg_charpoly(m: &SourceModel, x: f64, cfg: &McConfig) -> Result<AvgEstimate> {
    Ok(avg_charpoly_at(m, &[x], cfg)?.remove(0))
}

fn require_off_axis(z: Complex64) -> Result<()> {
    if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
        return Err(Error::domain(format!("z = {z} must lie off the real axis")));
    }
    Ok(())
}

/// `<det(z - X)^{-1}>`.
pub fn avg_inv_charpoly(m: &SourceModel, z: Complex64, cfg: &McConfig) -> Result<AvgEstimate> {
    require_off_axis(z)?;
    let acc = monte_carlo(m, cfg, 2, |ev, out| {
        let v = ev.iter().fold(Complex64::new(1.0, 0.0), |p, &l| p / (z - l));
        out[0] = v.re;
        out[1] = v.im;
    })?;
    Ok(estimate(acc[0], Some(acc[1]), cfg))
}

/// `<det(x - X) / det(z - X)>`.
pub fn avg_ratio(m: &SourceModel, x: f64, z: Complex64, cfg: &McConfig) -> Result<AvgEstimate> {
    require_off_axis(z)?;
    let acc = monte_carlo(m, cfg, 2, |ev, out| {
        let v = ev.iter().fold(Complex64::new(1.0, 0.0), |p, &l| p * (x - l) / (z - l));
        out[0] = v.re;
        out[1] = v.im;
    })?;
    Ok(estimate(acc[0], Some(acc[1]), cfg))
}

/// `ε` schedule and the error orders removed by extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueSchedule {
    pub eps: Vec<f64>,
    pub orders: Vec<u32>,
}

impl Default for ResidueSchedule {
    fn default() -> Self {
        ResidueSchedule { eps: DEFAULT_SCHEDULE.to_vec(), orders: DEFAULT_ORDERS.to_vec() }
    }
}

impl ResidueSchedule {
    pub fn new(eps: Vec<f64>, orders: Vec<u32>) -> Result<Self> {
        if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::domain("the ε schedule needs positive entries"));
        }
        if orders.len() + 1 > eps.len() {
            return Err(Error::domain(format!(
                "removing {} error orders needs at least {} ε values",
                orders.len(),
                orders.len() + 1
            )));
        }
        if orders.contains(&0) {
            return Err(Error::domain("error orders must be positive"));
        }
        Ok(ResidueSchedule { eps, orders })
    }

    /// Weights `c` with `sum c_k = 1` and `sum c_k ε_k^p = 0` for each removed order,
    /// applied to the last `orders.len() + 1` schedule entries.
    pub fn richardson_weights(&self) -> Result<Vec<f64>> {
        let k = self.orders.len() + 1;
        let skip = self.eps.len() - k;
        let eps = &self.eps[skip..];
        let scale = eps.iter().cloned().fold(0.0, f64::max);
        let mut rows = vec![vec![1.0; k]];
        for &p in &self.orders {
            rows.push(eps.iter().map(|e| (e / scale).powi(p as i32)).collect());
        }
        let mut rhs = Matrix::zeros(k, 1);
        rhs[(0, 0)] = 1.0;
        let c = Matrix::from_rows(&rows).solve(&rhs).map_err(|e| e.in_context("Richardson system"))?;
        let mut out = vec![0.0; skip];
        out.extend((0..k).map(|i| c[(i, 0)]));
        Ok(out)
    }
}

/// Result of an `ε -> 0` extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Residue {
    pub value: f64,
    /// `(1/π) Im F(x - iε)` on the schedule.
    pub values: Vec<f64>,
    pub warning: Option<String>,
}

fn convergence_warning(values: &[f64]) -> Option<String> {
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let d: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let tiny = |v: f64| v.abs() <= 1e-12 * scale;
    for w in d.windows(2) {
        if tiny(w[0]) && tiny(w[1]) {
            continue;
        }
        if w[0].signum() != w[1].signum() || w[1].abs() >= w[0].abs() {
            return Some(format!("non-monotone convergence over the ε schedule: {values:?}"));
        }
    }
    None
}

/// `Res_{z=x} F = lim_{ε->0} (1/π) Im F(x - iε)`, Richardson-extrapolated.
pub fn residue_extract(
    f: &dyn Fn(Complex64) -> Result<Complex64>,
    x: f64,
    schedule: &ResidueSchedule,
) -> Result<Residue> {
    let c = schedule.richardson_weights()?;
    let values = schedule
        .eps
        .iter()
        .map(|&e| Ok(f(Complex64::new(x, -e))?.im / std::f64::consts::PI))
        .collect::<Result<Vec<f64>>>()?;
    let value = c.iter().zip(&values).map(|(c, v)| c * v).sum();
    let warning = convergence_warning(&values);
    if let Some(w) = &warning {
        warn!("{w}");
    }
    Ok(Residue { value, values, warning })
}

/// Residue of `<det(z - X)^{-1}>` at each `x`, extrapolated sample by sample.
pub fn residue_avg_inv_charpoly(
    m: &SourceModel,
    xs: &[f64],
    schedule: &ResidueSchedule,
    cfg: &McConfig,
) -> Result<Vec<AvgEstimate>> {
    residue_mc(m, xs, schedule, cfg, |_, _| 1.0)
}

fn residue_mc(
    m: &SourceModel,
    ys: &[f64],
    schedule: &ResidueSchedule,
    cfg: &McConfig,
    numerator: impl Fn(usize, &[f64]) -> f64 + Sync,
) -> Result<Vec<AvgEstimate>> {
    let c = schedule.richardson_weights()?;
    let eps = &schedule.eps;
    let acc = monte_carlo(m, cfg, ys.len(), |ev, out| {
        for (k, (o, &y)) in out.iter_mut().zip(ys).enumerate() {
            let num = numerator(k, ev);
            let mut v = 0.0;
            for (ck, &e) in c.iter().zip(eps) {
                let z = Complex64::new(y, -e);
                let inv = ev.iter().fold(Complex64::new(1.0, 0.0), |p, &l| p / (z - l));
                v += ck * inv.im;
            }
            *o = num * v / std::f64::consts::PI;
        }
    })?;
    Ok(acc.into_iter().map(|w| estimate(w, None, cfg)).collect())
}

/// How `kernel_from_ratio` averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioMode {
    MonteCarlo,
    QuadratureOracle,
}

/// `K_N(x, y) = Res_{z=y} <det(x - X)/det(z - X)> / (x - y)`.
pub fn kernel_from_ratio(
    m: &SourceModel,
    x: f64,
    y: f64,
    mode: RatioMode,
    schedule: &ResidueSchedule,
    cfg: &McConfig,
) -> Result<AvgEstimate> {
    if (x - y).abs() < 1e-6 {
        return Err(Error::domain("kernel_from_ratio needs |x - y| >= 1e-6"));
    }
    match mode {
        RatioMode::QuadratureOracle => {
            let oracle = QuadratureOracle::new(m)?;
            let f = |z: Complex64| oracle.ratio(x, z);
            let r = residue_extract(&f, y, schedule)?;
            let mut est = AvgEstimate::exact(Complex64::new(r.value / (x - y), 0.0));
            est.warning = r.warning;
            Ok(est)
        }
        RatioMode::MonteCarlo => {
            let mut est =
                residue_mc(m, &[y], schedule, cfg, |_, ev| ev.iter().map(|l| x - l).product())?.remove(0);
            est.value /= x - y;
            est.std_error /= (x - y).abs();
            Ok(est)
        }
    }
}

/// Per-bin density check against `K_N(x, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rho1Check {
    pub edges: Vec<f64>,
    /// Eigenvalue density per bin, total mass `N` over the whole line.
    pub empirical: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Bin average of `K_N(x, x)`.
    pub reference: Vec<f64>,
    pub z_scores: Vec<f64>,
}

impl Rho1Check {
    pub fn fraction_within(&self, sigmas: f64) -> f64 {
        let ok = self.z_scores.iter().filter(|z| z.abs() <= sigmas).count();
        ok as f64 / self.z_scores.len() as f64
    }
}

/// Histogram of all eigenvalues on `bins` equal cells of `[lo, hi]`.
///
/// Bins without any sample take their error bar from the reference count.
pub fn rho1_check(m: &SourceModel, bins: usize, lo: f64, hi: f64, cfg: &McConfig) -> Result<Rho1Check> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::domain("rho1_check needs bins >= 1 and lo < hi"));
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let acc = monte_carlo(m, cfg, bins, |ev, out| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &l in ev {
            if l >= lo && l < hi {
                let k = (((l - lo) / width) as usize).min(bins - 1);
                out[k] += 1.0;
            }
        }
    })?;
    let kernel = m.reference_kernel()?;
    let mut reference = Vec::with_capacity(bins);
    for k in 0..bins {
        let rule = gauss_legendre(8, edges[k], edges[k + 1])?;
        let mut total = 0.0;
        for (&t, &w) in rule.nodes().iter().zip(rule.weights()) {
            total += w * kernel.eval(t, t)?;
        }
        reference.push(total / width);
    }
    let empirical: Vec<f64> = acc.iter().map(|w| w.mean / width).collect();
    let std_error: Vec<f64> =
        acc.iter()
            .zip(&reference)
            .map(|(w, r)| {
                if w.m2 > 0.0 {
                    w.std_error() / width
                } else {
                    (r * width / cfg.samples as f64).sqrt() / width
                }
            })
            .collect();
    let z_scores = empirical
        .iter()
        .zip(&reference)
        .zip(&std_error)
        .map(|((e, r), s)| {
            if *s > 0.0 {
                (e - r) / s
            } else if e == r {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(Rho1Check { edges, empirical, std_error, reference, z_scores })
}

/// Exact averages by tensor quadrature against the joint eigenvalue density, `N <= 3`.
pub struct QuadratureOracle {
    n: usize,
    interval: Interval,
    xi: Vec<crate::numerics::RealFn>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `table[i][k] = xi_i(node_k)`
    table: Vec<Vec<f64>>,
    z: f64,
}

pub const ORACLE_MAX_N: usize = 3;

fn small_det(m: &[f64], n: usize) -> f64 {
    match n {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => Matrix::from_fn(n, n, |i, j| m[i * n + j]).det(),
    }
}

fn vandermonde_of(x: &[f64]) -> f64 {
    let mut v = 1.0;
    for j in 0..x.len() {
        for i in 0..j {
            v *= x[j] - x[i];
        }
    }
    v
}

impl QuadratureOracle {
    pub fn new(m: &SourceModel) -> Result<Self> {
        let n = m.n();
        if n > ORACLE_MAX_N {
            return Err(Error::Capacity(format!(
                "the quadrature oracle handles N <= {ORACLE_MAX_N}, got {n}"
            )));
        }
        let kernel = m.reference_ensemble()?;
        let rule: QuadratureRule = match &m.kind {
            SourceKind::ChiralWithSource { alpha, .. } => gauss_laguerre(ORACLE_POINTS, *alpha)?,
            SourceKind::HermitianWithSource { .. } => gauss_hermite(ORACLE_POINTS)?,
        };
        let xi = kernel.spec().xi().to_vec();
        let nodes = rule.nodes().to_vec();
        let table = xi.iter().map(|f| nodes.iter().map(|&t| f(t)).collect()).collect();
        let (sign, log) = kernel.z_log();
        Ok(QuadratureOracle {
            n,
            interval: m.interval(),
            xi,
            nodes,
            weights: rule.plain_weights().to_vec(),
            table,
            z: sign * log.exp(),
        })
    }

    /// Sum over a tensor grid of `dims` free coordinates, with `fixed` prepended.
    fn tensor(&self, fixed: Option<f64>, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        let n = self.n;
        let lead = usize::from(fixed.is_some());
        let dims = n - lead;
        let q = self.nodes.len();
        let head: Vec<f64> = fixed.map(|t| self.xi.iter().map(|g| g(t)).collect()).unwrap_or_default();
        let mut idx = vec![0usize; dims];
        let mut lam = vec![fixed.unwrap_or(0.0); n];
        let mut mat = vec![0.0; n * n];
        let mut total = 0.0;
        loop {
            let mut w = 1.0;
            for (d, &k) in idx.iter().enumerate() {
                lam[lead + d] = self.nodes[k];
                w *= self.weights[k];
            }
            for i in 0..n {
                if lead == 1 {
                    mat[i * n] = head[i];
                }
                for (d, &k) in idx.iter().enumerate() {
                    mat[i * n + lead + d] = self.table[i][k];
                }
            }
            let vdm = vandermonde_of(&lam[lead..]);
            total += w * vdm * small_det(&mat, n) * f(&lam);
            // odometer, last coordinate fastest
            let mut d = dims;
            loop {
                if d == 0 {
                    return total;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < q {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    /// `∫ p(λ) f(λ) dλ` where `p` is the joint density.
    pub fn average(&self, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        let t = self.tensor(None, &|lam: &[f64]| f(lam));
        t / self.z
    }

    /// `g(t) = ∫ p(t, λ_2..) f(t, λ_2..) / prod_{j>=2} (t - λ_j) dλ_2..`, so that
    /// `<f / det(z - X)> = N ∫ g(t) / (z - t) dt`.
    fn reduced(&self, t: f64, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        let sign = if self.n % 2 == 1 { 1.0 } else { -1.0 };
        sign * self.tensor(Some(t), f) / self.z
    }

    fn stieltjes(&self, z: Complex64, f: &dyn Fn(&[f64]) -> f64) -> Result<Complex64> {
        require_off_axis(z)?;
        let g = |t: f64| self.reduced(t, f);
        Ok(cauchy_transform(&g, self.interval, z)? * self.n as f64)
    }

    /// `<det(x - X)>`.
    pub fn charpoly(&self, x: f64) -> f64 {
        self.average(&|lam: &[f64]| lam.iter().map(|l| x - l).product())
    }

    /// `<det(z - X)^{-1}>`.
    pub fn inv_charpoly(&self, z: Complex64) -> Result<Complex64> {
        self.stieltjes(z, &|_: &[f64]| 1.0)
    }

    /// `<det(x - X) / det(z - X)>`.
    pub fn ratio(&self, x: f64, z: Complex64) -> Result<Complex64> {
        self.stieltjes(z, &|lam: &[f64]| lam.iter().map(|l| x - l).product())
    }

    /// Total mass of the joint density.
    pub fn mass(&self) -> f64 {
        self.average(&|_: &[f64]| 1.0)
    }
}
