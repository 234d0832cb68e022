use biortho_core::charpoly::{avg_charpoly_at, rho1_check, McConfig};
use biortho_core::chgue::{chgue_gram, chgue_spec, chgue_type_two, kernel_sum_check, rank_decomposition};
use biortho_core::ensemble::oracle;
use biortho_core::multiple::{biortho_sequence, check_ortho_one, check_ortho_two, type_one, type_two};
use biortho_core::{ChgueParams, KernelData, Matrix, SourceModel};

use crate::config::{EnsembleKind, RunConfig, Suite};
use crate::model::{chiral_parts, source_model, sources};
use crate::output::{Outcome, Table};
use crate::CliError;

pub const DEFAULT_MC_SAMPLES: u64 = 20_000;
const DETERMINISM_SAMPLES: u64 = 4096;
const RHO1_BINS: usize = 40;
const RANK_DEFAULT_SOURCES: [f64; 3] = [1.1, 0.3, 0.0];

struct Report {
    table: Table,
    failures: Vec<String>,
}

impl Report {
    fn new() -> Self {
        Report { table: Table::new(&["check", "residual", "tolerance", "status"]), failures: Vec::new() }
    }

    fn check(&mut self, name: &str, residual: f64, tol: f64) {
        let pass = residual <= tol;
        let status = if pass { "PASS" } else { "FAIL" };
        eprintln!("{status} {name}: residual {residual:.3e} (tolerance {tol:.1e})");
        self.table.push(vec![name.into(), residual.into(), tol.into(), status.into()]);
        if !pass {
            self.failures.push(format!("{name} residual {residual:.3e} > {tol:.1e}"));
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let suite = cfg.suite.ok_or_else(|| CliError::Usage("verify needs --suite".into()))?;
    let mut r = Report::new();
    match suite {
        Suite::Gram => gram(cfg, &mut r)?,
        Suite::Kernel => kernel(cfg, &mut r)?,
        Suite::Ortho => ortho(cfg, &mut r)?,
        Suite::Corollary => corollary(cfg, &mut r)?,
        Suite::Rankdecomp => rankdecomp(cfg, &mut r)?,
        Suite::Mc => mc(cfg, &mut r)?,
    }
    let summary = if r.failures.is_empty() { "PASS" } else { "FAIL" };
    eprintln!("{summary}: suite {suite:?}, {} checks", r.table.rows.len());
    r.table.metadata.insert("suite".into(), serde_json::json!(suite));
    r.table.metadata.insert("result".into(), serde_json::json!(summary));
    Ok(Outcome { table: r.table, failures: r.failures })
}

fn max_abs(m: &Matrix) -> f64 {
    (0..m.rows()).flat_map(|i| m.row(i).iter().copied()).fold(0.0, |a, v| a.max(v.abs()))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Grid pairs used by pointwise kernel checks: all pairs for small grids,
/// otherwise the diagonal and the anti-diagonal.
fn grid_pairs(cfg: &RunConfig) -> Vec<(f64, f64)> {
    let xs = cfg.grid.points();
    if xs.len() <= 8 {
        xs.iter().flat_map(|&x| xs.iter().map(move |&y| (x, y))).collect()
    } else {
        xs.iter().zip(xs.iter().rev()).map(|(&x, &y)| (x, y)).chain(xs.iter().map(|&x| (x, x))).collect()
    }
}

fn chiral_params(m: &SourceModel, suite: &str) -> Result<ChgueParams, CliError> {
    let (alpha, a) =
        chiral_parts(m).ok_or_else(|| CliError::Usage(format!("suite {suite} needs a chiral ensemble")))?;
    Ok(ChgueParams::new(alpha, a.to_vec())?)
}

fn gram(cfg: &RunConfig, r: &mut Report) -> Result<(), CliError> {
    let m = source_model(cfg)?;
    let tol = cfg.tol("gram");
    if let Some((alpha, a)) = chiral_parts(&m) {
        let p = ChgueParams::new(alpha, a.to_vec())?;
        if p.require_distinct().is_ok() {
            let closed = chgue_gram(&p);
            let quad = chgue_spec(&p)?.gram();
            r.check("gram_closed_vs_quadrature", closed.max_abs_diff(&quad) / max_abs(&closed), tol);
        }
    }
    let kd = m.reference_ensemble()?;
    let n = kd.n();
    let prod = kd.gram().matmul(&kd.coeffs().transpose());
    r.check("gram_times_coefficients_identity", prod.max_abs_diff(&Matrix::identity(n)), tol);
    let z = kd.z_n();
    let direct = factorial(n) * kd.gram().det();
    r.check("partition_function", (z - direct).abs() / direct.abs(), tol);
    Ok(())
}

fn kernel(cfg: &RunConfig, r: &mut Report) -> Result<(), CliError> {
    let m = source_model(cfg)?;
    let kd = m.reference_ensemble()?;
    let n = kd.n() as f64;
    r.check("trace_equals_n", (oracle::trace(&kd) - n).abs() / n, cfg.tol("trace"));
    let pairs = grid_pairs(cfg);
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &(x, y) in &pairs {
        let k = kd.kernel_eval(x, y);
        diff = diff.max((oracle::reproduce(&kd, x, y) - k).abs());
        scale = scale.max(k.abs());
    }
    r.check("reproducing_property", diff / scale, cfg.tol("kernel"));
    let reference = m.reference_kernel()?;
    if let biortho_core::charpoly::ReferenceKernel::Chgue(closed) = &reference {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for &(x, y) in &pairs {
            let k = kd.kernel_eval(x, y);
            diff = diff.max((closed.eval(x, y)? - k).abs());
            scale = scale.max(k.abs());
        }
        r.check("closed_form_vs_gram_inverse", diff / scale, cfg.tol("kernel"));
    }
    Ok(())
}

fn ortho(cfg: &RunConfig, r: &mut Report) -> Result<(), CliError> {
    let m = source_model(cfg)?;
    let (ws, comp) = m.weight_system()?;
    let tol = cfg.tol("ortho");
    let q = type_one(&ws, &comp)?;
    let moments = check_ortho_one(&q);
    let (last, lower) = moments.split_last().expect("N >= 1");
    r.check("type_one_lower_moments", lower.iter().fold(0.0, |a, v| a.max(v.abs())), tol);
    r.check("type_one_final_moment", (last - 1.0).abs(), tol);
    let p = type_two(&ws, &comp)?;
    r.check(
        "type_two_orthogonality",
        check_ortho_two(&p, &ws, &comp).iter().fold(0.0, |a, v| a.max(v.abs())),
        tol,
    );
    let (ps, qs) = biortho_sequence(&ws, &comp, None)?;
    let mut worst: f64 = 0.0;
    for (i, pi) in ps.iter().enumerate() {
        for (j, qj) in qs.iter().enumerate() {
            let v = ws.quad().integrate_plain(|x| pi.eval(x) * qj.eval(x));
            worst = worst.max((v - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    r.check("biorthogonality", worst, cfg.tol("biortho"));
    Ok(())
}

fn corollary(cfg: &RunConfig, r: &mut Report) -> Result<(), CliError> {
    let m = source_model(cfg)?;
    let p = chiral_params(&m, "corollary")?;
    p.require_distinct()?;
    let mut a = p.a().to_vec();
    a.sort_by(|x, y| y.total_cmp(x));
    let p = ChgueParams::new(p.alpha(), a)?;
    let mut diff: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (x, y) in grid_pairs(cfg) {
        let (k, s) = kernel_sum_check(&p, x, y)?;
        diff = diff.max((k - s).abs());
        scale = scale.max(k.abs());
    }
    r.check("kernel_equals_staircase_sum", diff / scale, cfg.tol("corollary"));
    Ok(())
}

fn rankdecomp(cfg: &RunConfig, r: &mut Report) -> Result<(), CliError> {
    if cfg.ensemble == EnsembleKind::Hermite {
        return Err(CliError::Usage("suite rankdecomp needs a chiral ensemble".into()));
    }
    let (alpha, mut a) = if cfg.a.is_none() && cfg.b.is_none() && cfg.n.is_none() {
        (cfg.alpha, RANK_DEFAULT_SOURCES.to_vec())
    } else {
        let m = source_model(cfg)?;
        let p = chiral_params(&m, "rankdecomp")?;
        (p.alpha(), sources(cfg)?)
    };
    a.sort_by(|x, y| y.total_cmp(x));
    let rank = a.iter().filter(|&&v| v != 0.0).count();
    if rank == 0 || rank >= a.len() {
        return Err(CliError::Usage(format!(
            "rankdecomp needs 1 <= (number of nonzero sources) < N, got {rank} of {}",
            a.len()
        )));
    }
    let p = ChgueParams::new(alpha, a.clone())?;
    let reference: KernelData = SourceModel::chiral(alpha, a)?.reference_ensemble()?;
    let tol = cfg.tol("rankdecomp");
    let mut split: f64 = 0.0;
    let mut gap: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (x, y) in grid_pairs(cfg) {
        let d = rank_decomposition(&p, rank, x, y)?;
        split = split.max((d.full - d.unperturbed - d.correction).abs());
        gap = gap.max((d.full - reference.kernel_eval(x, y)).abs());
        scale = scale.max(d.full.abs());
    }
    r.check("full_equals_unperturbed_plus_correction", split / scale, tol);
    r.check("full_vs_confluent_kernel", gap / scale, tol);
    Ok(())
}

/// `[lo, hi]` holding the bulk of the one-point density, from a scan of `K(x, x)`.
fn density_range(m: &SourceModel) -> Result<(f64, f64), CliError> {
    let k = m.reference_kernel()?;
    let n = m.n() as f64;
    let (alpha, a, chiral) = match chiral_parts(m) {
        Some((alpha, a)) => (alpha, a.to_vec(), true),
        None => (0.0, sources_of(m), false),
    };
    let amax = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let (lo, hi) = if chiral {
        (0.0, 4.0 * n + 2.0 * alpha + 2.0 * amax + 12.0)
    } else {
        let half = 2.0 * n.sqrt() + amax + 6.0;
        (-half, half)
    };
    let steps = 600;
    let xs: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let mut rho = Vec::with_capacity(xs.len());
    for &x in &xs {
        rho.push(k.eval(x, x)?);
    }
    let peak = rho.iter().fold(0.0f64, |s, v| s.max(*v));
    let cut = 1e-4 * peak;
    let first = rho.iter().position(|&v| v > cut).unwrap_or(0);
    let last = rho.iter().rposition(|&v| v > cut).unwrap_or(steps);
    let margin = 0.05 * (xs[last] - xs[first]);
    let lo_out = if chiral { 0.0 } else { xs[first] - margin };
    Ok((lo_out, xs[last] + margin))
}

fn sources_of(m: &SourceModel) -> Vec<f64> {
    match m.kind() {
        biortho_core::SourceKind::HermitianWithSource { a, .. } => a.clone(),
        biortho_core::SourceKind::ChiralWithSource { a, .. } => a.clone(),
    }
}

fn mc(cfg: &RunConfig, r: &mut Report) -> Result<(), CliError> {
    let m = source_model(cfg)?;
    m.check_sampleable()?;
    let samples = cfg.samples.unwrap_or(DEFAULT_MC_SAMPLES);
    let mc_cfg = McConfig::new(samples, cfg.seed).with_workers(cfg.workers);
    let sigma = cfg.tol("mc_sigma");

    let (lo, hi) = density_range(&m)?;
    let check = rho1_check(&m, RHO1_BINS, lo, hi, &mc_cfg)?;
    let within = check.fraction_within(sigma);
    r.check(&format!("rho1_bins_outside_{sigma}sigma"), 1.0 - within, 1.0 - cfg.tol("mc_fraction"));

    let xs = cfg.grid.points();
    let est = avg_charpoly_at(&m, &xs, &mc_cfg)?;
    let exact: Vec<f64> = match chiral_parts(&m) {
        Some((alpha, a)) => {
            let p = chgue_type_two(&ChgueParams::new(alpha, a.to_vec())?)?;
            xs.iter().map(|&x| p.eval(x)).collect::<Result<_, _>>()?
        }
        None => {
            let (ws, comp) = m.weight_system()?;
            let p = type_two(&ws, &comp)?;
            xs.iter().map(|&x| p.eval(x)).collect()
        }
    };
    let mut worst: f64 = 0.0;
    for (e, p) in est.iter().zip(&exact) {
        if let Some(w) = &e.warning {
            log::warn!("{w}");
        }
        let d = (e.re() - p).abs();
        worst = worst.max(if e.std_error > 0.0 { d / e.std_error } else { d / f64::EPSILON });
    }
    r.check("charpoly_average_vs_type_two_sigmas", worst, sigma);

    let small = McConfig::new(samples.min(DETERMINISM_SAMPLES), cfg.seed);
    let one = rho1_check(&m, RHO1_BINS, lo, hi, &small.with_workers(1))?;
    let many = rho1_check(&m, RHO1_BINS, lo, hi, &small.with_workers(cfg.workers.max(4)))?;
    let mismatched = one
        .empirical
        .iter()
        .zip(&many.empirical)
        .chain(one.std_error.iter().zip(&many.std_error))
        .filter(|(x, y)| x.to_bits() != y.to_bits())
        .count();
    r.check("worker_count_determinism_mismatches", mismatched as f64, 0.0);
    Ok(())
}
