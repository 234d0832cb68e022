use biortho_core::charpoly::{sample_indexed, ReferenceKernel};
use biortho_core::chgue::{chgue_kernel_data, chgue_type_one, chgue_type_two, laguerre_kernel};
use biortho_core::multiple::{biortho_sequence, check_ortho_one, type_one, type_two};
use biortho_core::numerics::gauss_laguerre;
use biortho_core::{ChgueParams, SourceModel};
use serde_json::json;

use crate::config::{PolyKind, RunConfig};
use crate::model::{chiral_parts, source_model};
use crate::output::{Cell, Outcome, Table};
use crate::CliError;

pub const DEFAULT_SAMPLES: u64 = 10;

type Eval = Box<dyn Fn(f64) -> Result<f64, CliError>>;

fn distinct_chiral(m: &SourceModel) -> Option<ChgueParams> {
    let (alpha, a) = chiral_parts(m)?;
    let p = ChgueParams::new(alpha, a.to_vec()).ok()?;
    p.require_distinct().ok().map(|_| p)
}

/// An evaluation of the kernel that shares no code path with `reference_kernel`.
fn second_route(m: &SourceModel) -> Result<Box<dyn Fn(f64, f64) -> f64>, CliError> {
    if let Some(p) = distinct_chiral(m) {
        let k = chgue_kernel_data(&p)?;
        return Ok(Box::new(move |x, y| k.kernel_eval(x, y)));
    }
    if let Some((alpha, a)) = chiral_parts(m) {
        if a.iter().all(|&v| v == 0.0) {
            let n = a.len();
            return Ok(Box::new(move |x, y| laguerre_kernel(n, alpha, x, y).unwrap_or(f64::NAN)));
        }
    }
    let (ws, comp) = m.weight_system()?;
    let (ps, qs) = biortho_sequence(&ws, &comp, None)?;
    Ok(Box::new(move |x, y| ps.iter().zip(&qs).map(|(p, q)| p.eval(x) * q.eval(y)).sum()))
}

fn route_name(m: &SourceModel) -> &'static str {
    if distinct_chiral(m).is_some() {
        "closed-form residue sum vs Gram-inverse kernel"
    } else if chiral_parts(m).is_some_and(|(_, a)| a.iter().all(|&v| v == 0.0)) {
        "confluent Gram-inverse kernel vs Laguerre Christoffel-Darboux kernel"
    } else {
        "Gram-inverse kernel vs sum of biorthogonal pairs"
    }
}

pub fn kernel(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = source_model(cfg)?;
    let k = m.reference_kernel()?;
    let xs = cfg.grid.points();
    let mut table = Table::new(&["x", "y", "kernel"]);
    let mut values = Vec::with_capacity(xs.len() * xs.len());
    for &x in &xs {
        for &y in &xs {
            let v = k.eval(x, y)?;
            if !v.is_finite() {
                return Err(CliError::Numeric(format!("kernel is not finite at ({x}, {y})")));
            }
            values.push(v);
            table.push(vec![x.into(), y.into(), v.into()]);
        }
    }
    table.metadata.insert(
        "route".into(),
        json!(match k {
            ReferenceKernel::Chgue(_) => "chgue closed form",
            ReferenceKernel::Generic(_) => "generic Gram inverse",
        }),
    );
    let mut failures = Vec::new();
    if cfg.cross_check {
        let other = second_route(&m)?;
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        let mut i = 0;
        for &x in &xs {
            for &y in &xs {
                diff = diff.max((values[i] - other(x, y)).abs());
                scale = scale.max(values[i].abs());
                i += 1;
            }
        }
        let dev = if scale > 0.0 { diff / scale } else { diff };
        let tol = cfg.tol("cross_check");
        eprintln!("cross-check ({}): max relative deviation {dev:.3e} (tolerance {tol:.1e})", route_name(&m));
        table.metadata.insert(
            "cross_check".into(),
            json!({ "routes": route_name(&m), "max_relative_deviation": dev, "tolerance": tol }),
        );
        if dev.is_nan() || dev > tol {
            failures.push(format!("cross-check deviation {dev:.3e} exceeds {tol:.1e}"));
        }
    }
    Ok(Outcome { table, failures })
}

pub fn poly(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = source_model(cfg)?;
    let xs = cfg.grid.points();
    let mut table = Table::new(&["x", "value"]);
    let mut failures = Vec::new();
    let eval: Eval = match (cfg.kind, chiral_parts(&m)) {
        (PolyKind::II, Some((alpha, a))) => {
            let p = chgue_type_two(&ChgueParams::new(alpha, a.to_vec())?)?;
            Box::new(move |x| Ok(p.eval(x)?))
        }
        (PolyKind::II, None) => {
            let (ws, comp) = m.weight_system()?;
            let p = type_two(&ws, &comp)?;
            Box::new(move |x| Ok(p.eval(x)))
        }
        (PolyKind::I, _) => {
            let n = m.n();
            let (moments, f): (Vec<f64>, Eval) = match distinct_chiral(&m) {
                Some(p) => {
                    let q = chgue_type_one(&p)?;
                    let rule = gauss_laguerre(2 * n + 64, p.alpha())?;
                    let moments = (0..n)
                        .map(|j| rule.integrate_plain(|x| x.powi(j as i32) * q.eval(x).unwrap_or(f64::NAN)))
                        .collect();
                    (moments, Box::new(move |x| Ok(q.eval(x)?)))
                }
                None => {
                    let (ws, comp) = m.weight_system()?;
                    let q = type_one(&ws, &comp)?;
                    (check_ortho_one(&q), Box::new(move |x| Ok(q.eval(x))))
                }
            };
            let (last, lower) = moments.split_last().expect("N >= 1");
            let lower_max = lower.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let tol = cfg.tol("ortho");
            eprintln!(
                "self-test: final moment ∫x^{}Q dx = {last:.15} (lower moments max |.| = {lower_max:.3e}, tolerance {tol:.1e})",
                n - 1
            );
            table.metadata.insert(
                "self_test".into(),
                json!({ "final_moment": last, "lower_moments_max_abs": lower_max, "tolerance": tol }),
            );
            if !((last - 1.0).abs() <= tol && lower_max <= tol) {
                failures
                    .push(format!("final moment {last} or lower moments {lower_max:.3e} out of tolerance"));
            }
            f
        }
    };
    for &x in &xs {
        let v = eval(x)?;
        if !v.is_finite() {
            return Err(CliError::Numeric(format!("value is not finite at x = {x}")));
        }
        table.push(vec![x.into(), v.into()]);
    }
    table.metadata.insert("kind".into(), json!(cfg.kind));
    Ok(Outcome { table, failures })
}

pub fn corr(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let points = cfg.points.clone().ok_or_else(|| CliError::Usage("corr needs --points".into()))?;
    let m = source_model(cfg)?;
    if points.len() > m.n() {
        return Err(CliError::Usage(format!("{} points for {} particles", points.len(), m.n())));
    }
    let kd = m.reference_ensemble()?;
    let rho = kd.correlation(&points)?;
    let mut cols: Vec<String> = (1..=points.len()).map(|i| format!("x{i}")).collect();
    cols.push("rho".into());
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new(&cols);
    let mut row: Vec<Cell> = points.iter().map(|&p| p.into()).collect();
    row.push(rho.into());
    table.push(row);
    Ok(Outcome { table, failures: Vec::new() })
}

pub fn sample(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let m = source_model(cfg)?;
    m.check_sampleable()?;
    let mut cols = vec!["sample".to_string()];
    cols.extend((1..=m.n()).map(|i| format!("lambda{i}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new(&cols);
    for s in 0..cfg.samples.unwrap_or(DEFAULT_SAMPLES) {
        let mut row: Vec<Cell> = vec![s.into()];
        row.extend(sample_indexed(&m, cfg.seed, s)?.into_iter().map(Cell::from));
        table.push(row);
    }
    Ok(Outcome { table, failures: Vec::new() })
}
