use biortho_core::{ConfluentSpec, SourceKind, SourceModel};

use crate::config::{EnsembleKind, RunConfig};
use crate::CliError;

pub const DEFAULT_SOURCES: [f64; 2] = [0.3, 1.1];
pub const DEFAULT_N: usize = 2;

/// The source vector described by `--a`, `--b/--mult` or `--n`.
pub fn sources(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    if cfg.a.is_some() && cfg.b.is_some() {
        return Err(CliError::Usage("give either --a or --b/--mult, not both".into()));
    }
    if cfg.mult.is_some() && cfg.b.is_none() {
        return Err(CliError::Usage("--mult needs --b".into()));
    }
    if let Some(b) = &cfg.b {
        let mult = cfg.mult.clone().unwrap_or_else(|| vec![1; b.len()]);
        let a = if cfg.ensemble == EnsembleKind::Hermite {
            expand_real(b, &mult)?
        } else {
            ConfluentSpec::new(b.clone(), mult)?.expanded()
        };
        if let Some(n) = cfg.n {
            if n != a.len() {
                return Err(CliError::Usage(format!("multiplicities sum to {} but --n is {n}", a.len())));
            }
        }
        return Ok(a);
    }
    match (&cfg.a, cfg.ensemble) {
        (Some(_), EnsembleKind::Laguerre) => {
            Err(CliError::Usage("the laguerre ensemble takes --n, not --a".into()))
        }
        (Some(a), _) => Ok(a.clone()),
        (None, EnsembleKind::Chgue) if cfg.n.is_none() => Ok(DEFAULT_SOURCES.to_vec()),
        (None, _) => Ok(vec![0.0; cfg.n.unwrap_or(DEFAULT_N)]),
    }
}

/// `b^m` for sources on the whole real line.
fn expand_real(b: &[f64], mult: &[usize]) -> Result<Vec<f64>, CliError> {
    if b.len() != mult.len() || mult.contains(&0) {
        return Err(CliError::Usage("--mult needs one entry >= 1 per --b value".into()));
    }
    for (i, x) in b.iter().enumerate() {
        if !x.is_finite() || b[..i].contains(x) {
            return Err(CliError::Usage("--b values must be finite and distinct".into()));
        }
    }
    Ok(b.iter().zip(mult).flat_map(|(&v, &k)| std::iter::repeat_n(v, k)).collect())
}

pub fn source_model(cfg: &RunConfig) -> Result<SourceModel, CliError> {
    let a = sources(cfg)?;
    if a.is_empty() {
        return Err(CliError::Usage("at least one particle is needed".into()));
    }
    Ok(match cfg.ensemble {
        EnsembleKind::Chgue | EnsembleKind::Laguerre => SourceModel::chiral(cfg.alpha, a)?,
        EnsembleKind::Hermite => SourceModel::hermitian(a)?,
    })
}

/// `(alpha, a)` of a chiral model.
pub fn chiral_parts(m: &SourceModel) -> Option<(f64, &[f64])> {
    match m.kind() {
        SourceKind::ChiralWithSource { alpha, a } => Some((*alpha, a)),
        SourceKind::HermitianWithSource { .. } => None,
    }
}
