use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "biortho",
    version,
    about = "Kernels, multiple orthogonal polynomials and checks for biorthogonal ensembles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tabulate K_N(x, y) on grid x grid.
    Kernel(Flags),
    /// Tabulate a type I function or type II polynomial.
    Poly(Flags),
    /// Evaluate the n-point correlation function at --points.
    Corr(Flags),
    /// Draw eigenvalue samples.
    Sample(Flags),
    /// Run a verification suite.
    Verify(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel(_) => "kernel",
            Command::Poly(_) => "poly",
            Command::Corr(_) => "corr",
            Command::Sample(_) => "sample",
            Command::Verify(_) => "verify",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Kernel(f)
            | Command::Poly(f)
            | Command::Corr(f)
            | Command::Sample(f)
            | Command::Verify(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Chgue,
    Laguerre,
    Hermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum PolyKind {
    #[value(name = "I")]
    I,
    #[value(name = "II")]
    II,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Gram,
    Kernel,
    Ortho,
    Corollary,
    Rankdecomp,
    Mc,
}

#[derive(clap::Args, Debug, Clone, Default)]
pub struct Flags {
    /// JSON file with any of the options below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub ensemble: Option<EnsembleKind>,
    /// M - N for chiral ensembles, the Laguerre exponent otherwise.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Source parameters, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Distinct source values (confluent chGUE), comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Multiplicities matching --b.
    #[arg(long)]
    pub mult: Option<String>,
    /// Number of particles for ensembles without sources.
    #[arg(long)]
    pub n: Option<usize>,
    /// Inclusive linear grid `min:max:count`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Evaluation points for `corr`, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub points: Option<String>,
    #[arg(long, value_enum)]
    pub kind: Option<PolyKind>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo worker threads (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    /// Compare against an independent evaluation route.
    #[arg(long)]
    pub cross_check: bool,
    /// Tolerance override `KEY=VAL`; repeatable.
    #[arg(long = "tol-override")]
    pub tol_override: Vec<String>,
}

/// Options as read from a JSON config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub ensemble: Option<EnsembleKind>,
    pub alpha: Option<f64>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub mult: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub grid: Option<String>,
    pub points: Option<Vec<f64>>,
    pub kind: Option<PolyKind>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub suite: Option<Suite>,
    pub cross_check: Option<bool>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Usage(format!("grid must be min:max:count, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if count == 0 {
            return Err(CliError::Usage("grid count must be at least 1".into()));
        }
        if !min.is_finite() || !max.is_finite() || (count > 1 && max <= min) {
            return Err(CliError::Usage(format!("grid needs finite min < max, got {s:?}")));
        }
        Ok(Grid { min, max, count })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| if k + 1 == self.count { self.max } else { self.min + k as f64 * step })
            .collect()
    }
}

/// Default tolerances, keyed by the names accepted by `--tol-override`.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("gram", 1e-8),
        ("kernel", 1e-7),
        ("trace", 1e-6),
        ("ortho", 1e-8),
        ("biortho", 1e-8),
        ("corollary", 1e-6),
        ("rankdecomp", 1e-6),
        ("cross_check", 1e-7),
        ("mc_sigma", 3.0),
        ("mc_fraction", 0.95),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Fully resolved options, echoed into JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub ensemble: EnsembleKind,
    pub alpha: f64,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub mult: Option<Vec<usize>>,
    pub n: Option<usize>,
    pub grid: Grid,
    pub points: Option<Vec<f64>>,
    pub kind: PolyKind,
    pub samples: Option<u64>,
    pub seed: u64,
    pub workers: usize,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub suite: Option<Suite>,
    pub cross_check: bool,
    pub tolerances: BTreeMap<String, f64>,
}

pub fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    if s.trim().is_empty() {
        return Err(CliError::Usage(format!("--{what} must not be empty")));
    }
    s.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| CliError::Usage(format!("bad value {v:?} in --{what}"))))
        .collect()
}

fn list_flag<T: std::str::FromStr>(
    flag: &Option<String>,
    file: Option<Vec<T>>,
    what: &str,
) -> Result<Option<Vec<T>>, CliError> {
    match flag {
        Some(s) => parse_list(s, what).map(Some),
        None => match file {
            Some(v) if v.is_empty() => Err(CliError::Usage(format!("{what} must not be empty"))),
            other => Ok(other),
        },
    }
}

impl RunConfig {
    pub fn resolve(command: &Command) -> Result<Self, CliError> {
        let f = command.flags();
        let file = match &f.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut tolerances = default_tolerances();
        for (k, v) in &file.tolerances {
            set_tolerance(&mut tolerances, k, *v)?;
        }
        for kv in &f.tol_override {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--tol-override expects KEY=VAL, got {kv:?}")))?;
            let v: f64 =
                v.trim().parse().map_err(|_| CliError::Usage(format!("bad tolerance value in {kv:?}")))?;
            set_tolerance(&mut tolerances, k.trim(), v)?;
        }
        let grid = Grid::parse(f.grid.as_deref().or(file.grid.as_deref()).unwrap_or("0.5:4.5:5"))?;
        let samples = f.samples.or(file.samples);
        if samples == Some(0) {
            return Err(CliError::Usage("--samples must be at least 1".into()));
        }
        let cfg = RunConfig {
            subcommand: command.name().to_string(),
            ensemble: f.ensemble.or(file.ensemble).unwrap_or(EnsembleKind::Chgue),
            alpha: f.alpha.or(file.alpha).unwrap_or(1.0),
            a: list_flag(&f.a, file.a, "a")?,
            b: list_flag(&f.b, file.b, "b")?,
            mult: list_flag(&f.mult, file.mult, "mult")?,
            n: f.n.or(file.n),
            grid,
            points: list_flag(&f.points, file.points, "points")?,
            kind: f.kind.or(file.kind).unwrap_or(PolyKind::II),
            samples,
            seed: f.seed.or(file.seed).unwrap_or(0),
            workers: f.workers.or(file.workers).unwrap_or(0),
            format: f.format.or(file.format).unwrap_or(Format::Csv),
            out: f.out.clone().or(file.out),
            suite: f.suite.or(file.suite),
            cross_check: f.cross_check || file.cross_check.unwrap_or(false),
            tolerances,
        };
        if let (Some(a), Some(n)) = (&cfg.a, cfg.n) {
            if a.len() != n {
                return Err(CliError::Usage(format!("--a has {} entries but --n is {n}", a.len())));
            }
        }
        Ok(cfg)
    }

    pub fn tol(&self, key: &str) -> f64 {
        self.tolerances[key]
    }
}

fn set_tolerance(map: &mut BTreeMap<String, f64>, key: &str, value: f64) -> Result<(), CliError> {
    match map.get_mut(key) {
        Some(slot) if value.is_finite() && value > 0.0 => {
            *slot = value;
            Ok(())
        }
        Some(_) => Err(CliError::Usage(format!("tolerance {key} must be positive, got {value}"))),
        None => Err(CliError::Usage(format!(
            "unknown tolerance {key:?}; known: {}",
            map.keys().cloned().collect::<Vec<_>>().join(", ")
        ))),
    }
}
