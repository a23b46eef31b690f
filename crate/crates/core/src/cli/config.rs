//! Command-line flags, the optional JSON config file, and their merge.
//! Flags win over file values; file values win over defaults.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use super::CliError;

/// `N1xN2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSize {
    pub n1: usize,
    pub n2: usize,
}

impl std::str::FromStr for GridSize {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("grid `{s}` is not of the form N1xN2"))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("grid `{s}`: `{t}` is not a positive integer"))
        };
        let (n1, n2) = (parse(a)?, parse(b)?);
        if n1 == 0 || n2 == 0 {
            return Err(format!("grid `{s}` has an empty axis"));
        }
        Ok(Self { n1, n2 })
    }
}

impl<'de> Deserialize<'de> for GridSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `lo:hi` range of the first chart coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl std::str::FromStr for Range {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("domain `{s}` is not of the form min:max"))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("domain `{s}`: `{t}` is not a number"))
        };
        let (lo, hi) = (parse(a)?, parse(b)?);
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(format!("domain `{s}` must satisfy min < max"));
        }
        Ok(Self { lo, hi })
    }
}

impl<'de> Deserialize<'de> for Range {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Constant c in R_B = c f.
    #[arg(long = "c", allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Grid size, e.g. 40x16.
    #[arg(long, value_name = "N1xN2")]
    pub grid: Option<GridSize>,
    /// Range of the first coordinate, e.g. 0.5:5.
    #[arg(long, value_name = "MIN:MAX", allow_hyphen_values = true)]
    pub domain: Option<Range>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path (report or CSV, depending on the command).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// A metric given by expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub vars: [String; 2],
    pub e: String,
    pub g: String,
    /// Two sign characters, e.g. "+-".
    #[serde(default = "default_signs")]
    pub signs: String,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    #[serde(default)]
    pub periodic: bool,
    #[serde(default)]
    pub constants: std::collections::BTreeMap<String, f64>,
}

fn default_signs() -> String {
    "++".into()
}

/// Everything a config file may set. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub case: Option<String>,
    pub c: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub grid: Option<GridSize>,
    pub domain: Option<Range>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub preset: Option<String>,
    pub metric: Option<MetricSpec>,
    pub base: Option<String>,
    pub fiber: Option<String>,
    pub base_metric: Option<MetricSpec>,
    pub fiber_metric: Option<MetricSpec>,
    pub warp: Option<String>,
    pub samples: Option<usize>,
    pub max_iter: Option<usize>,
    pub report: Option<PathBuf>,
    /// Per-check tolerance overrides keyed by check id.
    #[serde(default)]
    pub tolerances: std::collections::BTreeMap<String, f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }
}

/// Shared values after merging flags over the file.
#[derive(Debug, Clone)]
pub struct Merged {
    pub file: FileConfig,
    pub c: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub grid: Option<GridSize>,
    pub domain: Option<Range>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Merged {
    pub fn new(common: &Common) -> Result<Self, CliError> {
        let file = FileConfig::load(common.config.as_deref())?;
        let m = Self {
            c: common.c.or(file.c),
            lambda: common.lambda.or(file.lambda),
            mu: common.mu.or(file.mu),
            grid: common.grid.or(file.grid),
            domain: common.domain.or(file.domain),
            tol: common.tol.or(file.tol),
            seed: common.seed.or(file.seed),
            out: common.out.clone().or_else(|| file.out.clone()),
            file,
        };
        for (name, v) in [("c", m.c), ("lambda", m.lambda), ("mu", m.mu)] {
            if v.is_some_and(|v| !v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be finite")));
            }
        }
        if let Some(t) = m.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("tol must be positive, got {t}")));
            }
        }
        Ok(m)
    }
}
