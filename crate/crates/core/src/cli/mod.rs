//! The `warpcheck` command line.
//!
//! Exit codes: 0 all checks pass, 1 a check failed (or Newton did not
//! converge), 2 configuration or I/O error, 3 numerical domain error or
//! degenerate metric.

mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::cases::CaseError;
use crate::catalog::CatalogError;
use crate::expr::ExprError;
use crate::geometry::GeometryError;
use crate::pde::PdeError;
use crate::warped::WarpedError;

use config::Common;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match &e {
            GeometryError::Expr(ExprError::Domain { .. })
            | GeometryError::DegenerateMetric { .. }
            | GeometryError::NonPositiveComponent { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ExprError> for CliError {
    fn from(e: ExprError) -> Self {
        GeometryError::from(e).into()
    }
}

impl From<CaseError> for CliError {
    fn from(e: CaseError) -> Self {
        match e {
            CaseError::Geometry(g) => g.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::Geometry(g) => g.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<WarpedError> for CliError {
    fn from(e: WarpedError) -> Self {
        match e {
            WarpedError::Geometry(g) => g.into(),
            WarpedError::NonPositiveWarp { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<PdeError> for CliError {
    fn from(e: PdeError) -> Self {
        match e {
            PdeError::Geometry(g) => g.into(),
            PdeError::NonFinite { .. } | PdeError::SingularJacobian { .. } => {
                CliError::Numeric(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "warpcheck",
    version,
    about = "Numerical checks for warped-product Einstein metrics with f-curvature-base"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the verification suite of one case (1a, 1b or 2b).
    VerifyCase {
        /// Case tag; may also come from the config file (`case`).
        tag: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate Gauss and scalar curvature of a 2D metric as CSV.
    Curvature {
        /// Catalog metric (eq11, eq12, eq20, case1b_metric) or `flat`.
        #[arg(long)]
        preset: Option<String>,
        /// Chart variables, comma separated (custom metric).
        #[arg(long, value_delimiter = ',')]
        vars: Option<Vec<String>>,
        /// First metric component (custom metric).
        #[arg(long)]
        e: Option<String>,
        /// Second metric component (custom metric).
        #[arg(long)]
        g: Option<String>,
        /// Sign flags of the components, e.g. "+-".
        #[arg(long)]
        signs: Option<String>,
        /// Named constant NAME=VALUE; repeatable.
        #[arg(long = "const", value_name = "NAME=VALUE")]
        consts: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the numerical 4D Ricci tensor with the block formulas and
    /// evaluate the Einstein residuals at random sample points.
    Blockcheck {
        /// Base preset: flat, flat-lorentz, eq12, eq20, case1b.
        #[arg(long)]
        base: Option<String>,
        /// Fiber preset: flat, flat-neg, sphere, sphere-neg.
        #[arg(long)]
        fiber: Option<String>,
        /// Warping function over the base chart.
        #[arg(long)]
        warp: Option<String>,
        /// Number of random sample points.
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Newton solve of Δf + a f² + b f = 0 with Dirichlet data.
    Solve {
        /// eq12-u, eq20-u or flat-affine.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Path of the JSON report (stdout when absent); --out receives the CSV.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate the case residuals of a case's catalog metric as CSV.
    Residuals {
        tag: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::VerifyCase { tag, common } => commands::verify_case(tag, &common),
        Command::Curvature {
            preset,
            vars,
            e,
            g,
            signs,
            consts,
            common,
        } => commands::curvature(
            commands::CurvatureArgs {
                preset,
                vars,
                e,
                g,
                signs,
                consts,
            },
            &common,
        ),
        Command::Blockcheck {
            base,
            fiber,
            warp,
            samples,
            common,
        } => commands::blockcheck(base, fiber, warp, samples, &common),
        Command::Solve {
            preset,
            max_iter,
            report,
            common,
        } => commands::solve(preset, max_iter, report, &common),
        Command::Residuals { tag, common } => commands::residuals(tag, &common),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs; usage errors exit
/// with [`EXIT_CONFIG`].
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            }
        }
    }
}
