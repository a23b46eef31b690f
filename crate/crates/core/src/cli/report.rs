//! JSON reports, CSV tables, and atomic output.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use super::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// One named check: `value` is compared against `tol` (smaller is better
/// unless the check says otherwise in its description).
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equation: Option<String>,
    pub description: String,
    pub value: f64,
    pub tol: f64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl Check {
    /// Passes when `value <= tol`.
    pub fn at_most(id: &str, equation: Option<&str>, description: &str, value: f64, tol: f64) -> Self {
        Self {
            id: id.into(),
            equation: equation.filter(|e| !e.is_empty()).map(str::to_string),
            description: description.into(),
            value,
            tol,
            status: Status::from_bool(value <= tol),
            detail: None,
        }
    }

    /// Passes when `value >= tol`.
    pub fn at_least(id: &str, equation: Option<&str>, description: &str, value: f64, tol: f64) -> Self {
        let mut c = Self::at_most(id, equation, description, value, tol);
        c.status = Status::from_bool(value >= tol);
        c
    }

    pub fn with_status(mut self, ok: bool) -> Self {
        self.status = Status::from_bool(ok);
        self
    }

    pub fn with_detail<T: Serialize>(mut self, detail: &T) -> Self {
        self.detail = serde_json::to_value(detail).ok();
        self
    }
}

/// The wall-clock field is the only nondeterministic part of a report.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub timestamp_unix: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub header: Header,
    pub schema: u32,
    pub tool: String,
    pub command: String,
    pub config: Value,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub values: Value,
    pub warnings: Vec<String>,
    pub status: Status,
}

impl Report {
    pub fn new(command: &str, config: Value) -> Self {
        let timestamp_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            header: Header { timestamp_unix },
            schema: SCHEMA_VERSION,
            tool: concat!("warpcheck ", env!("CARGO_PKG_VERSION")).into(),
            command: command.into(),
            config,
            checks: Vec::new(),
            values: Value::Null,
            warnings: Vec::new(),
            status: Status::Pass,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status == Status::Pass)
    }

    /// Sets the overall status from the checks and lists failures on
    /// stderr.
    pub fn finish(&mut self) -> bool {
        let ok = self.passed();
        self.status = Status::from_bool(ok);
        for c in self.checks.iter().filter(|c| c.status == Status::Fail) {
            let eq = c.equation.as_deref().map(|e| format!(" [{e}]")).unwrap_or_default();
            eprintln!("FAIL {}{eq}: {} = {:e} (tol {:e})", c.id, c.description, c.value, c.tol);
        }
        for w in &self.warnings {
            eprintln!("warning: {w}");
        }
        ok
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes to `path`, or stdout when `None`.
    pub fn emit(&self, path: Option<&Path>) -> Result<(), CliError> {
        emit_bytes(path, self.to_json().as_bytes())
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename, or to
/// stdout when `path` is `None`.
pub fn emit_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
        Some(path) => write_atomic(path, bytes),
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

/// Comma-separated table with 17 significant digits.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf.into_bytes()
    }
}
