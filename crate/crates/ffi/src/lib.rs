//! C ABI over `warpcheck`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every fallible call returns a [`WcStatus`]; on failure
//! [`wc_last_error`] describes the most recent error on the calling thread.
//! Output pointers are written only on success, except for
//! [`wc_solve_entry`] which also fills its summary on non-convergence.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use warpcheck::cases::{case_residuals, incompatibility_witness, CaseParams, CaseTag};
use warpcheck::catalog::{case2b_constant_f, make_entry, CatalogEntry, CatalogId, CatalogParams};
use warpcheck::cli::{CliError, EXIT_CONFIG};
use warpcheck::expr::{Constants, Expression};
use warpcheck::geometry::{gauss_curvature, Domain, Metric2D, Sign};
use warpcheck::pde::{newton_solve, GridProblem, PdeError, SolveResult};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad expression, chart, identifier or parameter combination.
    InvalidArgument = 3,
    /// Domain error, degenerate metric, singular system or non-finite value.
    Numeric = 4,
    NoConvergence = 5,
    Panic = 6,
}

/// A diagonal 2D metric over a chart.
pub struct WcMetric {
    inner: Metric2D,
}

/// A catalog metric with its closed-form curvature and `u` field.
pub struct WcCatalogEntry {
    inner: CatalogEntry,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WcWitness {
    pub points: usize,
    pub min_abs_gap: f64,
    pub max_abs_gap: f64,
    pub min_u: f64,
    pub fraction_exceeding: f64,
    pub pass: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct WcSolveSummary {
    pub iterations: usize,
    pub final_residual: f64,
    /// Max nodal error against the entry's `u` field.
    pub max_error: f64,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(WcStatus, String);

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = if e.exit_code() == EXIT_CONFIG {
            WcStatus::InvalidArgument
        } else {
            WcStatus::Numeric
        };
        Failure(status, e.to_string())
    }
}

macro_rules! impl_failure_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                CliError::from(e).into()
            }
        }
    )*};
}

impl_failure_from!(
    warpcheck::expr::ExprError,
    warpcheck::geometry::GeometryError,
    warpcheck::cases::CaseError,
    warpcheck::catalog::CatalogError,
    PdeError
);

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WcStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            WcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            WcStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(WcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(WcStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn sign(s: c_int) -> Sign {
    if s < 0 {
        Sign::Minus
    } else {
        Sign::Plus
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL after a
/// successful one. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn wc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds `s1 e d var1² + s2 g d var2²` over `[lo[0], hi[0]] × [lo[1], hi[1]]`.
/// A negative sign argument selects `-`, anything else `+`.
///
/// # Safety
/// String arguments must be NUL-terminated; `lo` and `hi` must point to two
/// doubles each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_metric_new(
    var1: *const c_char,
    var2: *const c_char,
    e: *const c_char,
    g: *const c_char,
    sign1: c_int,
    sign2: c_int,
    lo: *const f64,
    hi: *const f64,
    periodic: bool,
    out_metric: *mut *mut WcMetric,
) -> WcStatus {
    guard(|| {
        let vars = [text(var1, "var1")?, text(var2, "var2")?];
        let (e, g) = (text(e, "e")?, text(g, "g")?);
        if lo.is_null() || hi.is_null() {
            return Err(null("domain bounds"));
        }
        let lo = [*lo, *lo.add(1)];
        let hi = [*hi, *hi.add(1)];
        let slot = out(out_metric, "out_metric")?;
        let domain = Domain::new(lo, hi, periodic);
        if !domain.is_valid() {
            return Err(Failure(WcStatus::InvalidArgument, format!("invalid domain {lo:?}..{hi:?}")));
        }
        let inner = Metric2D::new(vars, e, g, &Constants::new(), [sign(sign1), sign(sign2)], domain)?;
        *slot = Box::into_raw(Box::new(WcMetric { inner }));
        Ok(())
    })
}

/// # Safety
/// `metric` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wc_metric_free(metric: *mut WcMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// Gaussian curvature at `(x, y)`.
///
/// # Safety
/// `metric` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wc_metric_gauss_curvature(
    metric: *const WcMetric,
    x: f64,
    y: f64,
    out_k: *mut f64,
) -> WcStatus {
    guard(|| {
        let m = handle(metric, "metric")?;
        let slot = out(out_k, "out_k")?;
        *slot = gauss_curvature(&m.inner, &[x, y])?;
        Ok(())
    })
}

/// Residuals of the case system `tag` ("1a", "1b" or "2b") for the field
/// `u` over the metric's chart. Writes three doubles; the third is 0 for 1b.
///
/// # Safety
/// `metric` must be a live handle, strings NUL-terminated, and `out`
/// writable for three doubles.
#[no_mangle]
pub unsafe extern "C" fn wc_case_residuals(
    metric: *const WcMetric,
    u: *const c_char,
    tag: *const c_char,
    lambda: f64,
    mu: f64,
    c: f64,
    x: f64,
    y: f64,
    out_residuals: *mut f64,
) -> WcStatus {
    guard(|| {
        let m = handle(metric, "metric")?;
        let u = text(u, "u")?;
        let tag: CaseTag = text(tag, "tag")?.parse()?;
        if out_residuals.is_null() {
            return Err(null("out_residuals"));
        }
        let vars: Vec<&str> = m.inner.vars().iter().map(String::as_str).collect();
        let field = Expression::parse_vars(u, &vars)?;
        let params = CaseParams::new(tag, lambda, mu, c)?;
        let r = case_residuals(&m.inner, &field, &params, &[x, y])?.as_array();
        ptr::copy_nonoverlapping(r.as_ptr(), out_residuals, 3);
        Ok(())
    })
}

/// Catalog entry `id` ("eq11", "eq12", "case1b_metric" or "eq20").
/// `lambda` is used by eq20 and `big_a` by case1b_metric.
///
/// # Safety
/// `id` must be NUL-terminated and `out_entry` writable.
#[no_mangle]
pub unsafe extern "C" fn wc_catalog_entry_new(
    id: *const c_char,
    lambda: f64,
    big_a: f64,
    out_entry: *mut *mut WcCatalogEntry,
) -> WcStatus {
    guard(|| {
        let id: CatalogId = text(id, "id")?.parse()?;
        let slot = out(out_entry, "out_entry")?;
        let inner = make_entry(id, CatalogParams { lambda, big_a })?;
        *slot = Box::into_raw(Box::new(WcCatalogEntry { inner }));
        Ok(())
    })
}

/// # Safety
/// `entry` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wc_catalog_entry_free(entry: *mut WcCatalogEntry) {
    if !entry.is_null() {
        drop(Box::from_raw(entry));
    }
}

/// A new metric handle holding a copy of the entry's metric.
///
/// # Safety
/// `entry` must be a live handle and `out_metric` writable.
#[no_mangle]
pub unsafe extern "C" fn wc_catalog_entry_metric(
    entry: *const WcCatalogEntry,
    out_metric: *mut *mut WcMetric,
) -> WcStatus {
    guard(|| {
        let e = handle(entry, "entry")?;
        let slot = out(out_metric, "out_metric")?;
        *slot = Box::into_raw(Box::new(WcMetric { inner: e.inner.metric.clone() }));
        Ok(())
    })
}

/// Closed-form curvature of the entry at `(x, y)`.
///
/// # Safety
/// `entry` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wc_catalog_entry_closed_k(
    entry: *const WcCatalogEntry,
    x: f64,
    y: f64,
    out_k: *mut f64,
) -> WcStatus {
    guard(|| {
        let e = handle(entry, "entry")?;
        let slot = out(out_k, "out_k")?;
        *slot = e.inner.closed_k.eval(&[x, y])?;
        Ok(())
    })
}

/// The entry's `u` field at `(x, y)`.
///
/// # Safety
/// `entry` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wc_catalog_entry_u(
    entry: *const WcCatalogEntry,
    x: f64,
    y: f64,
    out_u: *mut f64,
) -> WcStatus {
    guard(|| {
        let e = handle(entry, "entry")?;
        let slot = out(out_u, "out_u")?;
        *slot = e.inner.u_field.eval(&[x, y])?;
        Ok(())
    })
}

/// Curvature gap `K + u` over an `n1 × n2` grid of the entry's domain.
///
/// # Safety
/// `entry` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wc_catalog_entry_witness(
    entry: *const WcCatalogEntry,
    n1: usize,
    n2: usize,
    tol: f64,
    out_witness: *mut WcWitness,
) -> WcStatus {
    guard(|| {
        let e = handle(entry, "entry")?;
        let slot = out(out_witness, "out_witness")?;
        let grid = e.inner.grid(n1, n2);
        let w = incompatibility_witness(&e.inner.metric, &e.inner.u_field, &grid.points, tol)?;
        *slot = WcWitness {
            points: w.points,
            min_abs_gap: w.min_abs_gap,
            max_abs_gap: w.max_abs_gap,
            min_u: w.min_u,
            fraction_exceeding: w.fraction_exceeding,
            pass: w.pass,
        };
        Ok(())
    })
}

/// Solves `Δf + a f² + b f = 0` on an `n1 × n2` grid over the entry's
/// domain with the first axis cut to `[lo1, hi1]`, with Dirichlet data from
/// the entry's `u` field, and compares with it.
/// Returns `NoConvergence` with the summary filled when Newton stalls.
///
/// # Safety
/// `entry` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wc_solve_entry(
    entry: *const WcCatalogEntry,
    a: f64,
    b: f64,
    lo1: f64,
    hi1: f64,
    n1: usize,
    n2: usize,
    tol: f64,
    max_iter: usize,
    out_summary: *mut WcSolveSummary,
) -> WcStatus {
    guard(|| {
        let e = handle(entry, "entry")?;
        let slot = out(out_summary, "out_summary")?;
        let u = &e.inner.u_field;
        let d = e.inner.metric.domain();
        let domain = Domain::new([lo1, d.lo[1]], [hi1, d.hi[1]], d.periodic);
        if !domain.is_valid() {
            return Err(Failure(WcStatus::InvalidArgument, format!("invalid range {lo1}..{hi1}")));
        }
        let problem = GridProblem::new(e.inner.metric.with_domain(domain), a, b, n1, n2, u.clone());
        let summary = |s: &SolveResult| -> Result<WcSolveSummary, Failure> {
            Ok(WcSolveSummary {
                iterations: s.newton_iterations(),
                final_residual: s.final_residual,
                max_error: s.max_error(u)?,
                converged: s.converged,
            })
        };
        match newton_solve(&problem, tol, max_iter) {
            Ok(s) => {
                *slot = summary(&s)?;
                Ok(())
            }
            Err(PdeError::NoConvergence(s)) => {
                *slot = summary(&s)?;
                Err(Failure(WcStatus::NoConvergence, PdeError::NoConvergence(s).to_string()))
            }
            Err(other) => Err(other.into()),
        }
    })
}

/// The two constant warps of the 2b branch, `(11 ± √57) λ / (8 c)`.
///
/// # Safety
/// Both output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn wc_case2b_constant_f(
    lambda: f64,
    c: f64,
    out_plus: *mut f64,
    out_minus: *mut f64,
) -> WcStatus {
    guard(|| {
        let plus = out(out_plus, "out_plus")?;
        let minus = out(out_minus, "out_minus")?;
        let (p, m) = case2b_constant_f(lambda, c)?;
        *plus = p;
        *minus = m;
        Ok(())
    })
}
