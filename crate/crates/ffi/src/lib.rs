//! C ABI for `hjrate`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` (or an
//! operation that yields one) and released with the matching `*_free`.
//! Every fallible call returns an [`HjStatus`]; on failure a description is
//! available from [`hj_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hjrate::harness::{fit_rate, run_stationary_sweep, run_sweep, SweepConfig};
use hjrate::{EnvelopeResult, Error, Grid, GridFn};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidGrid = 3,
    GridMismatch = 4,
    InvalidCertificate = 5,
    Incompatible = 6,
    CflViolation = 7,
    NonFinite = 8,
    MaxIterations = 9,
    Degenerate = 10,
    InsufficientPoints = 11,
    Config = 12,
    Io = 13,
    BufferTooSmall = 14,
    Panic = 15,
    Other = 16,
}

impl From<&Error> for HjStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidGrid(_) => HjStatus::InvalidGrid,
            Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => HjStatus::InvalidArgument,
            Error::GridMismatch => HjStatus::GridMismatch,
            Error::InvalidCertificate { .. } => HjStatus::InvalidCertificate,
            Error::Incompatible { .. } => HjStatus::Incompatible,
            Error::CflViolation { .. } => HjStatus::CflViolation,
            Error::NonFinite { .. } => HjStatus::NonFinite,
            Error::MaxIterations { .. } => HjStatus::MaxIterations,
            Error::Degenerate(_) => HjStatus::Degenerate,
            Error::InsufficientPoints { .. } => HjStatus::InsufficientPoints,
            Error::Solve { source, .. } => HjStatus::from(source.as_ref()),
            Error::Config(_) | Error::Json(_) | Error::UnsupportedOracle(_) => HjStatus::Config,
            Error::Io { .. } | Error::Csv(_) => HjStatus::Io,
        }
    }
}

/// Periodic uniform grid.
pub struct HjGrid(Grid);

/// Nodal values on a grid.
pub struct HjGridFn(GridFn);

/// Sup- or inf-envelope with its maximiser map.
pub struct HjEnvelope(EnvelopeResult);

/// Least-squares fit of `log err` against `log ε`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HjRateFit {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    pub interval_lo: f64,
    pub interval_hi: f64,
    pub points: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: HjStatus, msg: impl Into<String>) -> HjStatus {
    set_error(msg.into());
    status
}

fn guard(body: impl FnOnce() -> Result<(), HjStatus>) -> HjStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HjStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            fail(HjStatus::Panic, msg)
        }
    }
}

fn lib(e: Error) -> HjStatus {
    let s = HjStatus::from(&e);
    fail(s, e.to_string())
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, HjStatus> {
    p.as_ref().ok_or_else(|| fail(HjStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], HjStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(HjStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, name: &str) -> Result<(), HjStatus> {
    if out.is_null() {
        return Err(fail(HjStatus::NullPointer, format!("{name} is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_into<T: Copy>(src: &[T], out: *mut T, len: usize) -> Result<(), HjStatus> {
    if len < src.len() {
        return Err(fail(
            HjStatus::BufferTooSmall,
            format!("buffer holds {len} entries, {} needed", src.len()),
        ));
    }
    if out.is_null() {
        return Err(fail(HjStatus::NullPointer, "out is null"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn hj_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn hj_grid_new(dim: usize, points_per_axis: usize, length: f64, out: *mut *mut HjGrid) -> HjStatus {
    guard(|| {
        let g = Grid::new(dim, points_per_axis, length).map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(HjGrid(g))), "out")
    })
}

/// # Safety
/// `grid` must be NULL or a handle from `hj_grid_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hj_grid_free(grid: *mut HjGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Total node count, or 0 for NULL.
///
/// # Safety
/// `grid` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hj_grid_len(grid: *const HjGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// Copies `len` row-major values (`len` must equal the node count).
///
/// # Safety
/// `grid` must be a live handle, `values` readable for `len` doubles and
/// `out` writable for one pointer.
#[no_mangle]
pub unsafe extern "C" fn hj_gridfn_new(
    grid: *const HjGrid,
    values: *const f64,
    len: usize,
    out: *mut *mut HjGridFn,
) -> HjStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        let v = slice(values, len, "values")?;
        let f = GridFn::new(g.0, v.to_vec()).map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(HjGridFn(f))), "out")
    })
}

/// # Safety
/// `f` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hj_gridfn_free(f: *mut HjGridFn) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `f` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hj_gridfn_len(f: *const HjGridFn) -> usize {
    f.as_ref().map_or(0, |f| f.0.values().len())
}

/// # Safety
/// `f` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hj_gridfn_copy_values(f: *const HjGridFn, out: *mut f64, len: usize) -> HjStatus {
    guard(|| copy_into(deref(f, "f")?.0.values(), out, len))
}

unsafe fn envelope(
    f: *const HjGridFn,
    delta: f64,
    out: *mut *mut HjEnvelope,
    op: fn(&GridFn, f64) -> hjrate::Result<EnvelopeResult>,
) -> HjStatus {
    guard(|| {
        let env = op(&deref(f, "f")?.0, delta).map_err(lib)?;
        write_out(out, Box::into_raw(Box::new(HjEnvelope(env))), "out")
    })
}

/// `sup_y { f(y) − |x − y|²/(2δ) }` on the grid.
///
/// # Safety
/// `f` must be a live handle and `out` writable for one pointer.
#[no_mangle]
pub unsafe extern "C" fn hj_sup_convolution(f: *const HjGridFn, delta: f64, out: *mut *mut HjEnvelope) -> HjStatus {
    envelope(f, delta, out, hjrate::sup_convolution)
}

/// `inf_y { f(y) + |x − y|²/(2δ) }` on the grid.
///
/// # Safety
/// `f` must be a live handle and `out` writable for one pointer.
#[no_mangle]
pub unsafe extern "C" fn hj_inf_convolution(f: *const HjGridFn, delta: f64, out: *mut *mut HjEnvelope) -> HjStatus {
    envelope(f, delta, out, hjrate::inf_convolution)
}

/// # Safety
/// `env` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hj_envelope_free(env: *mut HjEnvelope) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// # Safety
/// `env` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hj_envelope_len(env: *const HjEnvelope) -> usize {
    env.as_ref().map_or(0, |e| e.0.arg_map().len())
}

/// # Safety
/// `env` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hj_envelope_copy_values(env: *const HjEnvelope, out: *mut f64, len: usize) -> HjStatus {
    guard(|| copy_into(deref(env, "env")?.0.envelope().values(), out, len))
}

/// Flat index of the selected point for every node.
///
/// # Safety
/// `env` must be a live handle and `out` writable for `len` entries.
#[no_mangle]
pub unsafe extern "C" fn hj_envelope_copy_argmax(env: *const HjEnvelope, out: *mut usize, len: usize) -> HjStatus {
    guard(|| copy_into(deref(env, "env")?.0.arg_map(), out, len))
}

/// Exhaustive discrete Hölder seminorm.
///
/// # Safety
/// `f` must be a live handle and `out` writable for one double.
#[no_mangle]
pub unsafe extern "C" fn hj_holder_seminorm(f: *const HjGridFn, alpha: f64, out: *mut f64) -> HjStatus {
    guard(|| {
        let v = hjrate::holder_seminorm(&deref(f, "f")?.0, alpha).map_err(lib)?;
        write_out(out, v, "out")
    })
}

/// # Safety
/// `f`, `g` must be live handles and `out` writable for one double.
#[no_mangle]
pub unsafe extern "C" fn hj_sup_norm_diff(f: *const HjGridFn, g: *const HjGridFn, out: *mut f64) -> HjStatus {
    guard(|| {
        let v = hjrate::sup_norm_diff(&deref(f, "f")?.0, &deref(g, "g")?.0).map_err(lib)?;
        write_out(out, v, "out")
    })
}

/// `4‖Du₀‖√(εt) + C_F tε`.
///
/// # Safety
/// `out` must be writable for one double.
#[no_mangle]
pub unsafe extern "C" fn hj_heat_bound(lip_u0: f64, c_f: f64, t: f64, epsilon: f64, out: *mut f64) -> HjStatus {
    guard(|| {
        let v = hjrate::bounds::heat_bound(lip_u0, c_f, t, epsilon).map_err(lib)?;
        write_out(out, v, "out")
    })
}

/// # Safety
/// `epsilons` and `errors` must be readable for `len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hj_fit_rate(
    epsilons: *const f64,
    errors: *const f64,
    len: usize,
    out: *mut HjRateFit,
) -> HjStatus {
    guard(|| {
        let e = slice(epsilons, len, "epsilons")?;
        let r = slice(errors, len, "errors")?;
        let pts: Vec<(f64, f64)> = e.iter().copied().zip(r.iter().copied()).collect();
        let fit = fit_rate(&pts).map_err(lib)?;
        let c = HjRateFit {
            slope: fit.slope,
            intercept: fit.intercept,
            std_error: fit.stderr,
            interval_lo: fit.interval[0],
            interval_hi: fit.interval[1],
            points: fit.points,
        };
        write_out(out, c, "out")
    })
}

/// Runs an ε-sweep described by a JSON config (the CLI format, with an
/// inline `problem`) and returns the report as JSON. `passed` receives
/// whether every bound held and the fitted rate is consistent. Nothing is
/// written to disk. Free the report with `hj_string_free`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `report_json` and
/// `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hj_run_sweep_json(
    config_json: *const c_char,
    stationary: bool,
    report_json: *mut *mut c_char,
    passed: *mut bool,
) -> HjStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(fail(HjStatus::NullPointer, "config_json is null"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| fail(HjStatus::InvalidArgument, format!("config is not UTF-8: {e}")))?;
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| lib(e.into()))?;
        let (cfg, problem) = SweepConfig::from_json_value(value, None).map_err(lib)?;
        let report = if stationary { run_stationary_sweep(&cfg, &problem) } else { run_sweep(&cfg, &problem) }
            .map_err(lib)?;
        let json = serde_json::to_string(&report).map_err(|e| lib(e.into()))?;
        let c = CString::new(json).map_err(|e| fail(HjStatus::Other, e.to_string()))?;
        write_out(passed, report.passed(), "passed")?;
        write_out(report_json, c.into_raw(), "report_json")
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hj_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
