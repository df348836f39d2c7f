//! C ABI for the alphaforge engine.
//!
//! Conventions: every function returns an `AfStatus` code (0 = success) or a
//! pointer that is null on failure; the failure message is retrievable per
//! thread via `af_last_error`. Handles are opaque and must be released with
//! their matching `*_free` function. All strings are NUL-terminated UTF-8.
//!
//! The matching header lives at `include/alphaforge.h` and is maintained by
//! hand; keep the two in sync when the surface changes.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::path::Path;
use std::ptr;

use alphaforge::data::{generate_synthetic, load_csv, Panel};
use alphaforge::dsl::parse;
use alphaforge::engine::{eval_batch, eval_streaming, AlphaMatrix};
use alphaforge::error::Error;
use alphaforge::semantics::{validate, Verdict};

/// Status codes mirrored in `include/alphaforge.h`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    SyntaxError = 3,
    UnitError = 4,
    SemanticError = 5,
    EvalError = 6,
    IoError = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).expect("no interior NUL"));
}

fn status_of(err: &Error) -> AfStatus {
    match err {
        Error::Syntax { .. } | Error::UnknownOperator(_) | Error::Arity { .. }
        | Error::WindowRange { .. } | Error::DepthCap { .. } => AfStatus::SyntaxError,
        Error::Unit { .. } => AfStatus::UnitError,
        Error::Io(_) | Error::InvalidPanel(_) => AfStatus::IoError,
        _ => AfStatus::EvalError,
    }
}

/// Opaque panel handle.
pub struct AfPanel(Panel);
/// Opaque alpha-matrix handle.
pub struct AfAlpha(AlphaMatrix);

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, AfStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(AfStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        AfStatus::InvalidUtf8
    })
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; never free it.
#[no_mangle]
pub extern "C" fn af_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load a panel from CSV. Returns null on failure.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn af_panel_load_csv(path: *const c_char, strict: c_int) -> *mut AfPanel {
    let Ok(path) = cstr(path) else { return ptr::null_mut() };
    match load_csv(Path::new(path), strict != 0) {
        Ok(p) => Box::into_raw(Box::new(AfPanel(p))),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Generate a seeded synthetic panel. Returns null on failure.
#[no_mangle]
pub extern "C" fn af_panel_synthetic(
    dates: usize,
    instruments: usize,
    sectors: usize,
    seed: u64,
) -> *mut AfPanel {
    match generate_synthetic(dates, instruments, sectors, None, 0.0, seed) {
        Ok((p, _labels)) => Box::into_raw(Box::new(AfPanel(p))),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Number of bars (rows) in the panel.
///
/// # Safety
/// `panel` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn af_panel_rows(panel: *const AfPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.0.t())
}

/// Number of instruments (columns) in the panel.
///
/// # Safety
/// `panel` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn af_panel_cols(panel: *const AfPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.0.n())
}

/// Release a panel handle. Null is a no-op.
///
/// # Safety
/// `panel` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn af_panel_free(panel: *mut AfPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Validate an expression. Returns Ok when the expression is usable; the
/// rejection message is available via `af_last_error`.
///
/// # Safety
/// `expression` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn af_validate(expression: *const c_char) -> AfStatus {
    let text = match cstr(expression) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let report = validate(text);
    match report.verdict {
        Verdict::Valid => AfStatus::Ok,
        Verdict::SyntaxError => {
            set_error(&report.message);
            AfStatus::SyntaxError
        }
        Verdict::UnitError => {
            set_error(&report.message);
            AfStatus::UnitError
        }
        Verdict::SemanticError => {
            set_error(&report.message);
            AfStatus::SemanticError
        }
    }
}

/// Evaluate an expression over a panel. On success `*out` owns a new alpha
/// handle. `threads` = 1 evaluates inline; results never depend on it.
/// `streaming` != 0 uses the bar-by-bar engine (bit-identical to batch).
///
/// # Safety
/// `expression` must be NUL-terminated, `panel` a live handle, `out` a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn af_eval(
    expression: *const c_char,
    panel: *const AfPanel,
    threads: usize,
    streaming: c_int,
    out: *mut *mut AfAlpha,
) -> AfStatus {
    if panel.is_null() || out.is_null() {
        set_error("null panel or out argument");
        return AfStatus::NullArgument;
    }
    let text = match cstr(expression) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let expr = match parse(text) {
        Ok(e) => e,
        Err(e) => {
            set_error(&e.to_string());
            return status_of(&e);
        }
    };
    let result = if streaming != 0 {
        eval_streaming(&expr, &(*panel).0)
    } else {
        eval_batch(&expr, &(*panel).0, threads.max(1))
    };
    match result {
        Ok(alpha) => {
            *out = Box::into_raw(Box::new(AfAlpha(alpha)));
            AfStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// Rows of an alpha matrix.
///
/// # Safety
/// `alpha` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn af_alpha_rows(alpha: *const AfAlpha) -> usize {
    alpha.as_ref().map_or(0, |a| a.0.values.rows())
}

/// Columns of an alpha matrix.
///
/// # Safety
/// `alpha` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn af_alpha_cols(alpha: *const AfAlpha) -> usize {
    alpha.as_ref().map_or(0, |a| a.0.values.cols())
}

/// Copy the row-major values (missing cells are NaN) into `buffer`, which
/// must hold `rows * cols` doubles.
///
/// # Safety
/// `alpha` must be a live handle; `buffer` must point to at least
/// `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn af_alpha_values(
    alpha: *const AfAlpha,
    buffer: *mut c_double,
    capacity: usize,
) -> AfStatus {
    let Some(a) = alpha.as_ref() else {
        set_error("null alpha argument");
        return AfStatus::NullArgument;
    };
    if buffer.is_null() {
        set_error("null buffer argument");
        return AfStatus::NullArgument;
    }
    let data = a.0.values.data();
    if capacity < data.len() {
        set_error("buffer too small");
        return AfStatus::EvalError;
    }
    ptr::copy_nonoverlapping(data.as_ptr(), buffer, data.len());
    AfStatus::Ok
}

/// Release an alpha handle. Null is a no-op.
///
/// # Safety
/// `alpha` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn af_alpha_free(alpha: *mut AfAlpha) {
    if !alpha.is_null() {
        drop(Box::from_raw(alpha));
    }
}
