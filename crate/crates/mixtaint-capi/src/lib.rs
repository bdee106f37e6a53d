//! C bindings for the taint-analysis library.
//!
//! The surface is deliberately small: load a chain once into an opaque
//! handle, run analyses against it, and read results back as JSON strings.
//! Every returned string must be released with [`mixtaint_string_free`] and
//! every handle with [`mixtaint_chain_free`]. Fallible calls return a
//! [`MixtaintStatus`]; on failure the message for the most recent error on
//! the calling thread is available through [`mixtaint_last_error`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::fmt::Display;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mixtaint::{
    build_index, evaluate_case, parse_calibrations, run_method, ChainIndex, IoError, Method,
    SampleCase, Transaction, WindowParams,
};

/// Result code returned by every fallible binding.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtaintStatus {
    Ok = 0,
    /// A file could not be read.
    Io = 1,
    /// Input text is not valid JSON of the expected shape.
    Parse = 2,
    /// The transactions do not form a consistent chain.
    Chain = 3,
    /// The analysis rejected the request (bad window, empty seed, ...).
    Analysis = 4,
    /// A required pointer is null or an argument is out of range.
    InvalidArg = 5,
    /// A string argument is not valid UTF-8.
    Utf8 = 6,
}

/// An indexed transaction chain.
///
/// Created by [`mixtaint_chain_load`] or [`mixtaint_chain_from_jsonl`] and
/// released with [`mixtaint_chain_free`]. The handle is immutable after
/// construction and safe to share across threads.
pub struct MixtaintChain {
    index: ChainIndex,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: MixtaintStatus, msg: impl Display) -> MixtaintStatus {
    let text = msg.to_string().replace('\0', "\\0");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).expect("NULs escaped"));
    status
}

fn guarded(f: impl FnOnce() -> MixtaintStatus) -> MixtaintStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(MixtaintStatus::Analysis, "internal panic; see stderr"),
    }
}

/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn required_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, MixtaintStatus> {
    if ptr.is_null() {
        return Err(fail(MixtaintStatus::InvalidArg, format!("{name} must not be null")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|e| fail(MixtaintStatus::Utf8, format!("{name} is not valid UTF-8: {e}")))
}

fn index_into(txs: Vec<Transaction>, out: &mut *mut MixtaintChain) -> MixtaintStatus {
    match build_index(txs) {
        Ok(index) => {
            *out = Box::into_raw(Box::new(MixtaintChain { index }));
            MixtaintStatus::Ok
        }
        Err(err) => fail(MixtaintStatus::Chain, err),
    }
}

fn write_json<T: serde::Serialize>(value: &T, out: &mut *mut c_char) -> MixtaintStatus {
    let mut text = match serde_json::to_string_pretty(value) {
        Ok(text) => text,
        Err(err) => return fail(MixtaintStatus::Analysis, err),
    };
    text.push('\n');
    match CString::new(text) {
        Ok(s) => {
            *out = s.into_raw();
            MixtaintStatus::Ok
        }
        Err(err) => fail(MixtaintStatus::Analysis, err),
    }
}

/// Message text for the most recent failure on the calling thread.
///
/// The pointer stays valid until the next failing call on the same thread;
/// it is empty when no call has failed yet.
#[no_mangle]
pub extern "C" fn mixtaint_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Loads a chain from a JSONL file, one transaction object per line.
///
/// On success writes a new handle to `out_chain`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_chain` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mixtaint_chain_load(
    path: *const c_char,
    out_chain: *mut *mut MixtaintChain,
) -> MixtaintStatus {
    guarded(|| {
        let Some(out) = (unsafe { out_chain.as_mut() }) else {
            return fail(MixtaintStatus::InvalidArg, "out_chain must not be null");
        };
        *out = ptr::null_mut();
        let path = match unsafe { required_str(path, "path") } {
            Ok(path) => path,
            Err(status) => return status,
        };
        match mixtaint::load_chain(path) {
            Ok(txs) => index_into(txs, out),
            Err(err @ IoError::Read { .. }) => fail(MixtaintStatus::Io, err),
            Err(err) => fail(MixtaintStatus::Parse, err),
        }
    })
}

/// Parses a chain from in-memory JSONL text, one transaction per line.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out_chain` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mixtaint_chain_from_jsonl(
    text: *const c_char,
    out_chain: *mut *mut MixtaintChain,
) -> MixtaintStatus {
    guarded(|| {
        let Some(out) = (unsafe { out_chain.as_mut() }) else {
            return fail(MixtaintStatus::InvalidArg, "out_chain must not be null");
        };
        *out = ptr::null_mut();
        let text = match unsafe { required_str(text, "text") } {
            Ok(text) => text,
            Err(status) => return status,
        };
        let mut txs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<Transaction>(line) {
                Ok(tx) => txs.push(tx),
                Err(err) => {
                    return fail(MixtaintStatus::Parse, format!("line {}: {err}", lineno + 1))
                }
            }
        }
        index_into(txs, out)
    })
}

/// Releases a chain handle. Passing null is a no-op.
///
/// # Safety
/// `chain` must be null or a handle returned by this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn mixtaint_chain_free(chain: *mut MixtaintChain) {
    if !chain.is_null() {
        drop(unsafe { Box::from_raw(chain) });
    }
}

/// Number of transactions in the chain; 0 when `chain` is null.
///
/// # Safety
/// `chain` must be null or a live handle returned by this library.
#[no_mangle]
pub unsafe extern "C" fn mixtaint_chain_tx_count(chain: *const MixtaintChain) -> usize {
    unsafe { chain.as_ref() }.map_or(0, |chain| chain.index.len())
}

/// Runs one tracking method on one case and returns the taint result as JSON.
///
/// `case_json` holds a single case object. `method` is one of `baseline`,
/// `poison`, `m1`, `m2`, `m3` or `m4`. The window parameters are in days;
/// pass 5, 3, 3 for the defaults. The returned string must be released with
/// [`mixtaint_string_free`].
///
/// # Safety
/// `chain` must be a live handle, the string arguments NUL-terminated, and
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mixtaint_run_method_json(
    chain: *const MixtaintChain,
    case_json: *const c_char,
    method: *const c_char,
    lookback_days: u32,
    horizon_days: u32,
    backtrace_days: u32,
    out_json: *mut *mut c_char,
) -> MixtaintStatus {
    guarded(|| {
        let Some(out) = (unsafe { out_json.as_mut() }) else {
            return fail(MixtaintStatus::InvalidArg, "out_json must not be null");
        };
        *out = ptr::null_mut();
        let Some(chain) = (unsafe { chain.as_ref() }) else {
            return fail(MixtaintStatus::InvalidArg, "chain must not be null");
        };
        let (case_json, method) = match unsafe {
            required_str(case_json, "case_json")
                .and_then(|c| Ok((c, required_str(method, "method")?)))
        } {
            Ok(args) => args,
            Err(status) => return status,
        };
        let method: Method = match method.parse() {
            Ok(method) => method,
            Err(err) => return fail(MixtaintStatus::InvalidArg, err),
        };
        let case: SampleCase = match serde_json::from_str(case_json) {
            Ok(case) => case,
            Err(err) => return fail(MixtaintStatus::Parse, format!("case: {err}")),
        };
        let params = WindowParams { lookback_days, horizon_days, backtrace_days };
        match run_method(&chain.index, &case, method, params) {
            Ok(result) => write_json(&result, out),
            Err(err) => fail(MixtaintStatus::Analysis, err),
        }
    })
}

/// Evaluates one case with every method, filtered and unfiltered, and
/// returns the report as JSON.
///
/// `calibration_json` maps service names to filter calibrations; it must
/// contain a row for the case's service. The returned string must be
/// released with [`mixtaint_string_free`].
///
/// # Safety
/// `chain` must be a live handle, the string arguments NUL-terminated, and
/// `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mixtaint_evaluate_case_json(
    chain: *const MixtaintChain,
    case_json: *const c_char,
    calibration_json: *const c_char,
    lookback_days: u32,
    horizon_days: u32,
    backtrace_days: u32,
    out_json: *mut *mut c_char,
) -> MixtaintStatus {
    guarded(|| {
        let Some(out) = (unsafe { out_json.as_mut() }) else {
            return fail(MixtaintStatus::InvalidArg, "out_json must not be null");
        };
        *out = ptr::null_mut();
        let Some(chain) = (unsafe { chain.as_ref() }) else {
            return fail(MixtaintStatus::InvalidArg, "chain must not be null");
        };
        let (case_json, calibration_json) = match unsafe {
            required_str(case_json, "case_json")
                .and_then(|c| Ok((c, required_str(calibration_json, "calibration_json")?)))
        } {
            Ok(args) => args,
            Err(status) => return status,
        };
        let case: SampleCase = match serde_json::from_str(case_json) {
            Ok(case) => case,
            Err(err) => return fail(MixtaintStatus::Parse, format!("case: {err}")),
        };
        let calibrations = match parse_calibrations(calibration_json) {
            Ok(calibrations) => calibrations,
            Err(err) => return fail(MixtaintStatus::Parse, err),
        };
        let params = WindowParams { lookback_days, horizon_days, backtrace_days };
        match evaluate_case(&chain.index, &case, &calibrations, params) {
            Ok(report) => write_json(&report, out),
            Err(err) => fail(MixtaintStatus::Analysis, err),
        }
    })
}

/// Releases a string returned by this library. Passing null is a no-op.
///
/// # Safety
/// `s` must be null or a string returned by this library that has not been
/// freed yet.
#[no_mangle]
pub unsafe extern "C" fn mixtaint_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
