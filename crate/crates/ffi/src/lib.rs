//! C ABI for the qopt library.
//!
//! Models are opaque handles created from JSON (or a preset name) and freed
//! with [`qopt_model_free`]. Every fallible call returns a status code from
//! [`QoptStatus`]; the message of the most recent failure on the current
//! thread is available through [`qopt_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qopt::bounds::{BoundModel, MultiIndex};
use qopt::error::Error;
use qopt::{estimates, index_sets, polytope, presets, tails};

/// Status codes mirroring the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum QoptStatus {
    Ok = 0,
    /// Unexpected internal failure (a caught panic).
    Internal = 1,
    Argument = 2,
    Domain = 3,
    Resource = 4,
    Consistency = 5,
}

/// Opaque model handle.
pub struct QoptModel {
    inner: BoundModel,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> QoptStatus {
    match err.exit_code() {
        2 => QoptStatus::Argument,
        3 => QoptStatus::Domain,
        4 => QoptStatus::Resource,
        5 => QoptStatus::Consistency,
        _ => QoptStatus::Internal,
    }
}

fn guard<F: FnOnce() -> Result<QoptStatus, Error>>(f: F) -> QoptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            QoptStatus::Internal
        }
    }
}

/// Copies the most recent error message on this thread into `buf`
/// (NUL-terminated, truncated to `cap`). Returns the full message length.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (query mode).
#[no_mangle]
pub unsafe extern "C" fn qopt_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<QoptStatus, Error> {
    if out.is_null() {
        return Err(Error::Argument("output pointer is null".into()));
    }
    *out = value;
    Ok(QoptStatus::Ok)
}

unsafe fn model_ref<'a>(model: *const QoptModel) -> Result<&'a BoundModel, Error> {
    model
        .as_ref()
        .map(|m| &m.inner)
        .ok_or_else(|| Error::Argument("model handle is null".into()))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Error> {
    if s.is_null() {
        return Err(Error::Argument(format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Error::Argument(format!("{what} is not valid UTF-8")))
}

/// Parses a model from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qopt_model_from_json(
    json: *const c_char,
    out: *mut *mut QoptModel,
) -> QoptStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let inner = BoundModel::from_json(text)?;
        write_out(out, Box::into_raw(Box::new(QoptModel { inner })))
    })
}

/// Loads a built-in preset model (`p1`..`p6`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qopt_model_preset(
    name: *const c_char,
    out: *mut *mut QoptModel,
) -> QoptStatus {
    guard(|| {
        let name = str_arg(name, "preset name")?;
        let inner = presets::preset(name)?;
        write_out(out, Box::into_raw(Box::new(QoptModel { inner })))
    })
}

/// Frees a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be a pointer previously returned by a constructor, or null.
#[no_mangle]
pub unsafe extern "C" fn qopt_model_free(model: *mut QoptModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of coordinates of the model, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qopt_model_dimension(model: *const QoptModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dimension())
}

/// Evaluates the exponent `b` at a lattice index of length `len`.
///
/// # Safety
/// `nu` must point to `len` entries; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qopt_eval_b(
    model: *const QoptModel,
    nu: *const u32,
    len: usize,
    out: *mut f64,
) -> QoptStatus {
    guard(|| {
        let m = model_ref(model)?;
        if nu.is_null() {
            return Err(Error::Argument("nu is null".into()));
        }
        let idx = MultiIndex::new(std::slice::from_raw_parts(nu, len).to_vec());
        let b = m.eval_b_index(&idx)?;
        write_out(out, b)
    })
}

/// `sum over all indices of e^{-b}` (without the prefactor).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qopt_total_sum(
    model: *const QoptModel,
    tol: f64,
    out: *mut f64,
) -> QoptStatus {
    guard(|| {
        let m = model_ref(model)?;
        let (v, _) = tails::total_sum(m, tol)?;
        write_out(out, v)
    })
}

/// Exact truncation tail after the quasi-optimal set of cardinality `m`.
///
/// # Safety
/// `tail` must be valid; `err_bound` may be null.
#[no_mangle]
pub unsafe extern "C" fn qopt_exact_tail(
    model: *const QoptModel,
    m: u64,
    tol: f64,
    tail: *mut f64,
    err_bound: *mut f64,
) -> QoptStatus {
    guard(|| {
        let model = model_ref(model)?;
        let t = tails::exact_tail(model, m, tol)?;
        if !err_bound.is_null() {
            *err_bound = t.abs_error_bound;
        }
        write_out(tail, t.tail)
    })
}

/// Number of lattice indices with `b <= tau`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qopt_superlevel_count(
    model: *const QoptModel,
    tau: f64,
    out: *mut u64,
) -> QoptStatus {
    guard(|| {
        let m = model_ref(model)?;
        let c = index_sets::count_superlevel(m, tau, index_sets::DEFAULT_MEMBER_CEILING)?;
        write_out(out, c)
    })
}

/// Builds the quasi-optimal set of cardinality `m`. `indices` receives the
/// members row-major (`m * dimension` entries, order (b, |nu|, lex));
/// `b_values` receives `m` entries. Either may be null to skip.
///
/// # Safety
/// Non-null output buffers must have the stated capacities.
#[no_mangle]
pub unsafe extern "C" fn qopt_build_quasi_optimal(
    model: *const QoptModel,
    m: u64,
    indices: *mut u32,
    b_values: *mut f64,
) -> QoptStatus {
    guard(|| {
        let model = model_ref(model)?;
        let set = index_sets::build_quasi_optimal(model, m)?;
        let n = model.dimension();
        for (row, (nu, b)) in set.members().iter().enumerate() {
            if !indices.is_null() {
                std::ptr::copy_nonoverlapping(
                    nu.entries().as_ptr(),
                    indices.add(row * n),
                    n,
                );
            }
            if !b_values.is_null() {
                *b_values.add(row) = *b;
            }
        }
        Ok(QoptStatus::Ok)
    })
}

/// Analytic limiting-set volume, where the family has one.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qopt_volume_analytic(
    model: *const QoptModel,
    out: *mut f64,
) -> QoptStatus {
    guard(|| {
        let m = model_ref(model)?;
        let v = polytope::analytic_volume(m)?;
        write_out(out, v)
    })
}

/// Asymptotic upper tail estimate (set `relaxed` nonzero for the
/// `(N+1)/2`-weighted variant).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qopt_upper_asymptotic(
    m: u64,
    n: u32,
    volp: f64,
    epsilon: f64,
    relaxed: i32,
    out: *mut f64,
) -> QoptStatus {
    guard(|| {
        let v = estimates::upper_asymptotic(m, n, volp, epsilon, relaxed != 0)?;
        write_out(out, v)
    })
}

/// Asymptotic lower tail estimate.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qopt_lower_asymptotic(
    m: u64,
    n: u32,
    volp: f64,
    q: u32,
    out: *mut f64,
) -> QoptStatus {
    guard(|| {
        let v = estimates::lower_asymptotic(m, n, volp, q)?;
        write_out(out, v)
    })
}

/// Negative-order polylogarithm `Li_{-n}(z)` for `0 < z < 1`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qopt_polylog_neg(n: u32, z: f64, out: *mut f64) -> QoptStatus {
    guard(|| {
        let v = estimates::polylog_neg(n, z)?;
        write_out(out, v)
    })
}
