// SPDX-License-Identifier: Apache-2.0

//! C ABI over `paulidiag`.
//!
//! Objects cross the boundary as opaque handles created by `pd_*` functions
//! and released with the matching `*_free`. Every fallible call returns a
//! [`PdStatus`]; on failure the message is available from
//! [`pd_last_error`] on the same thread until the next failing call.
//! Strings returned by the library are released with [`pd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use paulidiag::models::{warm_start_from_dense, ModelSpec, WARM_START_PRUNE_TOL};
use paulidiag::optimizer::{run_gd, run_rcd};
use paulidiag::verify::frobenius_error;
use paulidiag::{CostModel, Error, KParams, OptConfig, PauliSum};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    DimensionMismatch = 5,
    RadialCollapse = 6,
    DenseInfeasible = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PdAlgorithm {
    Gd = 0,
    Rcd = 1,
}

/// Opaque Hamiltonian.
pub struct PdHamiltonian(PauliSum);

/// Opaque ansatz parameters.
pub struct PdParams(KParams);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PdStatus {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::AmbiguousAssignment(_) => {
            PdStatus::InvalidArgument
        }
        Error::Parse { .. } | Error::Format { .. } | Error::Json(_) => PdStatus::Parse,
        Error::DimensionMismatch { .. } => PdStatus::DimensionMismatch,
        Error::RadialCollapse { .. } => PdStatus::RadialCollapse,
        Error::DenseInfeasible { .. } => PdStatus::DenseInfeasible,
        Error::Io(_) => PdStatus::Io,
    }
}

struct Fail(PdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside paulidiag".into());
            PdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(PdStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(PdStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(PdStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(PdStatus::NullPointer, format!("{name} is null")))
}

fn json_error(e: serde_json::Error) -> Fail {
    Fail(PdStatus::Parse, e.to_string())
}

/// Message of the last failure on this thread, or null. Owned by the
/// library; valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn pd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a Hamiltonian in the text format (`<coeff> <word>` per line).
///
/// # Safety
/// `text` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_hamiltonian_parse(
    text: *const c_char,
    out: *mut *mut PdHamiltonian,
) -> PdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let h = PauliSum::parse_text(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(PdHamiltonian(h)));
        Ok(())
    })
}

/// Builds a model Hamiltonian from a JSON model spec such as
/// `{"family": "xxz", "n": 4, "delta": 1.0}`.
///
/// # Safety
/// `spec_json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_hamiltonian_from_model(
    spec_json: *const c_char,
    out: *mut *mut PdHamiltonian,
) -> PdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec: ModelSpec =
            serde_json::from_str(str_arg(spec_json, "spec_json")?).map_err(json_error)?;
        *out = Box::into_raw(Box::new(PdHamiltonian(spec.build()?.h)));
        Ok(())
    })
}

/// # Safety
/// `h` is a valid handle.
#[no_mangle]
pub unsafe extern "C" fn pd_hamiltonian_num_qubits(h: *const PdHamiltonian) -> usize {
    h.as_ref().map_or(0, |h| h.0.n())
}

/// # Safety
/// `h` is a valid handle.
#[no_mangle]
pub unsafe extern "C" fn pd_hamiltonian_num_terms(h: *const PdHamiltonian) -> usize {
    h.as_ref().map_or(0, |h| h.0.len())
}

/// Text form of the Hamiltonian; free with [`pd_string_free`].
///
/// # Safety
/// `h` is a valid handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_hamiltonian_to_text(
    h: *const PdHamiltonian,
    out: *mut *mut c_char,
) -> PdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let h = ref_arg(h, "h")?;
        *out = CString::new(h.0.to_text())
            .expect("text has no nul")
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `h` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pd_hamiltonian_free(h: *mut PdHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Parameters from their JSON form.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_params_from_json(
    json: *const c_char,
    out: *mut *mut PdParams,
) -> PdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let kp: KParams = serde_json::from_str(str_arg(json, "json")?).map_err(json_error)?;
        *out = Box::into_raw(Box::new(PdParams(kp)));
        Ok(())
    })
}

/// JSON form of the parameters; free with [`pd_string_free`].
///
/// # Safety
/// `p` is a valid handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_params_to_json(p: *const PdParams, out: *mut *mut c_char) -> PdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = ref_arg(p, "params")?;
        let s = serde_json::to_string(&p.0).map_err(json_error)?;
        *out = CString::new(s).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// Eigenvector matrix of `reference` expanded in Pauli strings; a
/// non-positive `prune_tol` selects the default.
///
/// # Safety
/// `reference` is a valid handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_params_warm_start(
    reference: *const PdHamiltonian,
    prune_tol: f64,
    out: *mut *mut PdParams,
) -> PdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let h = ref_arg(reference, "reference")?;
        let tol = if prune_tol > 0.0 {
            prune_tol
        } else {
            WARM_START_PRUNE_TOL
        };
        *out = Box::into_raw(Box::new(PdParams(warm_start_from_dense(&h.0, tol)?)));
        Ok(())
    })
}

/// Number of ansatz strings `d`.
///
/// # Safety
/// `p` is a valid handle.
#[no_mangle]
pub unsafe extern "C" fn pd_params_dim(p: *const PdParams) -> usize {
    p.as_ref().map_or(0, |p| p.0.d())
}

/// # Safety
/// `p` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pd_params_free(p: *mut PdParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Off-diagonal cost `f` and orthogonality penalty `Φ`.
///
/// # Safety
/// Handles are valid; outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn pd_eval(
    h: *const PdHamiltonian,
    p: *const PdParams,
    out_f: *mut f64,
    out_penalty: *mut f64,
) -> PdStatus {
    guard(|| {
        let (out_f, out_penalty) = (
            out_arg(out_f, "out_f")?,
            out_arg(out_penalty, "out_penalty")?,
        );
        let (h, p) = (ref_arg(h, "h")?, ref_arg(p, "params")?);
        let model = CostModel::new(&h.0, p.0.ansatz())?;
        let rep = model.eval(&p.0)?;
        *out_f = rep.f_value;
        *out_penalty = rep.penalty;
        Ok(())
    })
}

/// `‖H − H̃‖_F` by dense reconstruction.
///
/// # Safety
/// Handles are valid; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_frobenius_error(
    h: *const PdHamiltonian,
    p: *const PdParams,
    out: *mut f64,
) -> PdStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = frobenius_error(&ref_arg(h, "h")?.0, &ref_arg(p, "params")?.0)?;
        Ok(())
    })
}

/// Minimizes the cost from `start` (normalized first). `opt_json` holds
/// optimizer settings as JSON, or null for the defaults. Writes a new
/// handle with the final parameters, the final total cost and the number
/// of steps taken.
///
/// # Safety
/// Handles are valid; `opt_json` is null or NUL-terminated; outputs are
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pd_diagonalize(
    h: *const PdHamiltonian,
    start: *const PdParams,
    algorithm: PdAlgorithm,
    opt_json: *const c_char,
    out_params: *mut *mut PdParams,
    out_cost: *mut f64,
    out_iterations: *mut usize,
) -> PdStatus {
    guard(|| {
        let out_params = out_arg(out_params, "out_params")?;
        let out_cost = out_arg(out_cost, "out_cost")?;
        let out_iterations = out_arg(out_iterations, "out_iterations")?;
        let (h, start) = (ref_arg(h, "h")?, ref_arg(start, "start")?);
        let cfg: OptConfig = if opt_json.is_null() {
            OptConfig::default()
        } else {
            serde_json::from_str(str_arg(opt_json, "opt_json")?).map_err(json_error)?
        };
        let kp0 = start.0.normalized()?;
        let trace = match algorithm {
            PdAlgorithm::Gd => run_gd(&h.0, &kp0, &cfg)?,
            PdAlgorithm::Rcd => run_rcd(&h.0, &kp0, &cfg)?,
        };
        *out_cost = trace.last().f_total;
        *out_iterations = trace.iterations();
        *out_params = Box::into_raw(Box::new(PdParams(trace.final_params)));
        Ok(())
    })
}
