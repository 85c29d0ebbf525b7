//! C ABI for pmcycle.
//!
//! Scenarios and bilevel results are opaque handles released with the
//! matching `*_free` call. Every fallible call returns
//! a `PmcStatus`; on failure `pmc_last_error` describes the problem for
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pmcycle::baseline::{run_greedy_baseline, BaselineOptions};
use pmcycle::coordinator::{run_bilevel, BilevelOptions, BilevelResult, BoundaryAngles, CoordinatorError};
use pmcycle::draining::{solve_draining, verify_solution, DrainingOptions, DrainingProblem, VerifyOptions};
use pmcycle::io::{load_scenario, parse_scenario, LoadError};
use pmcycle::model::Scenario;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Validation = 4,
    Solver = 5,
    NotConverged = 6,
    Panic = 7,
}

/// Opaque validated scenario.
pub struct PmcScenario {
    inner: Scenario,
}

/// Opaque result of a bilevel run.
pub struct PmcBilevel {
    inner: BilevelResult,
}

/// Options for `pmc_run_bilevel`. Obtain defaults from
/// `pmc_bilevel_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PmcBilevelOptions {
    pub alpha0: f64,
    pub decay: f64,
    pub tol_grad: f64,
    pub tol_uncertainty: f64,
    pub max_cycles: usize,
    pub nodes: usize,
    pub dt: f64,
    pub coupling: bool,
}

/// One visit's local solution.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PmcLocalSolution {
    pub total_time: f64,
    pub inner_exit_time: f64,
    pub lambda_phi: [f64; 2],
    pub lambda_psi: [f64; 2],
    pub lambda_r: f64,
    /// All verification checks passed.
    pub verified: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: PmcStatus, message: impl Into<String>) -> PmcStatus {
    set_error(message);
    status
}

fn guard(f: impl FnOnce() -> PmcStatus) -> PmcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(PmcStatus::Panic, msg)
        }
    }
}

fn load_status(e: LoadError) -> PmcStatus {
    let status = match e {
        LoadError::Io { .. } => PmcStatus::InvalidArgument,
        LoadError::Parse { .. } => PmcStatus::Parse,
        LoadError::Invalid(_) => PmcStatus::Validation,
    };
    fail(status, e.to_string())
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, PmcStatus> {
    if s.is_null() {
        return Err(fail(PmcStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(PmcStatus::InvalidArgument, "string is not UTF-8"))
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next pmcycle call on the same thread.
#[no_mangle]
pub extern "C" fn pmc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pmc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses and validates scenario TOML text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmc_scenario_parse(text: *const c_char, out: *mut *mut PmcScenario) -> PmcStatus {
    guard(|| {
        if out.is_null() {
            return fail(PmcStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_scenario(text) {
            Ok(sc) => {
                *out = Box::into_raw(Box::new(PmcScenario { inner: sc }));
                PmcStatus::Ok
            }
            Err(e) => load_status(e),
        }
    })
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmc_scenario_load(path: *const c_char, out: *mut *mut PmcScenario) -> PmcStatus {
    guard(|| {
        if out.is_null() {
            return fail(PmcStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let path = match read_str(path) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match load_scenario(Path::new(path)) {
            Ok(sc) => {
                *out = Box::into_raw(Box::new(PmcScenario { inner: sc }));
                PmcStatus::Ok
            }
            Err(e) => load_status(e),
        }
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn pmc_scenario_free(scenario: *mut PmcScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of targets, 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmc_scenario_num_targets(scenario: *const PmcScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.num_targets())
}

/// Visits per cycle, 0 for a null handle.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmc_scenario_num_visits(scenario: *const PmcScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.num_visits())
}

/// Solves the draining problem of target `target_id` entered at polar angle
/// `phi` and left at inner-circle angle `psi`.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmc_solve_local(
    scenario: *const PmcScenario,
    target_id: u32,
    phi: f64,
    psi: f64,
    arrival_uncertainty: f64,
    nodes: usize,
    out: *mut PmcLocalSolution,
) -> PmcStatus {
    guard(|| {
        let (Some(sc), Some(out)) = (scenario.as_ref(), out.as_mut()) else {
            return fail(PmcStatus::NullPointer, "null scenario or output pointer");
        };
        let Some(index) = sc.inner.index_of_id(target_id) else {
            return fail(PmcStatus::InvalidArgument, format!("unknown target id {target_id}"));
        };
        let problem = match DrainingProblem::from_angles(sc.inner.target(index).clone(), phi, psi, arrival_uncertainty, nodes) {
            Ok(p) => p,
            Err(e) => return fail(PmcStatus::InvalidArgument, e.to_string()),
        };
        match solve_draining(&problem, None, &DrainingOptions::default()) {
            Ok(sol) => {
                let report = verify_solution(&sol, &problem, &VerifyOptions::for_problem(&problem));
                *out = PmcLocalSolution {
                    total_time: sol.total_time,
                    inner_exit_time: sol.inner_exit_time,
                    lambda_phi: [sol.lambda_phi.x, sol.lambda_phi.y],
                    lambda_psi: [sol.lambda_psi.x, sol.lambda_psi.y],
                    lambda_r: sol.lambda_r,
                    verified: report.passed(),
                };
                PmcStatus::Ok
            }
            Err(e) => fail(PmcStatus::Solver, e.to_string()),
        }
    })
}

#[no_mangle]
pub extern "C" fn pmc_bilevel_options_default() -> PmcBilevelOptions {
    let d = BilevelOptions::default();
    PmcBilevelOptions {
        alpha0: d.alpha0,
        decay: d.decay,
        tol_grad: d.tol_grad,
        tol_uncertainty: d.tol_uncertainty,
        max_cycles: d.max_cycles,
        nodes: d.nodes,
        dt: d.dt,
        coupling: d.include_uncertainty_coupling,
    }
}

/// Optimizes the boundary angles from their straight-line initialization.
/// A run that exhausts `max_cycles` still produces a handle and returns
/// `NotConverged`.
///
/// # Safety
/// `scenario` must be a live handle, `options` null (defaults) or valid, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmc_run_bilevel(
    scenario: *const PmcScenario,
    options: *const PmcBilevelOptions,
    out: *mut *mut PmcBilevel,
) -> PmcStatus {
    guard(|| {
        if out.is_null() {
            return fail(PmcStatus::NullPointer, "null output pointer");
        }
        *out = ptr::null_mut();
        let Some(sc) = scenario.as_ref() else {
            return fail(PmcStatus::NullPointer, "null scenario");
        };
        let o = options.as_ref().copied().unwrap_or_else(|| pmc_bilevel_options_default());
        let opts = BilevelOptions {
            alpha0: o.alpha0,
            decay: o.decay,
            tol_grad: o.tol_grad,
            tol_uncertainty: o.tol_uncertainty,
            max_cycles: o.max_cycles,
            include_uncertainty_coupling: o.coupling,
            nodes: o.nodes,
            dt: o.dt,
            draining: DrainingOptions::default(),
        };
        match run_bilevel(&sc.inner, &opts, None) {
            Ok(res) => {
                let converged = res.converged;
                *out = Box::into_raw(Box::new(PmcBilevel { inner: res }));
                if converged {
                    PmcStatus::Ok
                } else {
                    fail(PmcStatus::NotConverged, format!("no convergence within {} cycles", opts.max_cycles))
                }
            }
            Err(
                e @ (CoordinatorError::InvalidOptions(_)
                | CoordinatorError::InvalidAngles { .. }
                | CoordinatorError::TooFewVisits(_)),
            ) => fail(PmcStatus::InvalidArgument, e.to_string()),
            Err(e) => fail(PmcStatus::Solver, e.to_string()),
        }
    })
}

/// # Safety
/// `result` must be null or a handle from `pmc_run_bilevel`, freed once.
#[no_mangle]
pub unsafe extern "C" fn pmc_bilevel_free(result: *mut PmcBilevel) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Period of the last cycle, NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmc_bilevel_period(result: *const PmcBilevel) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.inner.period())
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmc_bilevel_cycles(result: *const PmcBilevel) -> usize {
    result.as_ref().map_or(0, |r| r.inner.cycles())
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pmc_bilevel_converged(result: *const PmcBilevel) -> bool {
    result.as_ref().is_some_and(|r| r.inner.converged)
}

/// Copies the final entrance and departure angles into `phi` and `psi`,
/// each of length `len`, which must equal the visits per cycle.
///
/// # Safety
/// `result` must be a live handle; `phi` and `psi` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pmc_bilevel_angles(result: *const PmcBilevel, phi: *mut f64, psi: *mut f64, len: usize) -> PmcStatus {
    guard(|| {
        let Some(r) = result.as_ref() else {
            return fail(PmcStatus::NullPointer, "null result");
        };
        if phi.is_null() || psi.is_null() {
            return fail(PmcStatus::NullPointer, "null angle buffer");
        }
        let BoundaryAngles { phi: p, psi: q } = &r.inner.angles;
        if len != p.len() {
            return fail(PmcStatus::InvalidArgument, format!("buffer length {len}, need {}", p.len()));
        }
        std::slice::from_raw_parts_mut(phi, len).copy_from_slice(p);
        std::slice::from_raw_parts_mut(psi, len).copy_from_slice(q);
        PmcStatus::Ok
    })
}

/// Steady-state period of the greedy policy.
///
/// # Safety
/// `scenario` must be a live handle and `period` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pmc_greedy_period(
    scenario: *const PmcScenario,
    dt: f64,
    max_cycles: usize,
    period: *mut f64,
) -> PmcStatus {
    guard(|| {
        let (Some(sc), Some(period)) = (scenario.as_ref(), period.as_mut()) else {
            return fail(PmcStatus::NullPointer, "null scenario or output pointer");
        };
        let options = BaselineOptions {
            dt,
            max_cycles,
            ..BaselineOptions::default()
        };
        match run_greedy_baseline(&sc.inner, &options) {
            Ok(res) => {
                *period = res.period;
                if res.converged {
                    PmcStatus::Ok
                } else {
                    fail(PmcStatus::NotConverged, "greedy cycle did not stabilize")
                }
            }
            Err(e) => fail(PmcStatus::InvalidArgument, e.to_string()),
        }
    })
}
