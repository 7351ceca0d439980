//! C ABI for the supply planner.
//!
//! Every fallible call returns a [`SupplyStatus`]. On failure the message is
//! available from [`supply_last_error_message`] on the same thread until the
//! next failing call. Strings returned by the library must be released with
//! [`supply_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::{c_char, c_double, size_t};
use supply_core::energy::{self, EnergyParams, Turn};
use supply_core::error::PlanError;
use supply_core::report::PlanDocument;
use supply_core::rf_link::{self, McsTable};
use supply_core::scenario::{self, PlannerConfig, Scenario};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupplyStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Infeasible = 3,
    Parse = 4,
    Io = 5,
    Internal = 6,
}

/// Planner configuration: energy model, link budget and MCS table.
pub struct SupplyPlanner {
    config: PlannerConfig,
    altitude: Option<f64>,
}

/// A finished plan.
pub struct SupplyPlan {
    doc: PlanDocument,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: SupplyStatus, msg: impl Into<String>) -> SupplyStatus {
    set_error(msg);
    status
}

fn status_of(err: &PlanError) -> SupplyStatus {
    if err.is_infeasible() {
        return SupplyStatus::Infeasible;
    }
    match err {
        PlanError::Parse(_) | PlanError::Json(_) | PlanError::Csv(_) => SupplyStatus::Parse,
        PlanError::Io(_) => SupplyStatus::Io,
        PlanError::Domain(_) | PlanError::RateUnreachable { .. } => SupplyStatus::InvalidArgument,
        PlanError::Scenario { source, .. } => status_of(source),
        _ => SupplyStatus::Internal,
    }
}

fn from_error(err: PlanError) -> SupplyStatus {
    fail(status_of(&err), err.to_string())
}

/// Runs `f`, converting panics into `Internal`.
fn guard(f: impl FnOnce() -> SupplyStatus) -> SupplyStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SupplyStatus::Internal, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, SupplyStatus> {
    if p.is_null() {
        return Err(fail(SupplyStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SupplyStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

fn into_c_string(s: String, out: *mut *mut c_char) -> SupplyStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            SupplyStatus::Ok
        }
        Err(_) => fail(SupplyStatus::Internal, "string contains an interior NUL"),
    }
}

macro_rules! deref {
    ($p:expr, $what:literal) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(SupplyStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr, $what:literal) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(SupplyStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! check_out {
    ($p:expr) => {
        if $p.is_null() {
            return fail(SupplyStatus::NullPointer, "output pointer is null");
        }
    };
}

/// Creates a planner with the built-in parameter set. Free with
/// [`supply_planner_free`].
#[no_mangle]
pub extern "C" fn supply_planner_new() -> *mut SupplyPlanner {
    Box::into_raw(Box::new(SupplyPlanner {
        config: PlannerConfig::default(),
        altitude: None,
    }))
}

/// # Safety
/// `planner` must come from [`supply_planner_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn supply_planner_free(planner: *mut SupplyPlanner) {
    if !planner.is_null() {
        drop(Box::from_raw(planner));
    }
}

/// Loads UAV parameters from a `key = value` file.
///
/// # Safety
/// `planner` must be valid; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn supply_planner_load_params(planner: *mut SupplyPlanner, path: *const c_char) -> SupplyStatus {
    guard(|| {
        let planner = deref_mut!(planner, "planner");
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match EnergyParams::from_path(path) {
            Ok(p) => {
                planner.config.params = p;
                SupplyStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Loads an MCS table CSV.
///
/// # Safety
/// `planner` must be valid; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn supply_planner_load_mcs(planner: *mut SupplyPlanner, path: *const c_char) -> SupplyStatus {
    guard(|| {
        let planner = deref_mut!(planner, "planner");
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match McsTable::from_path(path) {
            Ok(t) => {
                planner.config.table = t;
                SupplyStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Overrides the scenario altitude. NaN restores the scenario's own value.
///
/// # Safety
/// `planner` must be valid.
#[no_mangle]
pub unsafe extern "C" fn supply_planner_set_altitude(planner: *mut SupplyPlanner, altitude: c_double) -> SupplyStatus {
    let planner = deref_mut!(planner, "planner");
    if altitude.is_nan() {
        planner.altitude = None;
    } else if altitude.is_finite() && altitude > 0.0 {
        planner.altitude = Some(altitude);
    } else {
        return fail(
            SupplyStatus::InvalidArgument,
            format!("altitude must be positive, got {altitude}"),
        );
    }
    SupplyStatus::Ok
}

/// Sets the SNR margin applied on top of every MCS threshold, dB.
///
/// # Safety
/// `planner` must be valid.
#[no_mangle]
pub unsafe extern "C" fn supply_planner_set_margin(planner: *mut SupplyPlanner, margin_db: c_double) -> SupplyStatus {
    let planner = deref_mut!(planner, "planner");
    let mut budget = planner.config.budget;
    budget.snr_margin = margin_db;
    if let Err(e) = budget.validate() {
        return from_error(e);
    }
    planner.config.budget = budget;
    SupplyStatus::Ok
}

/// Plans a scenario given as JSON. On success `*out` receives a plan to be
/// released with [`supply_plan_free`].
///
/// # Safety
/// `planner` must be valid, `scenario_json` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn supply_planner_plan_json(
    planner: *const SupplyPlanner,
    scenario_json: *const c_char,
    out: *mut *mut SupplyPlan,
) -> SupplyStatus {
    guard(|| {
        let planner = deref!(planner, "planner");
        check_out!(out);
        *out = ptr::null_mut();
        let text = match str_arg(scenario_json, "scenario_json") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let mut sc = match Scenario::from_json(text) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        if let Some(z) = planner.altitude {
            sc.altitude = z;
        }
        match scenario::run_pipeline(&sc, &planner.config) {
            Ok(plan) => {
                let doc = PlanDocument::new(&sc, plan);
                *out = Box::into_raw(Box::new(SupplyPlan { doc }));
                SupplyStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `plan` must come from [`supply_planner_plan_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn supply_plan_free(plan: *mut SupplyPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// # Safety
/// `plan` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn supply_plan_fap_count(plan: *const SupplyPlan, out: *mut size_t) -> SupplyStatus {
    let plan = deref!(plan, "plan");
    check_out!(out);
    *out = plan.doc.faps.len();
    SupplyStatus::Ok
}

/// Planned and all-hover energy per hour, J.
///
/// # Safety
/// `plan` must be valid and both outputs writable.
#[no_mangle]
pub unsafe extern "C" fn supply_plan_energies(
    plan: *const SupplyPlan,
    supply_j: *mut c_double,
    hover_j: *mut c_double,
) -> SupplyStatus {
    let plan = deref!(plan, "plan");
    check_out!(supply_j);
    check_out!(hover_j);
    *supply_j = plan.doc.totals.supply_energy;
    *hover_j = plan.doc.totals.hover_energy;
    SupplyStatus::Ok
}

/// Serializes the plan document. Release `*out` with [`supply_string_free`].
///
/// # Safety
/// `plan` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn supply_plan_to_json(plan: *const SupplyPlan, out: *mut *mut c_char) -> SupplyStatus {
    let plan = deref!(plan, "plan");
    check_out!(out);
    into_c_string(plan.doc.to_json(), out)
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn supply_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn supply_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// SNR in dB at `distance` metres under the planner's link budget.
///
/// # Safety
/// `planner` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn supply_snr_db(
    planner: *const SupplyPlanner,
    distance: c_double,
    out: *mut c_double,
) -> SupplyStatus {
    let planner = deref!(planner, "planner");
    check_out!(out);
    match rf_link::snr(&planner.config.budget, distance) {
        Ok(v) => {
            *out = v;
            SupplyStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Largest link distance serving `required_rate` Mbit/s with `n_sharing`
/// users on the channel.
///
/// # Safety
/// `planner` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn supply_max_distance(
    planner: *const SupplyPlanner,
    required_rate: c_double,
    n_sharing: size_t,
    out: *mut c_double,
) -> SupplyStatus {
    let planner = deref!(planner, "planner");
    check_out!(out);
    let c = &planner.config;
    match rf_link::max_distance_for_rate(&c.budget, &c.table, required_rate, n_sharing) {
        Ok(v) => {
            *out = v;
            SupplyStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Propulsion power, W, at `speed` m/s on a turn of `radius` m. An infinite
/// radius means straight flight.
///
/// # Safety
/// `planner` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn supply_circular_power(
    planner: *const SupplyPlanner,
    speed: c_double,
    radius: c_double,
    out: *mut c_double,
) -> SupplyStatus {
    let planner = deref!(planner, "planner");
    check_out!(out);
    let turn = if radius == f64::INFINITY {
        Turn::Straight
    } else {
        Turn::Radius(radius)
    };
    match energy::circular_power(&planner.config.params, speed, turn) {
        Ok(v) => {
            *out = v;
            SupplyStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Energy per hour of hovering, J.
///
/// # Safety
/// `planner` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn supply_hover_energy_per_hour(
    planner: *const SupplyPlanner,
    out: *mut c_double,
) -> SupplyStatus {
    let planner = deref!(planner, "planner");
    check_out!(out);
    *out = energy::hover_energy_per_hour(&planner.config.params);
    SupplyStatus::Ok
}
