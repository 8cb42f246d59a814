//! C ABI over the chain laboratory.
//!
//! Conventions, uniform across the surface:
//! - every fallible function returns a status code (`CHAIN_LAB_OK` = 0) and
//!   writes its results through out-pointers;
//! - handles are opaque, created by `*_new`/`chain_lab_simulate` and
//!   released by the matching `*_free` (which accept null);
//! - a human-readable description of the most recent failure on the calling
//!   thread is available via [`chain_lab_last_error`];
//! - panics never unwind across the boundary; they surface as
//!   `CHAIN_LAB_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use chain_lab::chain::ChainParams;
use chain_lab::dynamics::{
    admissible_dt, default_horizon, exact_trajectory, fit_decay, theoretical_decay_rate,
    Trajectory,
};
use chain_lab::number_theory;
use chain_lab::rng::gaussian_state;
use chain_lab::spectral::{
    closed_form_spectrum, conserved_dimension_krylov, conserved_dimension_spectral, project,
    split_subspaces,
};
use chain_lab::ChainError;

/// Success.
pub const CHAIN_LAB_OK: i32 = 0;
/// A required pointer argument was null.
pub const CHAIN_LAB_NULL_POINTER: i32 = -1;
/// An argument was out of range or inconsistent.
pub const CHAIN_LAB_INVALID_ARGUMENT: i32 = -2;
/// A numerical routine failed (eigensolver, stability guard, fit, ...).
pub const CHAIN_LAB_NUMERICAL_ERROR: i32 = -3;
/// An internal invariant broke; the library caught a panic.
pub const CHAIN_LAB_PANIC: i32 = -4;

/// Evolve the raw Gaussian state.
pub const CHAIN_LAB_PROJECT_NONE: i32 = 0;
/// Project the initial state onto the conserved subspace first.
pub const CHAIN_LAB_PROJECT_CONSERVED: i32 = 1;
/// Project the initial state onto the decaying subspace first.
pub const CHAIN_LAB_PROJECT_DECAYING: i32 = 2;

/// Cap on `steps × (2N+3)` stored floats per simulated trajectory.
const MAX_TRAJECTORY_FLOATS: f64 = 2e8;

/// Opaque chain-parameter handle.
pub struct ChainLabParams(ChainParams);

/// Opaque sampled-trajectory handle.
pub struct ChainLabTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: i32, msg: &str) -> i32 {
    set_last_error(msg);
    status
}

fn fail_with(e: &ChainError) -> i32 {
    let status = match e {
        ChainError::InvalidParameter(_) | ChainError::DimensionMismatch(_) => {
            CHAIN_LAB_INVALID_ARGUMENT
        }
        _ => CHAIN_LAB_NUMERICAL_ERROR,
    };
    fail(status, &e.to_string())
}

fn guarded(f: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(CHAIN_LAB_PANIC, "internal panic"),
    }
}

/// Copies the most recent error message of this thread into `buffer`
/// (NUL-terminated, truncated to `capacity`).
///
/// Returns the full message length in bytes, excluding the terminator;
/// 0 means no error has been recorded yet. `buffer` may be null to query
/// the length alone.
#[no_mangle]
pub extern "C" fn chain_lab_last_error(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buffer, n);
                *buffer.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Conserved phase-space dimension `D_n(N) = gcd(N, 2n−1) − 1`.
#[no_mangle]
pub extern "C" fn chain_lab_dimension(particles: u64, site: u64, out_dimension: *mut u64) -> i32 {
    guarded(|| {
        if out_dimension.is_null() {
            return fail(CHAIN_LAB_NULL_POINTER, "out_dimension is null");
        }
        match number_theory::conserved_dimension(particles, site) {
            Ok(d) => {
                unsafe { *out_dimension = d };
                CHAIN_LAB_OK
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Site-averaged conserved dimension `S(N)`.
#[no_mangle]
pub extern "C" fn chain_lab_mean_dimension(particles: u64, out_mean: *mut f64) -> i32 {
    guarded(|| {
        if out_mean.is_null() {
            return fail(CHAIN_LAB_NULL_POINTER, "out_mean is null");
        }
        match number_theory::mean_dimension(particles) {
            Ok(s) => {
                unsafe { *out_mean = s };
                CHAIN_LAB_OK
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Cumulative average `(1/N₀) Σ_{N ≤ N₀} S(N)/N` and its ratio to `ln N₀`.
#[no_mangle]
pub extern "C" fn chain_lab_cumulative_average(
    n0: u64,
    out_cumulative: *mut f64,
    out_ratio_to_log: *mut f64,
) -> i32 {
    guarded(|| {
        if out_cumulative.is_null() || out_ratio_to_log.is_null() {
            return fail(CHAIN_LAB_NULL_POINTER, "output pointer is null");
        }
        match number_theory::cumulative_average(n0) {
            Ok(report) => {
                unsafe {
                    *out_cumulative = report.cumulative;
                    *out_ratio_to_log = report.ratio_to_log;
                }
                CHAIN_LAB_OK
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Creates a chain-parameter handle; all stiffnesses and the friction must
/// be positive and `1 ≤ damped_site ≤ particles`. Free with
/// [`chain_lab_params_free`].
#[no_mangle]
pub extern "C" fn chain_lab_params_new(
    particles: u64,
    damped_site: u64,
    alpha: f64,
    omega0: f64,
    omega1: f64,
    out_params: *mut *mut ChainLabParams,
) -> i32 {
    guarded(|| {
        if out_params.is_null() {
            return fail(CHAIN_LAB_NULL_POINTER, "out_params is null");
        }
        if particles > usize::MAX as u64 || damped_site > usize::MAX as u64 {
            return fail(CHAIN_LAB_INVALID_ARGUMENT, "particle count out of range");
        }
        match ChainParams::new(
            particles as usize,
            damped_site as usize,
            alpha,
            omega0,
            omega1,
        ) {
            Ok(p) => {
                unsafe { *out_params = Box::into_raw(Box::new(ChainLabParams(p))) };
                CHAIN_LAB_OK
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Releases a parameter handle; accepts null.
#[no_mangle]
pub extern "C" fn chain_lab_params_free(params: *mut ChainLabParams) {
    if !params.is_null() {
        drop(unsafe { Box::from_raw(params) });
    }
}

unsafe fn params_ref<'a>(params: *const ChainLabParams) -> Option<&'a ChainParams> {
    params.as_ref().map(|p| &p.0)
}

/// Conserved dimension by the spectral route (exact congruence count).
#[no_mangle]
pub extern "C" fn chain_lab_dimension_spectral(
    params: *const ChainLabParams,
    out_dimension: *mut u64,
) -> i32 {
    guarded(|| {
        let p = match unsafe { params_ref(params) } {
            Some(p) => p,
            None => return fail(CHAIN_LAB_NULL_POINTER, "params is null"),
        };
        if out_dimension.is_null() {
            return fail(CHAIN_LAB_NULL_POINTER, "out_dimension is null");
        }
        unsafe { *out_dimension = conserved_dimension_spectral(p) as u64 };
        CHAIN_LAB_OK
    })
}

/// Conserved dimension by the Krylov route (`2N − 2·rank`).
#[no_mangle]
pub extern "C" fn chain_lab_dimension_krylov(
    params: *const ChainLabParams,
    out_dimension: *mut u64,
) -> i32 {
    guarded(|| {
        let p = match unsafe { params_ref(params) } {
            Some(p) => p,
            None => return fail(CHAIN_LAB_NULL_POINTER, "params is null"),
        };
        if out_dimension.is_null() {
            return fail(CHAIN_LAB_NULL_POINTER, "out_dimension is null");
        }
        match conserved_dimension_krylov(p) {
            Ok(d) => {
                unsafe { *out_dimension = d as u64 };
                CHAIN_LAB_OK
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Writes the `N` closed-form stiffness eigenvalues, ascending, into
/// `out_eigenvalues`; `capacity` must be at least `N`.
#[no_mangle]
pub extern "C" fn chain_lab_spectrum(
    params: *const ChainLabParams,
    out_eigenvalues: *mut f64,
    capacity: usize,
) -> i32 {
    guarded(|| {
        let p = match unsafe { params_ref(params) } {
            Some(p) => p,
            None => return fail(CHAIN_LAB_NULL_POINTER, "params is null"),
        };
        if out_eigenvalues.is_null() {
            return fail(CHAIN_LAB_NULL_POINTER, "out_eigenvalues is null");
        }
        if capacity < p.particles {
            return fail(
                CHAIN_LAB_INVALID_ARGUMENT,
                "capacity is smaller than the particle count",
            );
        }
        let spectrum = closed_form_spectrum(p);
        unsafe {
            std::ptr::copy_nonoverlapping(
                spectrum.eigenvalues.as_ptr(),
                out_eigenvalues,
                p.particles,
            );
        }
        CHAIN_LAB_OK
    })
}

/// Theoretical decay rate `c₂ = −2·max Re λ` of the drift restricted to the
/// decaying subspace.
#[no_mangle]
pub extern "C" fn chain_lab_decay_rate(params: *const ChainLabParams, out_rate: *mut f64) -> i32 {
    guarded(|| {
        let p = match unsafe { params_ref(params) } {
            Some(p) => p,
            None => return fail(CHAIN_LAB_NULL_POINTER, "params is null"),
        };
        if out_rate.is_null() {
            return fail(CHAIN_LAB_NULL_POINTER, "out_rate is null");
        }
        let result = split_subspaces(p, &closed_form_spectrum(p))
            .and_then(|split| theoretical_decay_rate(p, &split));
        match result {
            Ok(c2) => {
                unsafe { *out_rate = c2 };
                CHAIN_LAB_OK
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Evolves a seeded Gaussian state by exact propagation and returns a
/// trajectory handle (free with [`chain_lab_trajectory_free`]).
///
/// `t_end ≤ 0` selects the default horizon `40/c₂`; `dt ≤ 0` selects the
/// default sampling step `0.1/√λ_max`. `project` is one of the
/// `CHAIN_LAB_PROJECT_*` constants.
#[no_mangle]
pub extern "C" fn chain_lab_simulate(
    params: *const ChainLabParams,
    seed: u64,
    t_end: f64,
    dt: f64,
    project_mode: i32,
    out_trajectory: *mut *mut ChainLabTrajectory,
) -> i32 {
    guarded(|| {
        let p = match unsafe { params_ref(params) } {
            Some(p) => p,
            None => return fail(CHAIN_LAB_NULL_POINTER, "params is null"),
        };
        if out_trajectory.is_null() {
            return fail(CHAIN_LAB_NULL_POINTER, "out_trajectory is null");
        }
        if !(CHAIN_LAB_PROJECT_NONE..=CHAIN_LAB_PROJECT_DECAYING).contains(&project_mode) {
            return fail(CHAIN_LAB_INVALID_ARGUMENT, "unknown projection mode");
        }

        let run = || -> Result<Trajectory, ChainError> {
            let split = split_subspaces(p, &closed_form_spectrum(p))?;
            let c2 = theoretical_decay_rate(p, &split)?;
            let t_end = if t_end > 0.0 {
                t_end
            } else {
                default_horizon(c2)
            };
            let dt = if dt > 0.0 { dt } else { admissible_dt(p) };
            let floats = (t_end / dt).ceil().max(1.0) * (2 * p.particles + 3) as f64;
            if !floats.is_finite() || floats > MAX_TRAJECTORY_FLOATS {
                return Err(ChainError::InvalidParameter(format!(
                    "trajectory would hold ~{floats:.1e} values; raise dt or lower t_end"
                )));
            }
            let raw = gaussian_state(p.particles, seed);
            let psi0 = match project_mode {
                CHAIN_LAB_PROJECT_CONSERVED => project(&raw, &split)?.0,
                CHAIN_LAB_PROJECT_DECAYING => project(&raw, &split)?.1,
                _ => raw,
            };
            exact_trajectory(p, &psi0, t_end, dt)
        };
        match run() {
            Ok(traj) => {
                unsafe { *out_trajectory = Box::into_raw(Box::new(ChainLabTrajectory(traj))) };
                CHAIN_LAB_OK
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Number of samples in a trajectory; 0 for null.
#[no_mangle]
pub extern "C" fn chain_lab_trajectory_len(trajectory: *const ChainLabTrajectory) -> usize {
    unsafe { trajectory.as_ref() }.map_or(0, |t| t.0.len())
}

/// Borrowed pointer to the sample times (length [`chain_lab_trajectory_len`]);
/// valid until the handle is freed. Null for null input.
#[no_mangle]
pub extern "C" fn chain_lab_trajectory_times(trajectory: *const ChainLabTrajectory) -> *const f64 {
    unsafe { trajectory.as_ref() }.map_or(std::ptr::null(), |t| t.0.times.as_ptr())
}

/// Borrowed pointer to the sampled energies `H(t)`.
#[no_mangle]
pub extern "C" fn chain_lab_trajectory_energies(
    trajectory: *const ChainLabTrajectory,
) -> *const f64 {
    unsafe { trajectory.as_ref() }.map_or(std::ptr::null(), |t| t.0.energies.as_ptr())
}

/// Borrowed pointer to the sampled dissipation powers `−αpₙ²(t)`.
#[no_mangle]
pub extern "C" fn chain_lab_trajectory_powers(
    trajectory: *const ChainLabTrajectory,
) -> *const f64 {
    unsafe { trajectory.as_ref() }.map_or(std::ptr::null(), |t| t.0.powers.as_ptr())
}

/// Log-linear decay fit of the trajectory's trailing window
/// `[skip_fraction·t_end, t_end]`; writes the rate, prefactor and r².
#[no_mangle]
pub extern "C" fn chain_lab_trajectory_fit(
    trajectory: *const ChainLabTrajectory,
    skip_fraction: f64,
    out_c2: *mut f64,
    out_c1: *mut f64,
    out_r_squared: *mut f64,
) -> i32 {
    guarded(|| {
        let traj = match unsafe { trajectory.as_ref() } {
            Some(t) => &t.0,
            None => return fail(CHAIN_LAB_NULL_POINTER, "trajectory is null"),
        };
        if out_c2.is_null() || out_c1.is_null() || out_r_squared.is_null() {
            return fail(CHAIN_LAB_NULL_POINTER, "output pointer is null");
        }
        match fit_decay(traj, skip_fraction) {
            Ok(fit) => {
                unsafe {
                    *out_c2 = fit.c2_hat;
                    *out_c1 = fit.c1_hat;
                    *out_r_squared = fit.r_squared;
                }
                CHAIN_LAB_OK
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// Releases a trajectory handle; accepts null.
#[no_mangle]
pub extern "C" fn chain_lab_trajectory_free(trajectory: *mut ChainLabTrajectory) {
    if !trajectory.is_null() {
        drop(unsafe { Box::from_raw(trajectory) });
    }
}
