//! Time evolution under `ψ̇ = Aψ` and the energy bookkeeping around it.
//!
//! Two propagation routes with disjoint failure modes: a fixed-step
//! classical Runge–Kutta integrator (cheap, order `dt⁴`, guarded by a step
//! limit against the fastest mode) and exact propagation through the dense
//! matrix exponential (scaling-and-squaring), which conserves the flow to
//! roundoff and is the reference whenever conservation tighter than the
//! integrator's drift is asserted. On top of these: the dissipation
//! identity `dH/dt = −αpₙ²` checked by central differences, the predicted
//! decay rate from the spectral abscissa of the drift restricted to the
//! decaying subspace, and a log-linear fit of the observed energy decay.

use std::io::Write;

use nalgebra::DVector;

use crate::chain::{
    build_drift, build_stiffness, energy, power_dissipated, ChainParams, DriftMatrix, PhaseState,
};
use crate::error::{ChainError, Result};
use crate::spectral::SubspaceSplit;
use crate::tolerances::{DT_GUARD, TAU_EIG};

/// Hard cap on integration steps (time and memory runaway guard).
const MAX_STEPS: usize = 100_000_000;

/// Sampled evolution of one state: times, states, and derived scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sample times, ascending, uniformly spaced.
    pub times: Vec<f64>,
    /// State at each sample time.
    pub states: Vec<PhaseState>,
    /// `H(ψ(t))` at each sample.
    pub energies: Vec<f64>,
    /// Instantaneous drain `−αpₙ²(t)` at each sample.
    pub powers: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial_energy(&self) -> f64 {
        self.energies.first().copied().unwrap_or(0.0)
    }

    pub fn final_energy(&self) -> f64 {
        self.energies.last().copied().unwrap_or(0.0)
    }

    /// Writes the trajectory as CSV: `t,H,power` and optionally the full
    /// coordinates `q_1..q_N,p_1..p_N`. Floats carry 17 significant digits
    /// so identical runs serialize byte-identically.
    pub fn write_csv<W: Write>(&self, mut w: W, include_coords: bool) -> Result<()> {
        write!(w, "t,H,power")?;
        if include_coords {
            let n = self.states.first().map(|s| s.particles()).unwrap_or(0);
            for i in 1..=n {
                write!(w, ",q_{i}")?;
            }
            for i in 1..=n {
                write!(w, ",p_{i}")?;
            }
        }
        writeln!(w)?;
        for j in 0..self.len() {
            write!(
                w,
                "{:.16e},{:.16e},{:.16e}",
                self.times[j], self.energies[j], self.powers[j]
            )?;
            if include_coords {
                for v in self.states[j].q.iter().chain(self.states[j].p.iter()) {
                    write!(w, ",{v:.16e}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Log-linear fit of an energy decay, `H(t) ≈ c₁·exp(−c₂t)` on the window.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Fitted decay rate (negated slope of `log H`).
    pub c2_hat: f64,
    /// Fitted prefactor.
    pub c1_hat: f64,
    /// Goodness of the log-linear fit.
    pub r_squared: f64,
    /// First and last sample time actually used.
    pub window: (f64, f64),
}

/// Largest step satisfying the stability guard `dt·√λ_max ≤ 0.1`.
pub fn admissible_dt(params: &ChainParams) -> f64 {
    DT_GUARD / params.lambda_max().sqrt()
}

/// Default sampling step: the guard limit itself.
pub fn default_time_step(params: &ChainParams) -> f64 {
    admissible_dt(params)
}

/// Default decay-experiment horizon `40/c₂` for a given theoretical rate.
pub fn default_horizon(c2_theory: f64) -> f64 {
    40.0 / c2_theory
}

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(ChainError::InvalidParameter(format!(
            "t_end must be positive and finite, got {t_end}"
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ChainError::InvalidParameter(format!(
            "dt must be positive and finite, got {dt}"
        )));
    }
    // whole steps covering the horizon; a hair of slack so t_end = k·dt
    // does not round up to an extra step
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0);
    if steps > MAX_STEPS as f64 {
        return Err(ChainError::InvalidParameter(format!(
            "horizon needs {steps:.1e} steps, cap is {MAX_STEPS:.1e}; raise dt or lower t_end"
        )));
    }
    Ok(steps as usize)
}

fn check_state_dims(params: &ChainParams, psi0: &PhaseState) -> Result<()> {
    if psi0.particles() != params.particles {
        return Err(ChainError::DimensionMismatch(format!(
            "state has N = {}, params have N = {}",
            psi0.particles(),
            params.particles
        )));
    }
    Ok(())
}

/// Fixed-step classical 4th-order integration of `ψ̇ = Aψ`, sampled at
/// every step.
///
/// Rejects steps violating `dt·√λ_max ≤ 0.1` (reporting the admissible
/// step) and aborts if the state leaves the representable range. The
/// right-hand side uses the tridiagonal stiffness product, so one step
/// costs O(N).
pub fn integrate(
    params: &ChainParams,
    psi0: &PhaseState,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    check_state_dims(params, psi0)?;
    let steps = step_count(t_end, dt)?;
    let guard = dt * params.lambda_max().sqrt();
    if guard > DT_GUARD * (1.0 + 1e-12) {
        return Err(ChainError::StepSize(format!(
            "dt·√λ_max = {guard:.3e} exceeds {DT_GUARD}; largest admissible dt is {:.6e}",
            admissible_dt(params)
        )));
    }

    let n = params.particles;
    let dim = 2 * n;
    let site = params.damped_site - 1;
    let stiff = build_stiffness(params);
    let damping = params.damping;

    let deriv = |y: &[f64], out: &mut [f64]| {
        let (q, p) = y.split_at(n);
        let (dq, dp) = out.split_at_mut(n);
        dq.copy_from_slice(p);
        stiff.apply_to(q, dp);
        for v in dp.iter_mut() {
            *v = -*v;
        }
        dp[site] -= damping * p[site];
    };

    let mut y: Vec<f64> = psi0.to_vector().as_slice().to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut work = vec![0.0; dim];

    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        energies: Vec::with_capacity(steps + 1),
        powers: Vec::with_capacity(steps + 1),
    };

    for j in 0..=steps {
        let t = j as f64 * dt;
        let state = PhaseState {
            q: DVector::from_column_slice(&y[..n]),
            p: DVector::from_column_slice(&y[n..]),
        };
        let h = energy(&state, &stiff).expect("dimensions checked");
        if !h.is_finite() {
            return Err(ChainError::StabilityViolation(format!(
                "non-finite energy at t = {t:.6e} (step {j})"
            )));
        }
        traj.times.push(t);
        traj.powers
            .push(power_dissipated(&state, params).expect("dimensions checked"));
        traj.energies.push(h);
        traj.states.push(state);

        if j == steps {
            break;
        }
        deriv(&y, &mut k1);
        for i in 0..dim {
            work[i] = y[i] + 0.5 * dt * k1[i];
        }
        deriv(&work, &mut k2);
        for i in 0..dim {
            work[i] = y[i] + 0.5 * dt * k2[i];
        }
        deriv(&work, &mut k3);
        for i in 0..dim {
            work[i] = y[i] + dt * k3[i];
        }
        deriv(&work, &mut k4);
        for i in 0..dim {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(traj)
}

/// Exact propagation `ψ(t) = e^{tA}ψ₀` by dense scaling-and-squaring.
pub fn exact_propagate(drift: &DriftMatrix, psi0: &PhaseState, t: f64) -> Result<PhaseState> {
    if psi0.particles() != drift.particles() {
        return Err(ChainError::DimensionMismatch(format!(
            "state has N = {}, drift has N = {}",
            psi0.particles(),
            drift.particles()
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(ChainError::InvalidParameter(format!(
            "propagation time must be finite and >= 0, got {t}"
        )));
    }
    if t == 0.0 {
        return Ok(psi0.clone());
    }
    let propagator = (drift.as_matrix() * t).exp();
    let out = &propagator * psi0.to_vector();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(ChainError::NonFinite(format!(
            "matrix exponential at t = {t:.6e} produced non-finite entries"
        )));
    }
    PhaseState::from_vector(&out)
}

/// Exact propagation sampled on a uniform grid.
///
/// Computes the one-step propagator `e^{dt·A}` once and iterates it, so the
/// cost is one matrix exponential plus one dense matrix-vector product per
/// sample. Unconditionally stable; `dt` only sets the sampling density.
pub fn exact_trajectory(
    params: &ChainParams,
    psi0: &PhaseState,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    check_state_dims(params, psi0)?;
    let steps = step_count(t_end, dt)?;
    let stiff = build_stiffness(params);
    let drift = build_drift(params, &stiff)?;
    let propagator = (drift.as_matrix() * dt).exp();

    let mut y = psi0.to_vector();
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        energies: Vec::with_capacity(steps + 1),
        powers: Vec::with_capacity(steps + 1),
    };
    for j in 0..=steps {
        let t = j as f64 * dt;
        let state = PhaseState::from_vector(&y).map_err(|_| {
            ChainError::StabilityViolation(format!(
                "non-finite state at t = {t:.6e} (step {j})"
            ))
        })?;
        traj.times.push(t);
        traj.energies
            .push(energy(&state, &stiff).expect("dimensions checked"));
        traj.powers
            .push(power_dissipated(&state, params).expect("dimensions checked"));
        traj.states.push(state);
        if j < steps {
            y = &propagator * y;
        }
    }
    Ok(traj)
}

/// Largest deviation of the central-difference `dH/dt` from the recorded
/// drain `−αpₙ²`, normalized by `max(max|power|, H(0)/span)`.
///
/// The residual is dominated by the `O(dt²)` finite-difference error, so it
/// must shrink about fourfold when the sampling step halves.
pub fn verify_dissipation_identity(traj: &Trajectory, params: &ChainParams) -> Result<f64> {
    let m = traj.len();
    if m < 3 {
        return Err(ChainError::InvalidParameter(format!(
            "dissipation check needs at least 3 samples, got {m}"
        )));
    }
    if let Some(s) = traj.states.first() {
        check_state_dims(params, s)?;
    }
    let span = traj.times[m - 1] - traj.times[0];
    if !(span > 0.0) {
        return Err(ChainError::InvalidParameter(
            "trajectory spans zero time".into(),
        ));
    }
    let power_scale = traj.powers.iter().fold(0.0f64, |a, p| a.max(p.abs()));
    let scale = power_scale.max(traj.energies[0] / span);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut worst = 0.0f64;
    for j in 1..m - 1 {
        let dh = (traj.energies[j + 1] - traj.energies[j - 1])
            / (traj.times[j + 1] - traj.times[j - 1]);
        worst = worst.max((dh - traj.powers[j]).abs());
    }
    Ok(worst / scale)
}

/// Predicted decay rate `c₂ = −2·max Re λ` of the drift restricted to the
/// decaying subspace.
///
/// The restriction must be Hurwitz; a non-negative spectral abscissa means
/// the splitting or the drift is wrong and is reported as an error rather
/// than a rate.
pub fn theoretical_decay_rate(params: &ChainParams, split: &SubspaceSplit) -> Result<f64> {
    if split.decaying_basis.is_empty() {
        return Err(ChainError::InvalidParameter(
            "decaying subspace is empty".into(),
        ));
    }
    if split.particles() != params.particles {
        return Err(ChainError::DimensionMismatch(format!(
            "split has N = {}, params have N = {}",
            split.particles(),
            params.particles
        )));
    }
    let stiff = build_stiffness(params);
    let drift = build_drift(params, &stiff)?;
    let basis = split.decaying_matrix();
    let restricted = basis.transpose() * drift.as_matrix() * &basis;
    let scale = 1.0 + restricted.norm();
    let abscissa = restricted
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if abscissa >= -TAU_EIG * scale {
        return Err(ChainError::StabilityViolation(format!(
            "restricted drift is not Hurwitz: spectral abscissa = {abscissa:.3e}"
        )));
    }
    Ok(-2.0 * abscissa)
}

/// Least-squares line through `log H(t)` over the trailing window
/// `[skip_fraction·t_end, t_end]`.
///
/// Samples are consumed in order and the fit stops early once the energy
/// falls below a thousand times the underflow floor; fewer than 10 usable
/// samples is a degenerate fit.
pub fn fit_decay(traj: &Trajectory, skip_fraction: f64) -> Result<DecayFit> {
    if !(0.0..1.0).contains(&skip_fraction) {
        return Err(ChainError::InvalidParameter(format!(
            "skip fraction must lie in [0, 1), got {skip_fraction}"
        )));
    }
    if traj.is_empty() {
        return Err(ChainError::InvalidParameter("empty trajectory".into()));
    }
    let t_end = *traj.times.last().expect("nonempty");
    let t_open = skip_fraction * t_end - 1e-12;
    let floor = 1e3 * f64::MIN_POSITIVE;

    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for (&t, &h) in traj.times.iter().zip(&traj.energies) {
        if t < t_open {
            continue;
        }
        if h <= floor {
            break;
        }
        ts.push(t);
        logs.push(h.ln());
    }
    if ts.len() < 10 {
        return Err(ChainError::DegenerateFit(format!(
            "only {} usable samples in the fit window",
            ts.len()
        )));
    }

    let m = ts.len() as f64;
    let tbar = ts.iter().sum::<f64>() / m;
    let ybar = logs.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&t, &y) in ts.iter().zip(&logs) {
        sxx += (t - tbar) * (t - tbar);
        sxy += (t - tbar) * (y - ybar);
    }
    if sxx == 0.0 {
        return Err(ChainError::DegenerateFit(
            "fit window has zero time spread".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * tbar;

    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (&t, &y) in ts.iter().zip(&logs) {
        let fitted = intercept + slope * t;
        ss_res += (y - fitted) * (y - fitted);
        ss_tot += (y - ybar) * (y - ybar);
    }
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };

    Ok(DecayFit {
        c2_hat: -slope,
        c1_hat: intercept.exp(),
        r_squared,
        window: (ts[0], *ts.last().expect("nonempty")),
    })
}
