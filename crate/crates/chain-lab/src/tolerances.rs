//! Numerical tolerances used across the laboratory.
//!
//! All thresholds are relative unless stated otherwise and are sized for
//! double precision at chain lengths up to a couple of thousand particles.

/// Eigenpair residual: `‖V·y − λ·y‖ ≤ TAU_EIG · λ_max`.
pub const TAU_EIG: f64 = 1e-10;

/// Pairwise orthonormality defect of stored eigenvector columns.
pub const TAU_ORTH: f64 = 1e-10;

/// Minimal admissible eigenvalue gap, relative to `λ_max`. Below this the
/// spectrum cannot be certified simple and subspace splitting refuses to run.
pub const TAU_GAP_REL: f64 = 1e-12;

/// Energy additivity defect under projection, relative to the total energy.
pub const TAU_ENERGY: f64 = 1e-10;

/// Trajectory-level slack for energy monotonicity and subspace persistence,
/// relative to the initial energy.
pub const TAU_DYN: f64 = 1e-9;

/// Krylov rank decision: a candidate direction is accepted when its residual
/// after projection exceeds `RANK_TOL` times the largest candidate norm seen.
pub const RANK_TOL: f64 = 1e-9;

/// Stability guard for fixed-step integration: `dt · sqrt(λ_max) ≤ DT_GUARD`.
pub const DT_GUARD: f64 = 0.1;
