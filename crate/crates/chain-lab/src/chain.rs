//! The damped harmonic chain: parameters, phase states, stiffness and drift
//! matrices, energy and instantaneous dissipation power.
//!
//! A chain of `N` unit-mass particles carries the quadratic energy
//! `H = ½ Σ p_i² + ½ Σ V(i,j) q_i q_j` where `V` is the pinned
//! nearest-neighbour stiffness matrix. A single friction force `−α·p_n` acts
//! on one particle, turning the Hamiltonian flow into `ψ̇ = Aψ` with the
//! block drift `A = (0 E; −V −D)` and `D = diag(0,…,α,…,0)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{ChainError, Result};

/// The five scalars defining a damped chain.
///
/// `damped_site` is 1-based, matching the usual indexing of the particles
/// `1..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    /// Number of particles `N ≥ 1`.
    pub particles: usize,
    /// Index `n` of the particle subject to friction, `1 ≤ n ≤ N`.
    pub damped_site: usize,
    /// Friction coefficient `α`.
    pub damping: f64,
    /// On-site (pinning) stiffness `ω₀`.
    pub pinning: f64,
    /// Nearest-neighbour coupling stiffness `ω₁`.
    pub coupling: f64,
}

impl ChainParams {
    /// Strict constructor: all stiffnesses and the friction must be positive.
    pub fn new(
        particles: usize,
        damped_site: usize,
        damping: f64,
        pinning: f64,
        coupling: f64,
    ) -> Result<Self> {
        let p = Self {
            particles,
            damped_site,
            damping,
            pinning,
            coupling,
        };
        p.validate_common()?;
        if !(damping > 0.0) {
            return Err(ChainError::InvalidParameter(format!(
                "damping must be > 0, got {damping}"
            )));
        }
        if !(coupling > 0.0) {
            return Err(ChainError::InvalidParameter(format!(
                "coupling must be > 0, got {coupling}"
            )));
        }
        Ok(p)
    }

    /// Degenerate-test constructor: permits `damping = 0` (no dissipation)
    /// and `coupling = 0` (uncoupled oscillators, fully degenerate spectrum).
    /// Intended for edge-case exploration; the strict invariants of [`new`]
    /// are the normal operating regime.
    ///
    /// [`new`]: ChainParams::new
    pub fn new_degenerate(
        particles: usize,
        damped_site: usize,
        damping: f64,
        pinning: f64,
        coupling: f64,
    ) -> Result<Self> {
        let p = Self {
            particles,
            damped_site,
            damping,
            pinning,
            coupling,
        };
        p.validate_common()?;
        if !(damping >= 0.0) {
            return Err(ChainError::InvalidParameter(format!(
                "damping must be >= 0, got {damping}"
            )));
        }
        if !(coupling >= 0.0) {
            return Err(ChainError::InvalidParameter(format!(
                "coupling must be >= 0, got {coupling}"
            )));
        }
        Ok(p)
    }

    fn validate_common(&self) -> Result<()> {
        if self.particles < 1 {
            return Err(ChainError::InvalidParameter(
                "particle count must be >= 1".into(),
            ));
        }
        if self.damped_site < 1 || self.damped_site > self.particles {
            return Err(ChainError::InvalidParameter(format!(
                "damped site must lie in 1..={}, got {}",
                self.particles, self.damped_site
            )));
        }
        if !(self.pinning > 0.0) {
            return Err(ChainError::InvalidParameter(format!(
                "pinning must be > 0, got {}",
                self.pinning
            )));
        }
        for (name, v) in [
            ("damping", self.damping),
            ("pinning", self.pinning),
            ("coupling", self.coupling),
        ] {
            if !v.is_finite() {
                return Err(ChainError::NonFinite(format!("{name} = {v}")));
            }
        }
        Ok(())
    }

    /// Largest stiffness eigenvalue `ω₀ + 2ω₁(1 − cos(π(N−1)/N))`, used for
    /// integrator step-size guards.
    pub fn lambda_max(&self) -> f64 {
        if self.particles == 1 {
            self.pinning
        } else {
            let k = self.particles - 1;
            self.pinning
                + 2.0
                    * self.coupling
                    * (1.0 - (std::f64::consts::PI * k as f64 / self.particles as f64).cos())
        }
    }
}

/// A point `ψ = (q, p)` of the `2N`-dimensional phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    /// Deviation coordinates, length `N`.
    pub q: DVector<f64>,
    /// Momenta, length `N`.
    pub p: DVector<f64>,
}

impl PhaseState {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(ChainError::DimensionMismatch(format!(
                "q has length {}, p has length {}",
                q.len(),
                p.len()
            )));
        }
        if q.len() == 0 {
            return Err(ChainError::InvalidParameter("empty phase state".into()));
        }
        for v in q.iter().chain(p.iter()) {
            if !v.is_finite() {
                return Err(ChainError::NonFinite("phase state entry".into()));
            }
        }
        Ok(Self { q, p })
    }

    pub fn zero(particles: usize) -> Self {
        Self {
            q: DVector::zeros(particles),
            p: DVector::zeros(particles),
        }
    }

    /// Number of particles `N`.
    pub fn particles(&self) -> usize {
        self.q.len()
    }

    /// Concatenated `[q; p]` vector of length `2N`.
    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.particles();
        let mut v = DVector::zeros(2 * n);
        v.rows_mut(0, n).copy_from(&self.q);
        v.rows_mut(n, n).copy_from(&self.p);
        v
    }

    /// Splits a concatenated `[q; p]` vector back into a state.
    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() % 2 != 0 || v.len() == 0 {
            return Err(ChainError::DimensionMismatch(format!(
                "phase vector length {} is not an even positive number",
                v.len()
            )));
        }
        let n = v.len() / 2;
        Ok(Self {
            q: v.rows(0, n).into_owned(),
            p: v.rows(n, n).into_owned(),
        })
    }

    /// Euclidean phase-space norm `‖ψ‖₁`.
    pub fn norm(&self) -> f64 {
        (self.q.norm_squared() + self.p.norm_squared()).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            q: &self.q * s,
            p: &self.p * s,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            q: &self.q + &other.q,
            p: &self.p + &other.p,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            q: &self.q - &other.q,
            p: &self.p - &other.p,
        }
    }

    /// Euclidean scalar product `(ψ, ψ')₁`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.q.dot(&other.q) + self.p.dot(&other.p)
    }
}

/// The symmetric tridiagonal stiffness matrix of the pinned chain.
///
/// Row `i` applies `ω₀ q_i − ω₁ (q_{i−1} + q_{i+1} − 2 q_i)` with free ends:
/// the diagonal is `ω₀ + 2ω₁` in the interior and `ω₀ + ω₁` on rows `1` and
/// `N` (just `ω₀` for a single particle), and the first sub/super-diagonal
/// is `−ω₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessMatrix {
    diag: Vec<f64>,
    off: f64,
}

impl StiffnessMatrix {
    /// Dimension `N`.
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Entry `V(i, j)`, 0-based.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i.abs_diff(j) == 1 {
            self.off
        } else {
            0.0
        }
    }

    /// Dense copy of the matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.entry(i, j))
    }

    /// Matrix-vector product `V·q`, O(N) thanks to the tridiagonal shape.
    pub fn apply(&self, q: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        assert_eq!(q.len(), n, "stiffness/vector dimension mismatch");
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let mut v = self.diag[i] * q[i];
            if i > 0 {
                v += self.off * q[i - 1];
            }
            if i + 1 < n {
                v += self.off * q[i + 1];
            }
            out[i] = v;
        }
        out
    }

    /// In-place variant of [`apply`] writing into `out`.
    ///
    /// [`apply`]: StiffnessMatrix::apply
    pub fn apply_to(&self, q: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(q.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let mut v = self.diag[i] * q[i];
            if i > 0 {
                v += self.off * q[i - 1];
            }
            if i + 1 < n {
                v += self.off * q[i + 1];
            }
            out[i] = v;
        }
    }
}

/// Builds the stiffness matrix of the pinned chain.
pub fn build_stiffness(params: &ChainParams) -> StiffnessMatrix {
    let n = params.particles;
    let (w0, w1) = (params.pinning, params.coupling);
    let mut diag = vec![w0 + 2.0 * w1; n];
    if n >= 2 {
        diag[0] = w0 + w1;
        diag[n - 1] = w0 + w1;
    } else {
        diag[0] = w0;
    }
    StiffnessMatrix { diag, off: -w1 }
}

/// The `2N×2N` drift matrix `A = (0 E; −V −D)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftMatrix {
    matrix: DMatrix<f64>,
}

impl DriftMatrix {
    /// Number of particles `N` (the matrix is `2N×2N`).
    pub fn particles(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Applies the drift to a state: `q̇ = p`, `ṗ = −Vq − Dp`.
    pub fn apply_state(&self, psi: &PhaseState) -> Result<PhaseState> {
        if psi.particles() != self.particles() {
            return Err(ChainError::DimensionMismatch(format!(
                "drift built for N = {}, state has N = {}",
                self.particles(),
                psi.particles()
            )));
        }
        PhaseState::from_vector(&(&self.matrix * psi.to_vector()))
    }
}

/// Assembles the drift matrix from the stiffness matrix and the friction.
pub fn build_drift(params: &ChainParams, stiffness: &StiffnessMatrix) -> Result<DriftMatrix> {
    let n = params.particles;
    if stiffness.dim() != n {
        return Err(ChainError::DimensionMismatch(format!(
            "stiffness is {}×{} but params have N = {n}",
            stiffness.dim(),
            stiffness.dim()
        )));
    }
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        for j in 0..n {
            let v = stiffness.entry(i, j);
            if v != 0.0 {
                a[(n + i, j)] = -v;
            }
        }
    }
    let site = params.damped_site - 1;
    a[(n + site, n + site)] = -params.damping;
    Ok(DriftMatrix { matrix: a })
}

/// Total energy `H(ψ) = ½ Σ p_i² + ½ (Vq, q)₁`.
pub fn energy(state: &PhaseState, stiffness: &StiffnessMatrix) -> Result<f64> {
    if state.particles() != stiffness.dim() {
        return Err(ChainError::DimensionMismatch(format!(
            "state has N = {}, stiffness has N = {}",
            state.particles(),
            stiffness.dim()
        )));
    }
    let potential = stiffness.apply(&state.q).dot(&state.q);
    Ok(0.5 * state.p.norm_squared() + 0.5 * potential)
}

/// Instantaneous energy drain `dH/dt = −α·p_n² ≤ 0`.
pub fn power_dissipated(state: &PhaseState, params: &ChainParams) -> Result<f64> {
    if state.particles() != params.particles {
        return Err(ChainError::DimensionMismatch(format!(
            "state has N = {}, params have N = {}",
            state.particles(),
            params.particles
        )));
    }
    let pn = state.p[params.damped_site - 1];
    Ok(-params.damping * pn * pn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn params_validation() {
        assert!(ChainParams::new(5, 3, 1.0, 1.0, 1.0).is_ok());
        assert!(ChainParams::new(0, 1, 1.0, 1.0, 1.0).is_err());
        assert!(ChainParams::new(5, 0, 1.0, 1.0, 1.0).is_err());
        assert!(ChainParams::new(5, 6, 1.0, 1.0, 1.0).is_err());
        assert!(ChainParams::new(5, 3, 0.0, 1.0, 1.0).is_err());
        assert!(ChainParams::new(5, 3, 1.0, 0.0, 1.0).is_err());
        assert!(ChainParams::new(5, 3, 1.0, 1.0, 0.0).is_err());
        // degenerate mode admits zero damping and zero coupling
        assert!(ChainParams::new_degenerate(5, 3, 0.0, 1.0, 0.0).is_ok());
        assert!(ChainParams::new_degenerate(5, 3, -1.0, 1.0, 0.0).is_err());
        assert!(ChainParams::new(5, 3, f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn stiffness_single_particle() {
        let params = ChainParams::new(1, 1, 1.0, 2.0, 1.0).unwrap();
        let v = build_stiffness(&params);
        assert_eq!(v.dim(), 1);
        assert_relative_eq!(v.entry(0, 0), 2.0);
    }

    #[test]
    fn stiffness_two_particles() {
        let params = ChainParams::new(2, 1, 1.0, 1.0, 3.0).unwrap();
        let v = build_stiffness(&params).to_dense();
        let expected = DMatrix::from_row_slice(2, 2, &[4.0, -3.0, -3.0, 4.0]);
        assert_eq!(v, expected);
    }

    #[test]
    fn stiffness_four_particles() {
        let params = ChainParams::new(4, 2, 1.0, 1.0, 1.0).unwrap();
        let v = build_stiffness(&params);
        for (i, d) in [2.0, 3.0, 3.0, 2.0].iter().enumerate() {
            assert_relative_eq!(v.entry(i, i), *d);
        }
        for i in 0..3 {
            assert_relative_eq!(v.entry(i, i + 1), -1.0);
            assert_relative_eq!(v.entry(i + 1, i), -1.0);
        }
        assert_relative_eq!(v.entry(0, 3), 0.0);
    }

    #[test]
    fn stiffness_symmetry_and_apply() {
        let params = ChainParams::new(7, 4, 0.5, 0.7, 1.3).unwrap();
        let v = build_stiffness(&params);
        let dense = v.to_dense();
        assert_eq!(dense, dense.transpose());
        let q = DVector::from_fn(7, |i, _| (i as f64 + 1.0).sin());
        let fast = v.apply(&q);
        let slow = &dense * &q;
        assert_relative_eq!(fast, slow, epsilon = 1e-14);
    }

    #[test]
    fn drift_smallest_case() {
        let params = ChainParams::new(1, 1, 1.0, 2.0, 1.0).unwrap();
        let v = build_stiffness(&params);
        let a = build_drift(&params, &v).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -1.0]);
        assert_eq!(a.as_matrix(), &expected);
    }

    #[test]
    fn drift_two_particles_block_structure() {
        let params = ChainParams::new(2, 2, 0.5, 1.0, 1.0).unwrap();
        let v = build_stiffness(&params);
        let a = build_drift(&params, &v).unwrap();
        let m = a.as_matrix();
        // upper-right block is the identity
        assert_eq!(m[(0, 2)], 1.0);
        assert_eq!(m[(1, 3)], 1.0);
        assert_eq!(m[(0, 3)], 0.0);
        // lower-left block is −V
        assert_eq!(m[(2, 0)], -2.0);
        assert_eq!(m[(2, 1)], 1.0);
        // lower-right block is −D = diag(0, −0.5)
        assert_eq!(m[(2, 2)], 0.0);
        assert_eq!(m[(3, 3)], -0.5);
    }

    #[test]
    fn drift_dimension_mismatch_rejected() {
        let params = ChainParams::new(3, 1, 1.0, 1.0, 1.0).unwrap();
        let wrong = build_stiffness(&ChainParams::new(4, 1, 1.0, 1.0, 1.0).unwrap());
        assert!(build_drift(&params, &wrong).is_err());
    }

    #[test]
    fn energy_values() {
        let params = ChainParams::new(3, 1, 1.0, 1.0, 1.0).unwrap();
        let v = build_stiffness(&params);
        let zero = PhaseState::zero(3);
        assert_relative_eq!(energy(&zero, &v).unwrap(), 0.0);

        let mut p = DVector::zeros(3);
        p[0] = 1.0;
        let kinetic = PhaseState::new(DVector::zeros(3), p).unwrap();
        assert_relative_eq!(energy(&kinetic, &v).unwrap(), 0.5);
    }

    #[test]
    fn power_dissipated_formula() {
        let params = ChainParams::new(3, 2, 2.0, 1.0, 1.0).unwrap();
        let mut p = DVector::zeros(3);
        p[1] = 3.0;
        let state: PhaseState = PhaseState::new(DVector::zeros(3), p).unwrap();
        assert_relative_eq!(power_dissipated(&state, &params).unwrap(), -18.0);

        let resting = PhaseState::zero(3);
        assert_relative_eq!(power_dissipated(&resting, &params).unwrap(), 0.0);
    }

    #[test]
    fn phase_state_roundtrip() {
        let q = DVector::from_vec(vec![1.0, 2.0]);
        let p = DVector::from_vec(vec![3.0, 4.0]);
        let psi = PhaseState::new(q, p).unwrap();
        let v = psi.to_vector();
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(PhaseState::from_vector(&v).unwrap(), psi);
    }

    #[test]
    fn phase_state_rejects_bad_input() {
        assert!(PhaseState::new(DVector::zeros(2), DVector::zeros(3)).is_err());
        let bad = DVector::from_vec(vec![f64::INFINITY]);
        assert!(PhaseState::new(bad, DVector::zeros(1)).is_err());
    }
}
