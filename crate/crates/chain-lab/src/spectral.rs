//! Spectrum of the stiffness matrix and the splitting of phase space into
//! the energy-conserving subspace and its decaying complement.
//!
//! The free-end pinned chain diagonalizes in the half-sample cosine basis:
//! `λ_k = ω₀ + 2ω₁(1 − cos(πk/N))` with eigenvectors
//! `y_j⁽ᵏ⁾ = cos(π(j−1/2)k/N)`, `k = 0..N−1`. A mode contributes to the
//! conserved subspace exactly when its eigenvector vanishes at the damped
//! site `n`, i.e. when `cos(πk(n−1/2)/N) = 0`. That zero condition is the
//! integer congruence `k(2n−1) ≡ N (mod 2N)`, which we test exactly instead
//! of comparing floating-point cosines to zero.
//!
//! Three independent routes to the conserved dimension live here and in
//! [`crate::number_theory`]: the exact congruence count, the Krylov rank of
//! the reachable position directions, and the closed-form gcd law.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{build_drift, build_stiffness, ChainParams, PhaseState, StiffnessMatrix};
use crate::error::{ChainError, Result};
use crate::tolerances::{RANK_TOL, TAU_EIG, TAU_GAP_REL};

/// Eigenvalues and unit eigenvectors of a stiffness matrix, ascending.
#[derive(Debug, Clone)]
pub struct SpectralData {
    /// Eigenvalues `λ_0 < λ_1 < … < λ_{N−1}`.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the unit-normalized eigenvector for `eigenvalues[k]`,
    /// with sign fixed so its largest-magnitude entry is positive.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralData {
    /// Dimension `N`.
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The `k`-th unit eigenvector.
    pub fn eigenvector(&self, k: usize) -> DVector<f64> {
        self.eigenvectors.column(k).into_owned()
    }

    /// Smallest gap between consecutive eigenvalues.
    pub fn min_gap(&self) -> f64 {
        self.eigenvalues
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Bases of the conserved subspace and its decaying complement.
///
/// Both bases consist of eigenmode pairs `(v_k, 0)` and `(0, v_k)`, so they
/// are orthonormal in the Euclidean product and orthogonal in the energy
/// product at the same time. Mode indices refer to ascending eigenvalue
/// order.
#[derive(Debug, Clone)]
pub struct SubspaceSplit {
    /// Orthonormal spanning set of the conserved subspace (possibly empty).
    pub conserved_basis: Vec<PhaseState>,
    /// Orthonormal spanning set of the decaying subspace.
    pub decaying_basis: Vec<PhaseState>,
    /// Mode indices `k` whose eigenvector vanishes at the damped site.
    pub conserved_modes: Vec<usize>,
    /// `= conserved_basis.len()`.
    pub dim_conserved: usize,
}

impl SubspaceSplit {
    /// Number of particles `N` (each basis vector lives in `ℝ^{2N}`).
    pub fn particles(&self) -> usize {
        self.decaying_basis
            .first()
            .or(self.conserved_basis.first())
            .map(|s| s.particles())
            .unwrap_or(0)
    }

    /// `2N×d` matrix whose columns are the decaying basis states.
    pub fn decaying_matrix(&self) -> DMatrix<f64> {
        basis_matrix(&self.decaying_basis)
    }
}

fn basis_matrix(states: &[PhaseState]) -> DMatrix<f64> {
    if states.is_empty() {
        return DMatrix::zeros(0, 0);
    }
    let rows = 2 * states[0].particles();
    let mut m = DMatrix::zeros(rows, states.len());
    for (j, s) in states.iter().enumerate() {
        m.set_column(j, &s.to_vector());
    }
    m
}

/// Flips the sign of each column so its largest-magnitude entry is positive.
fn canonicalize_columns(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        let mut idx = 0;
        let mut best = -1.0;
        for i in 0..m.nrows() {
            let a = m[(i, j)].abs();
            if a > best {
                best = a;
                idx = i;
            }
        }
        if m[(idx, j)] < 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Closed-form spectrum of the pinned free-end chain.
pub fn closed_form_spectrum(params: &ChainParams) -> SpectralData {
    let n = params.particles;
    let nf = n as f64;
    let eigenvalues: Vec<f64> = (0..n)
        .map(|k| {
            params.pinning
                + 2.0 * params.coupling * (1.0 - (std::f64::consts::PI * k as f64 / nf).cos())
        })
        .collect();
    let mut eigenvectors = DMatrix::from_fn(n, n, |j, k| {
        (std::f64::consts::PI * (j as f64 + 0.5) * k as f64 / nf).cos()
    });
    for k in 0..n {
        let norm = eigenvectors.column(k).norm();
        for j in 0..n {
            eigenvectors[(j, k)] /= norm;
        }
    }
    canonicalize_columns(&mut eigenvectors);
    SpectralData {
        eigenvalues,
        eigenvectors,
    }
}

/// Spectrum from a general symmetric eigensolver, sorted ascending.
///
/// Independent oracle for [`closed_form_spectrum`]; the two must agree for
/// every chain.
///
/// Eigenvalues come from the dense QR iteration, which delivers them to
/// machine precision.  Its accumulated eigenvectors, however, can come out
/// rotated inside nearly degenerate pairs (observed residuals of order the
/// cluster gap at some sizes), so each eigenvector is instead recomputed by
/// shifted inverse iteration on the tridiagonal matrix.
pub fn numeric_spectrum(stiffness: &StiffnessMatrix) -> Result<SpectralData> {
    let mut eigenvalues: Vec<f64> = stiffness
        .to_dense()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(ChainError::Eigensolver(
            "symmetric eigensolver produced non-finite eigenvalues".into(),
        ));
    }
    eigenvalues.sort_by(f64::total_cmp);
    let scale = eigenvalues.iter().fold(1.0f64, |a, &l| a.max(l.abs()));

    let mut eigenvectors = inverse_iteration_vectors(stiffness, &eigenvalues, scale)?;
    canonicalize_columns(&mut eigenvectors);
    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
    })
}

/// LU factors of `V − σI` with partial pivoting, kept in banded form.
///
/// Row swaps introduce a second superdiagonal, so `U` carries bands
/// `d`, `u1`, `u2`; the unit-lower factor is the stored multipliers plus
/// the swap flags, replayed in order against the right-hand side.
struct ShiftedTridiagonalLu {
    d: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedTridiagonalLu {
    fn factor(stiffness: &StiffnessMatrix, shift: f64, scale: f64) -> Self {
        let n = stiffness.dim();
        let off = if n > 1 { stiffness.entry(0, 1) } else { 0.0 };
        let mut d: Vec<f64> = (0..n).map(|i| stiffness.entry(i, i) - shift).collect();
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        for slot in u1.iter_mut().take(n.saturating_sub(1)) {
            *slot = off;
        }
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        // A pivot this small is as good as an exact zero; replacing it keeps
        // the solve finite while still blowing the solution up along the
        // eigenvector, which is exactly what inverse iteration wants.
        let tiny = f64::EPSILON * scale.max(1.0);

        for i in 0..n.saturating_sub(1) {
            // Row i spans columns i..=i+2 as (d, u1, u2); the untouched row
            // i+1 spans the same columns as (off, diag−σ, off or nothing).
            let row_a = (d[i], u1[i], u2[i]);
            let row_b = (off, d[i + 1], u1[i + 1]);
            let (pivot, other) = if row_b.0.abs() > row_a.0.abs() {
                swapped[i] = true;
                (row_b, row_a)
            } else {
                (row_a, row_b)
            };
            let lead = if pivot.0 == 0.0 { tiny } else { pivot.0 };
            let m = other.0 / lead;
            d[i] = lead;
            u1[i] = pivot.1;
            u2[i] = pivot.2;
            d[i + 1] = other.1 - m * pivot.1;
            u1[i + 1] = other.2 - m * pivot.2;
            mult[i] = m;
        }
        for pivot in d.iter_mut() {
            if *pivot == 0.0 {
                *pivot = tiny;
            }
        }
        Self {
            d,
            u1,
            u2,
            mult,
            swapped,
        }
    }

    fn solve_in_place(&self, rhs: &mut DVector<f64>) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                rhs.swap_rows(i, i + 1);
            }
            rhs[i + 1] -= self.mult[i] * rhs[i];
        }
        for i in (0..n).rev() {
            let mut v = rhs[i];
            if i + 1 < n {
                v -= self.u1[i] * rhs[i + 1];
            }
            if i + 2 < n {
                v -= self.u2[i] * rhs[i + 2];
            }
            rhs[i] = v / self.d[i];
        }
    }
}

/// One eigenvector per sorted eigenvalue via shifted inverse iteration.
///
/// Two solves from a seeded random start amplify the target component by
/// roughly `gap/(ε‖V‖)` per pass, which is ample for any simple spectrum.
/// Eigenvalues closer together than `cluster_gap` are treated as one
/// degenerate cluster and their vectors explicitly reorthogonalized;
/// well-separated modes come out orthogonal on their own.
fn inverse_iteration_vectors(
    stiffness: &StiffnessMatrix,
    eigenvalues: &[f64],
    scale: f64,
) -> Result<DMatrix<f64>> {
    let n = stiffness.dim();
    let mut vectors = DMatrix::zeros(n, n);
    let cluster_gap = 1e3 * f64::EPSILON * scale.max(1.0);
    let mut cluster_start = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e57);

    for (k, &lambda) in eigenvalues.iter().enumerate() {
        if k > 0 && lambda - eigenvalues[k - 1] > cluster_gap {
            cluster_start = k;
        }
        let lu = ShiftedTridiagonalLu::factor(stiffness, lambda, scale);
        let mut x = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0f64));
        for _ in 0..2 {
            lu.solve_in_place(&mut x);
            orthogonalize_against(&vectors, cluster_start..k, &mut x);
            let norm = x.norm();
            if !norm.is_finite() || norm == 0.0 {
                return Err(ChainError::Eigensolver(format!(
                    "inverse iteration diverged for eigenvalue {k}"
                )));
            }
            x /= norm;
        }
        let residual = (stiffness.apply(&x) - lambda * &x).norm();
        if residual > TAU_EIG * (1.0 + scale) {
            return Err(ChainError::Eigensolver(format!(
                "eigenvector {k} failed to converge: residual {residual:.3e}"
            )));
        }
        vectors.set_column(k, &x);
    }
    Ok(vectors)
}

/// Two classical Gram–Schmidt passes of `x` against the given columns.
fn orthogonalize_against(
    vectors: &DMatrix<f64>,
    range: std::ops::Range<usize>,
    x: &mut DVector<f64>,
) {
    for _ in 0..2 {
        for j in range.clone() {
            let col = vectors.column(j);
            let proj = col.dot(x);
            x.axpy(-proj, &col, 1.0);
        }
    }
}

/// Exact test for `cos(πk(n−1/2)/N) = 0`: the congruence
/// `k(2n−1) ≡ N (mod 2N)`.
pub fn mode_vanishes_at_site(particles: u64, site: u64, k: u64) -> bool {
    let two_n = 2 * particles;
    (k * (2 * site - 1)) % two_n == particles % two_n
}

/// Number of modes `k ∈ {0, …, N−1}` whose eigenvector vanishes at `site`.
///
/// Pure integer arithmetic; no floating-point cosines are compared to zero.
pub fn nodal_mode_count(particles: u64, site: u64) -> Result<u64> {
    if particles < 1 || site < 1 || site > particles {
        return Err(ChainError::InvalidParameter(format!(
            "site must lie in 1..={particles}, got {site}"
        )));
    }
    Ok((0..particles)
        .filter(|&k| mode_vanishes_at_site(particles, site, k))
        .count() as u64)
}

/// Conserved dimension by the spectral count: twice the number of modes
/// vanishing at the damped site.
pub fn conserved_dimension_spectral(params: &ChainParams) -> usize {
    2 * nodal_mode_count(params.particles as u64, params.damped_site as u64)
        .expect("validated params") as usize
}

/// Dimension of the Krylov span of position directions reachable from the
/// damped site: `span{Vʲe_n : j = 0..N−1}`.
///
/// Iterates `V` on the running basis with two full re-orthogonalization
/// passes per step; a direction is accepted while its residual exceeds
/// `rank_tol` times the largest candidate norm seen so far. The conserved
/// dimension equals `2N − 2m` for the returned rank `m`.
pub fn krylov_dimension(stiffness: &StiffnessMatrix, site: usize, rank_tol: f64) -> Result<usize> {
    let n = stiffness.dim();
    if site < 1 || site > n {
        return Err(ChainError::InvalidParameter(format!(
            "site must lie in 1..={n}, got {site}"
        )));
    }
    if !(rank_tol > 0.0 && rank_tol < 1.0) {
        return Err(ChainError::InvalidParameter(format!(
            "rank tolerance must lie in (0, 1), got {rank_tol}"
        )));
    }

    // Basis vectors stored back to back; slices keep the inner loops tight.
    let mut basis: Vec<f64> = Vec::with_capacity(n * n);
    let mut candidate = vec![0.0; n];
    let mut next = vec![0.0; n];

    candidate[site - 1] = 1.0;
    let mut scale: f64 = 1.0;
    basis.extend_from_slice(&candidate);

    loop {
        let m = basis.len() / n;
        if m == n {
            break;
        }
        stiffness.apply_to(&basis[(m - 1) * n..], &mut next);
        std::mem::swap(&mut candidate, &mut next);

        let cand_norm = norm(&candidate);
        scale = scale.max(cand_norm);

        for _ in 0..2 {
            for b in 0..m {
                let col = &basis[b * n..(b + 1) * n];
                let c = dot(&candidate, col);
                for (x, y) in candidate.iter_mut().zip(col) {
                    *x -= c * y;
                }
            }
        }

        let residual = norm(&candidate);
        if residual <= rank_tol * scale {
            break;
        }
        let inv = 1.0 / residual;
        basis.extend(candidate.iter().map(|x| x * inv));
    }

    Ok(basis.len() / n)
}

/// [`krylov_dimension`] with the default rank tolerance.
pub fn krylov_dimension_default(stiffness: &StiffnessMatrix, site: usize) -> Result<usize> {
    krylov_dimension(stiffness, site, RANK_TOL)
}

/// Conserved dimension via the Krylov route, `2N − 2m`.
pub fn conserved_dimension_krylov(params: &ChainParams) -> Result<usize> {
    let v = build_stiffness(params);
    let m = krylov_dimension_default(&v, params.damped_site)?;
    Ok(2 * params.particles - 2 * m)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Splits phase space into the conserved subspace and its complement.
///
/// Conserved modes are selected by the exact congruence test on the
/// ascending eigenvalue index, and each contributes the pair
/// `(v_k, 0), (0, v_k)`. Refuses spectra whose smallest gap cannot certify
/// simplicity.
pub fn split_subspaces(params: &ChainParams, spectrum: &SpectralData) -> Result<SubspaceSplit> {
    let n = params.particles;
    if spectrum.dim() != n {
        return Err(ChainError::DimensionMismatch(format!(
            "spectrum has dimension {}, params have N = {n}",
            spectrum.dim()
        )));
    }
    let lambda_max = spectrum.eigenvalues[n - 1];
    if n > 1 && spectrum.min_gap() < TAU_GAP_REL * lambda_max {
        return Err(ChainError::DegenerateSpectrum(format!(
            "smallest eigenvalue gap {:.3e} is below {:.3e}",
            spectrum.min_gap(),
            TAU_GAP_REL * lambda_max
        )));
    }

    let site = params.damped_site as u64;
    let mut conserved_basis = Vec::new();
    let mut decaying_basis = Vec::new();
    let mut conserved_modes = Vec::new();
    for k in 0..n {
        let v = spectrum.eigenvector(k);
        let conserved = mode_vanishes_at_site(n as u64, site, k as u64);
        if conserved {
            // the congruence promises an exact node; a large component here
            // means the eigenvector ordering is inconsistent with the index
            let comp = v[params.damped_site - 1].abs();
            if comp > 1e-8 {
                return Err(ChainError::Eigensolver(format!(
                    "mode {k} flagged as conserved but has component {comp:.3e} at the damped site"
                )));
            }
            conserved_modes.push(k);
        }
        let q_part = PhaseState {
            q: v.clone(),
            p: DVector::zeros(n),
        };
        let p_part = PhaseState {
            q: DVector::zeros(n),
            p: v,
        };
        if conserved {
            conserved_basis.push(q_part);
            conserved_basis.push(p_part);
        } else {
            decaying_basis.push(q_part);
            decaying_basis.push(p_part);
        }
    }

    let dim_conserved = conserved_basis.len();
    Ok(SubspaceSplit {
        conserved_basis,
        decaying_basis,
        conserved_modes,
        dim_conserved,
    })
}

/// Decomposes `ψ = ψ⁽⁰⁾ + ψ⁽²⁾` into the conserved component and the rest.
///
/// The conserved component is the Euclidean orthogonal projection onto the
/// conserved basis; because that basis consists of eigenmode pairs the same
/// decomposition is orthogonal in the energy product, so energies add.
pub fn project(state: &PhaseState, split: &SubspaceSplit) -> Result<(PhaseState, PhaseState)> {
    let n = split.particles();
    if state.particles() != n {
        return Err(ChainError::DimensionMismatch(format!(
            "state has N = {}, split has N = {n}",
            state.particles()
        )));
    }
    let mut conserved = PhaseState::zero(n);
    for b in &split.conserved_basis {
        let c = state.dot(b);
        conserved = conserved.add(&b.scale(c));
    }
    let rest = state.sub(&conserved);
    Ok((conserved, rest))
}

/// Residual `‖A − (IQ − αΓ)‖` of the drift factorization, where
/// `I(q,p) = (p,−q)`, `Q(q,p) = (Vq,p)` and `Γψ = (ψ,gₙ)₁gₙ` picks out the
/// damped momentum.
pub fn operator_identity_residual(params: &ChainParams, drift: &DMatrix<f64>) -> f64 {
    let n = params.particles;
    let v = build_stiffness(params);

    let mut i_op = DMatrix::zeros(2 * n, 2 * n);
    let mut q_op = DMatrix::zeros(2 * n, 2 * n);
    let mut gamma = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        i_op[(i, n + i)] = 1.0;
        i_op[(n + i, i)] = -1.0;
        q_op[(n + i, n + i)] = 1.0;
        for j in 0..n {
            let e = v.entry(i, j);
            if e != 0.0 {
                q_op[(i, j)] = e;
            }
        }
    }
    let site = params.damped_site - 1;
    gamma[(n + site, n + site)] = 1.0;

    let assembled = &i_op * &q_op - gamma * params.damping;
    (drift - assembled).norm()
}

/// Checks the drift factorization `A = IQ − αΓ` for the given parameters.
pub fn operator_identity_check(params: &ChainParams) -> bool {
    let v = build_stiffness(params);
    let a = match build_drift(params, &v) {
        Ok(a) => a,
        Err(_) => return false,
    };
    let scale = 1.0 + a.as_matrix().norm();
    operator_identity_residual(params, a.as_matrix()) <= TAU_EIG * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::energy;
    use crate::rng::gaussian_state;
    use approx::assert_relative_eq;

    fn params(n: usize, site: usize) -> ChainParams {
        ChainParams::new(n, site, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn closed_form_lowest_mode() {
        let p = ChainParams::new(6, 1, 1.0, 0.8, 1.7).unwrap();
        let s = closed_form_spectrum(&p);
        assert_relative_eq!(s.eigenvalues[0], 0.8);
        let v0 = s.eigenvector(0);
        for j in 0..6 {
            assert_relative_eq!(v0[j], 1.0 / 6f64.sqrt(), epsilon = 1e-14);
        }
    }

    #[test]
    fn closed_form_single_particle() {
        let p = ChainParams::new(1, 1, 1.0, 2.5, 1.0).unwrap();
        let s = closed_form_spectrum(&p);
        assert_eq!(s.eigenvalues, vec![2.5]);
    }

    #[test]
    fn closed_form_three_particles() {
        let p = params(3, 1);
        let s = closed_form_spectrum(&p);
        assert_relative_eq!(s.eigenvalues[1], 2.0, epsilon = 1e-14);
        assert_relative_eq!(s.eigenvalues[0], 1.0);
        assert_relative_eq!(s.eigenvalues[2], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn closed_form_satisfies_eigen_equation() {
        let p = ChainParams::new(11, 4, 1.0, 0.3, 2.0).unwrap();
        let v = build_stiffness(&p);
        let s = closed_form_spectrum(&p);
        let lambda_max = s.eigenvalues[10];
        for k in 0..11 {
            let y = s.eigenvector(k);
            let residual = (v.apply(&y) - &y * s.eigenvalues[k]).norm();
            assert!(residual <= TAU_EIG * lambda_max, "k={k}: {residual:.3e}");
        }
    }

    #[test]
    fn numeric_trivial_and_two_particle() {
        let p1 = ChainParams::new(1, 1, 1.0, 2.0, 1.0).unwrap();
        let s1 = numeric_spectrum(&build_stiffness(&p1)).unwrap();
        assert_relative_eq!(s1.eigenvalues[0], 2.0);
        assert_relative_eq!(s1.eigenvectors[(0, 0)], 1.0);

        let p2 = ChainParams::new(2, 1, 1.0, 1.0, 3.0).unwrap();
        let s2 = numeric_spectrum(&build_stiffness(&p2)).unwrap();
        assert_relative_eq!(s2.eigenvalues[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s2.eigenvalues[1], 7.0, epsilon = 1e-12);
    }

    #[test]
    fn numeric_matches_closed_form() {
        for n in [1, 2, 3, 5, 8, 17, 40] {
            let p = ChainParams::new(n, 1, 1.0, 0.7, 1.9).unwrap();
            let closed = closed_form_spectrum(&p);
            let numeric = numeric_spectrum(&build_stiffness(&p)).unwrap();
            for k in 0..n {
                let rel =
                    (closed.eigenvalues[k] - numeric.eigenvalues[k]).abs() / closed.eigenvalues[k];
                assert!(rel <= 1e-10, "N={n} k={k}: rel={rel:.3e}");
            }
        }
    }

    #[test]
    fn numeric_eigenvectors_resolve_near_degenerate_pairs() {
        // The two lowest modes at this size sit ~4e-4 apart; the QR
        // iteration's accumulated vectors came out rotated inside that
        // pair, which is why eigenvectors are recomputed by inverse
        // iteration.  Guard the fix with the observed failing size.
        let p = ChainParams::new(152, 1, 1.0, 1.0, 1.0).unwrap();
        let closed = closed_form_spectrum(&p);
        let numeric = numeric_spectrum(&build_stiffness(&p)).unwrap();
        for k in 0..4 {
            let v = closed.eigenvector(k);
            let w = numeric.eigenvector(k);
            let angle = (&w - &v * v.dot(&w)).norm();
            assert!(angle <= 1e-10, "mode {k}: angle {angle:.3e}");
        }
        let gram = numeric.eigenvectors.transpose() * &numeric.eigenvectors;
        let worst = (gram - DMatrix::identity(152, 152)).abs().max();
        assert!(worst <= 1e-10, "orthonormality defect {worst:.3e}");
    }

    #[test]
    fn eigenvalues_strictly_increasing() {
        let p = ChainParams::new(50, 1, 1.0, 1.0, 1.0).unwrap();
        let s = closed_form_spectrum(&p);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn nodal_counts() {
        for n in 1..=8 {
            assert_eq!(nodal_mode_count(8, n).unwrap(), 0, "n={n}");
        }
        assert_eq!(nodal_mode_count(5, 3).unwrap(), 2);
        assert_eq!(nodal_mode_count(9, 2).unwrap(), 1);
        assert!(mode_vanishes_at_site(5, 3, 1));
        assert!(mode_vanishes_at_site(5, 3, 3));
        assert!(mode_vanishes_at_site(9, 2, 3));
        assert!(nodal_mode_count(5, 6).is_err());
        assert!(nodal_mode_count(5, 0).is_err());
    }

    #[test]
    fn conserved_dimensions_spectral() {
        assert_eq!(conserved_dimension_spectral(&params(8, 3)), 0);
        assert_eq!(conserved_dimension_spectral(&params(5, 3)), 4);
        assert_eq!(conserved_dimension_spectral(&params(15, 8)), 14);
    }

    #[test]
    fn krylov_dimensions() {
        let p1 = ChainParams::new(1, 1, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(krylov_dimension_default(&build_stiffness(&p1), 1).unwrap(), 1);

        for n in 1..=8 {
            let p = params(8, n);
            assert_eq!(
                krylov_dimension_default(&build_stiffness(&p), n).unwrap(),
                8,
                "n={n}"
            );
        }

        let p = params(5, 3);
        assert_eq!(krylov_dimension_default(&build_stiffness(&p), 3).unwrap(), 3);
        assert_eq!(conserved_dimension_krylov(&p).unwrap(), 4);
    }

    #[test]
    fn krylov_rejects_bad_arguments() {
        let p = params(4, 1);
        let v = build_stiffness(&p);
        assert!(krylov_dimension(&v, 0, RANK_TOL).is_err());
        assert!(krylov_dimension(&v, 5, RANK_TOL).is_err());
        assert!(krylov_dimension(&v, 1, 0.0).is_err());
    }

    #[test]
    fn split_sizes() {
        let p8 = params(8, 3);
        let s8 = split_subspaces(&p8, &closed_form_spectrum(&p8)).unwrap();
        assert_eq!(s8.dim_conserved, 0);
        assert_eq!(s8.decaying_basis.len(), 16);

        let p53 = params(5, 3);
        let s53 = split_subspaces(&p53, &closed_form_spectrum(&p53)).unwrap();
        assert_eq!(s53.dim_conserved, 4);
        assert_eq!(s53.conserved_modes, vec![1, 3]);

        let p32 = params(3, 2);
        let s32 = split_subspaces(&p32, &closed_form_spectrum(&p32)).unwrap();
        assert_eq!(s32.dim_conserved, 2);
        assert_eq!(s32.conserved_modes, vec![1]);
    }

    #[test]
    fn split_rejects_degenerate_spectrum() {
        // with zero coupling every eigenvalue equals the pinning constant
        let p = ChainParams::new_degenerate(4, 2, 1.0, 1.0, 0.0).unwrap();
        let s = numeric_spectrum(&build_stiffness(&p)).unwrap();
        assert!(matches!(
            split_subspaces(&p, &s),
            Err(ChainError::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn split_total_dimension_and_orthogonality() {
        let p = params(12, 5);
        let split = split_subspaces(&p, &closed_form_spectrum(&p)).unwrap();
        assert_eq!(
            split.dim_conserved + split.decaying_basis.len(),
            2 * p.particles
        );
        let all: Vec<&PhaseState> = split
            .conserved_basis
            .iter()
            .chain(&split.decaying_basis)
            .collect();
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (a.dot(b) - expect).abs() < 1e-12,
                    "basis pair ({i},{j}) not orthonormal"
                );
            }
        }
    }

    #[test]
    fn projection_identities() {
        let p = params(5, 3);
        let v = build_stiffness(&p);
        let split = split_subspaces(&p, &closed_form_spectrum(&p)).unwrap();

        // a conserved basis element projects to itself
        let b = split.conserved_basis[0].clone();
        let (c, r) = project(&b, &split).unwrap();
        assert!(c.sub(&b).norm() < 1e-12);
        assert!(r.norm() < 1e-12);

        // reconstruction and energy additivity for a random state
        let psi = gaussian_state(5, 11);
        let (c, r) = project(&psi, &split).unwrap();
        assert!(c.add(&r).sub(&psi).norm() <= 1e-12 * psi.norm());
        let h = energy(&psi, &v).unwrap();
        let hc = energy(&c, &v).unwrap();
        let hr = energy(&r, &v).unwrap();
        assert!((h - hc - hr).abs() <= 1e-10 * h);
    }

    #[test]
    fn projection_trivial_conserved_space() {
        let p = params(8, 2);
        let split = split_subspaces(&p, &closed_form_spectrum(&p)).unwrap();
        let psi = gaussian_state(8, 3);
        let (c, r) = project(&psi, &split).unwrap();
        assert!(c.norm() < 1e-12);
        assert!(r.sub(&psi).norm() < 1e-12);
    }

    #[test]
    fn operator_identity() {
        assert!(operator_identity_check(
            &ChainParams::new(1, 1, 1.0, 1.0, 1.0).unwrap()
        ));
        assert!(operator_identity_check(
            &ChainParams::new(4, 2, 0.7, 1.0, 1.0).unwrap()
        ));

        let p = ChainParams::new(4, 2, 0.7, 1.0, 1.0).unwrap();
        let v = build_stiffness(&p);
        let mut perturbed = build_drift(&p, &v).unwrap().as_matrix().clone();
        perturbed[(3, 2)] += 1e-3;
        let scale = 1.0 + perturbed.norm();
        assert!(operator_identity_residual(&p, &perturbed) > TAU_EIG * scale);
    }
}
