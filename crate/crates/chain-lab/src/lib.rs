//! Numerical laboratory for a pinned harmonic chain with a single damped
//! particle.
//!
//! The library builds the chain's stiffness and drift matrices, splits phase
//! space into the energy-conserving subspace and its decaying complement,
//! evolves states by exact propagation or fixed-step integration, and checks
//! the resulting conserved dimension against the closed-form gcd law by three
//! independent routes.

pub mod chain;
pub mod dynamics;
pub mod error;
pub mod number_theory;
pub mod rng;
pub mod spectral;
pub mod tolerances;

pub use chain::{ChainParams, DriftMatrix, PhaseState, StiffnessMatrix};
pub use dynamics::{DecayFit, Trajectory};
pub use error::{ChainError, Result};
pub use spectral::{SpectralData, SubspaceSplit};
