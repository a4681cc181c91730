//! Quantum-reservoir feature extraction and unsupervised detection of
//! topological phase transitions in the interacting extended SSH chain.
//!
//! Ground states of the bond-alternating XXZ chain are computed exactly
//! ([`groundstate`]), pushed through a disordered Floquet circuit
//! ([`reservoir`]), read out as local Z-string expectations
//! ([`measurement`]), embedded with t-SNE and clustered with a Gaussian
//! mixture ([`learn`]). The partial-reflection invariant ([`invariant`])
//! supplies the reference phase diagram. [`pipeline`] wires the stages into
//! parameter sweeps with CSV/SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod groundstate;
pub mod invariant;
pub mod learn;
pub mod measurement;
pub mod operators;
pub mod pipeline;
pub mod reservoir;
mod state;

pub use error::{Error, Result};
pub use groundstate::{ground_state_global, lanczos_lowest, sector_basis, GroundStateResult, SectorBasis};
pub use invariant::{
    classify_mbti, partial_reflection_invariant, reduced_density_matrix, MbtiResult, MbtiThresholds, Partition,
    PhaseLabel,
};
pub use measurement::{
    feature_vector, record_dynamics, sample_shots, DynamicsRecord, FeatureMatrix, FeatureVector, GridPoint, ShotTable,
};
pub use operators::{build_hamiltonian, Axis, ModelParams, PauliTerm, SparseHamiltonian};
pub use reservoir::{evolve, sample_disorder, FloquetCircuit, FloquetParams, PulseConvention, RegimeLabel};
pub use state::{SpinState, MAX_SITES};

pub use num_complex::Complex64;
