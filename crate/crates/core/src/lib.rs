//! Coupled-cluster downfolding of molecular Hamiltonians into active spaces.
//!
//! The pipeline reads FCIDUMP integrals, solves spin-orbital CCSD, keeps the
//! amplitudes that touch inactive orbitals as an anti-Hermitian generator σ,
//! builds one of seven truncated commutator expansions of `e^{-σ} H e^{σ}`,
//! and diagonalizes the result over all active-space determinants.

pub mod active;
pub mod ccsd;
pub mod ci;
pub mod downfold;
pub mod error;
pub mod integrals;
pub mod noq;
pub mod oracle;
pub mod pipeline;
pub mod reference;

pub use error::{Error, Result};
