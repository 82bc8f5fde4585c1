//! Integral ingestion and spin-orbital Hamiltonians.

mod fcidump;
mod spin;

pub use fcidump::{
    format_fcidump, parse_fcidump, parse_fcidump_str, unique_entries, write_fcidump, IntegralSet,
    OrbitalLayout,
};
pub use spin::{
    from_spatial, givens, spatial_of, spin_of, spin_orbital, to_integral_set, to_spin_orbitals,
    transform_eri, SpinOrbitalHamiltonian, ORTHOGONALITY_TOL,
};
