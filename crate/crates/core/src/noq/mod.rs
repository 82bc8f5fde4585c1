//! Numerical second-quantization engine for particle-hole normal-ordered operators.

mod block;
mod classes;
mod graded;
mod operator;
mod wick;

pub use block::{BlockKey, BlockTensor};
pub use classes::{is_occupied, Class, OrbitalClasses, OCC_ALPHA, OCC_BETA, VIR_ALPHA, VIR_BETA};
pub use graded::{Grade, GradedOperator};
pub use operator::{
    commutator, normal_order, ph_to_physical_vacuum, physical_to_ph, scale_add, NormalOrderedOperator, Symmetry,
};
pub use wick::{contraction_patterns, contraction_table, ContractionPattern, MAX_RANK};
