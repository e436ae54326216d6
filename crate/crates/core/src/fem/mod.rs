//! Finite element spaces and matrix assembly.

pub mod assembly;
pub mod space;

pub use assembly::{
    assemble_boundary, assemble_convection, assemble_divergence, assemble_mass, assemble_stiffness,
    BoundaryOperators, SystemMatrices,
};
pub use space::{
    eval_pressure, eval_velocity, interpolate, interpolate_boundary, interpolate_pressure, BoundaryField, DofLayout,
    Element, PressureField, VelocityField,
};
