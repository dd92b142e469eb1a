//! Finite-element infrastructure: quadrature, Lagrange spaces, assembly,
//! sparse storage and the direct solver.

pub mod assemble;
pub mod quadrature;
pub mod space;
pub mod sparse;
pub mod transform;

pub use assemble::{
    assemble_curve, assemble_curve_vector, assemble_design_trace, assemble_volume,
    assemble_volume_vector, curve_mass, curve_stiffness, elasticity_matrix, l2_error, lumped_mass,
    mass_matrix, stiffness_matrix, QuadPoint,
};
pub use quadrature::{LineRule, TriangleRule, DEFAULT_DEGREE};
pub use space::{edge_shapes, triangle_shapes, FESpace, Field, Shape, Support};
pub use sparse::{LuSolver, SparseMatrix, TripletBuilder};
pub use transform::{
    cofactor, deformation_gradient, displacement_gradient, eval_transform, transform_of, Transform,
};
