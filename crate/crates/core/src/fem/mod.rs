//! Reference elements, quadrature, dof maps and sparse symmetric assembly.

pub mod assembly;
pub mod basis;
pub mod mm;
pub mod pencil;
pub mod quadrature;
pub mod space;
pub mod sparse;

pub use assembly::{assemble_matrix, assemble_scalar_density, assemble_vector};
pub use pencil::{DofBlock, Pencil};
pub use quadrature::QuadratureRule;
pub use space::{build_dofmap, DofMap, ElementSpace, Essential};
pub use sparse::{SparseSymMatrix, TripletBuilder};
