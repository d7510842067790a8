//! Reissner-Mindlin plates: discretization for all eight boundary-condition
//! families, the biharmonic thickness limit, the thin-domain dimension
//! reduction, a sparse generalized eigensolver, and the convergence
//! experiments built on top of them.

pub mod biharmonic;
pub mod experiments;
pub mod eigen;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod rm;
pub mod thin;

pub use error::{Error, Result};
