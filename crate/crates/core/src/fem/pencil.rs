use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mm::write_matrix_market;
use super::sparse::SparseSymMatrix;
use crate::error::{io_err, Result};

/// Named contiguous block of the reduced unknown vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Pair `(A, B)` of the generalized eigenproblem `A x = lambda B x`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pencil {
    pub a: SparseSymMatrix,
    pub b: SparseSymMatrix,
    pub layout: Vec<DofBlock>,
}

impl Pencil {
    pub fn n(&self) -> usize {
        self.a.n()
    }

    /// Writes `<prefix>_A.mtx` and `<prefix>_B.mtx` into `dir`.
    pub fn dump(&self, dir: &Path, prefix: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_matrix_market(&self.a, &dir.join(format!("{prefix}_A.mtx")))?;
        write_matrix_market(&self.b, &dir.join(format!("{prefix}_B.mtx")))
    }
}
