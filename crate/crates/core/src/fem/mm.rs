//! Matrix Market text export.

use std::fmt::Write as _;
use std::path::Path;

use super::sparse::SparseSymMatrix;
use crate::error::{io_err, Result};

/// Symmetric coordinate format, lower triangle, 1-based indices.
pub fn to_matrix_market(m: &SparseSymMatrix) -> String {
    let mut s = String::with_capacity(32 * m.nnz() + 64);
    s.push_str("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(s, "{} {} {}", m.n(), m.n(), m.nnz());
    for (i, j, v) in m.lower_entries() {
        let _ = writeln!(s, "{} {} {:.17e}", i + 1, j + 1, v);
    }
    s
}

/// Dense column-major array format for a set of column vectors.
pub fn dense_to_matrix_market(columns: &[Vec<f64>]) -> String {
    let rows = columns.first().map_or(0, |c| c.len());
    let mut s = String::with_capacity(26 * rows * columns.len() + 64);
    s.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", rows, columns.len());
    for c in columns {
        for v in c {
            let _ = writeln!(s, "{v:.17e}");
        }
    }
    s
}

pub fn write_matrix_market(m: &SparseSymMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, to_matrix_market(m)).map_err(io_err(path))
}

pub fn write_dense_matrix_market(columns: &[Vec<f64>], path: &Path) -> Result<()> {
    std::fs::write(path, dense_to_matrix_market(columns)).map_err(io_err(path))
}
