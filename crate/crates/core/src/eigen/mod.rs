//! Generalized symmetric eigensolver for sparse pencils and subspace comparison.

mod angles;
mod krylov;
pub mod ldl;

pub use angles::principal_angles;
pub use krylov::solve_gep_smallest;
pub use ldl::{rcm_ordering, solve_system, LdlFactor};

use serde::{Deserialize, Serialize};

/// Relative tolerance used to group eigenvalues into clusters.
pub const CLUSTER_TOL: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigOptions {
    pub k: usize,
    pub shift: f64,
    pub tol: f64,
    /// Maximum number of restarts.
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        EigOptions { k: 6, shift: 0.0, tol: 1e-9, max_iter: 60, seed: 0x5eed }
    }
}

impl EigOptions {
    pub fn smallest(k: usize) -> Self {
        EigOptions { k, ..Default::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EigResult {
    pub eigenvalues: Vec<f64>,
    /// B-orthonormal eigenvectors, one per eigenvalue.
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

/// Groups ascending eigenvalues whose neighbours differ by at most
/// `rel_tol * max(|a|, |b|)`. Returns index ranges.
pub fn clusters(values: &[f64], rel_tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut s = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || {
            let (a, b) = (values[i - 1], values[i]);
            (b - a).abs() > rel_tol * a.abs().max(b.abs())
        };
        if split {
            out.push(s..i);
            s = i;
        }
    }
    out
}

/// Number of values with `|value - target| <= tol`.
pub fn count_near(values: &[f64], target: f64, tol: f64) -> usize {
    values.iter().filter(|v| (*v - target).abs() <= tol).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clustering_groups_close_values() {
        let v = [1.0, 1.0 + 1e-9, 1.0 + 5e-8, 2.0, 3.0, 3.0];
        let c = clusters(&v, CLUSTER_TOL);
        assert_eq!(c, vec![0..3, 3..4, 4..6]);
        assert_eq!(count_near(&v, 1.0, 1e-8), 2);
        assert!(clusters(&[], CLUSTER_TOL).is_empty());
    }
}
