//! Envelope (skyline) LDL^T factorization under a reverse Cuthill-McKee ordering.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::fem::SparseSymMatrix;

/// Relative pivot size below which the matrix is reported singular.
const PIVOT_TOL: f64 = 1e-13;

/// Reverse Cuthill-McKee permutation: `perm[new] = old`.
pub fn rcm_ordering(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let deg: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (deg[i], i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(adj, &deg, seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            nb.sort_by_key(|&u| (deg[u], u));
            for u in nb {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// BFS levels from `root`: (last level, eccentricity).
fn bfs_levels(adj: &[Vec<usize>], root: usize) -> (Vec<usize>, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut ecc = 0;
    let mut last = vec![root];
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                if dist[u] > ecc {
                    ecc = dist[u];
                    last.clear();
                }
                if dist[u] == ecc {
                    last.push(u);
                }
                queue.push_back(u);
            }
        }
    }
    (last, ecc)
}

fn pseudo_peripheral(adj: &[Vec<usize>], deg: &[usize], seed: usize) -> usize {
    let mut root = seed;
    let (mut last, mut ecc) = bfs_levels(adj, root);
    loop {
        let cand = *last.iter().min_by_key(|&&u| (deg[u], u)).unwrap();
        let (l2, e2) = bfs_levels(adj, cand);
        if e2 <= ecc {
            return root;
        }
        root = cand;
        last = l2;
        ecc = e2;
    }
}

#[derive(Clone, Debug)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    /// First column of the envelope of each (permuted) row.
    first: Vec<usize>,
    /// Offset of row `i`'s envelope in `vals`; row `i` occupies
    /// `start[i] .. start[i] + (i - first[i])` followed by no diagonal.
    start: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl LdlFactor {
    pub fn new(a: &SparseSymMatrix) -> Result<Self> {
        let n = a.n();
        let perm = rcm_ordering(&a.adjacency());
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (i, j, _) in a.lower_entries() {
            let (pi, pj) = (iperm[i], iperm[j]);
            let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
            first[r] = first[r].min(c);
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        let mut vals = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];
        for (i, j, v) in a.lower_entries() {
            let (pi, pj) = (iperm[i], iperm[j]);
            let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
            if r == c {
                diag[r] = v;
            } else {
                vals[start[r] + (c - first[r])] = v;
            }
        }
        let scale: Vec<f64> = diag.iter().map(|d| d.abs()).collect();
        for i in 0..n {
            let fi = first[i];
            let (head, tail) = vals.split_at_mut(start[i]);
            let row = &mut tail[..i - fi];
            // row[k - fi] holds t_k = L_ik D_k while the row is being built.
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let rj = &head[start[j] + (lo - fj)..start[j] + (j - fj)];
                let ri = &row[lo - fi..j - fi];
                let s: f64 = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
                row[j - fi] -= s;
            }
            let mut d = diag[i];
            for j in fi..i {
                let t = row[j - fi];
                let l = t / diag[j];
                d -= t * l;
                row[j - fi] = l;
            }
            if !d.is_finite() || d.abs() <= PIVOT_TOL * scale[i].max(f64::MIN_POSITIVE) {
                return Err(Error::SingularSystem { row: perm[i], pivot: d });
            }
            diag[i] = d;
        }
        Ok(LdlFactor { n, perm, first, start, vals, diag })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored off-diagonal envelope entries.
    pub fn envelope_size(&self) -> usize {
        self.vals.len()
    }

    /// Number of negative pivots, i.e. the inertia count of negative eigenvalues.
    pub fn negative_pivots(&self) -> usize {
        self.diag.iter().filter(|&&d| d < 0.0).count()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.vals[self.start[i]..self.start[i + 1]];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for i in 0..self.n {
            y[i] /= self.diag[i];
        }
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let xi = y[i];
            let row = &self.vals[self.start[i]..self.start[i + 1]];
            for (l, v) in row.iter().zip(&mut y[fi..i]) {
                *v -= l * xi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::TripletBuilder;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian_2d(m: usize) -> SparseSymMatrix {
        let n = m * m;
        let mut b = TripletBuilder::new(n);
        for j in 0..m {
            for i in 0..m {
                let k = j * m + i;
                b.add(k, k, 4.0);
                if i + 1 < m {
                    b.add(k + 1, k, -1.0);
                }
                if j + 1 < m {
                    b.add(k + m, k, -1.0);
                }
            }
        }
        b.build()
    }

    #[test]
    fn rcm_is_a_permutation_and_reduces_profile() {
        let a = laplacian_2d(12);
        let p = rcm_ordering(&a.adjacency());
        let mut sorted = p.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..144).collect::<Vec<_>>());
        let f = LdlFactor::new(&a).unwrap();
        assert!(f.envelope_size() <= 144 * 13);
    }

    #[test]
    fn solves_spd_system() {
        let a = laplacian_2d(9);
        let f = LdlFactor::new(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..81).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&x);
        let y = f.solve(&b);
        for i in 0..81 {
            assert!((x[i] - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn solves_indefinite_system() {
        let a = laplacian_2d(6).add_scaled(1.0, &SparseSymMatrix::identity(36), -3.1).unwrap();
        let f = LdlFactor::new(&a).unwrap();
        assert!(f.negative_pivots() > 0);
        let x: Vec<f64> = (0..36).map(|i| (i as f64).sin()).collect();
        let y = f.solve(&a.matvec(&x));
        for i in 0..36 {
            assert!((x[i] - y[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_matrix_reported() {
        // Graph Laplacian of a path has constants in its kernel.
        let mut b = TripletBuilder::new(4);
        for i in 0..3 {
            b.add(i, i, 1.0);
            b.add(i + 1, i + 1, 1.0);
            b.add(i + 1, i, -1.0);
        }
        assert!(matches!(LdlFactor::new(&b.build()), Err(Error::SingularSystem { .. })));
    }
}

/// Solves `A x = rhs` with two steps of iterative refinement.
/// Returns the solution and its relative residual `|A x - rhs| / |rhs|`.
pub fn solve_system(a: &SparseSymMatrix, rhs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let rn = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rn == 0.0 {
        return Ok((vec![0.0; rhs.len()], 0.0));
    }
    let f = LdlFactor::new(a)?;
    let mut x = f.solve(rhs);
    let residual = |x: &[f64]| -> Vec<f64> { rhs.iter().zip(a.matvec(x)).map(|(b, y)| b - y).collect() };
    for _ in 0..2 {
        let r = residual(&x);
        let dx = f.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
    }
    let rel = residual(&x).iter().map(|v| v * v).sum::<f64>().sqrt() / rn;
    Ok((x, rel))
}
