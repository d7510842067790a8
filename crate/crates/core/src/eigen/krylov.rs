//! Block shift-and-invert Krylov iteration with full B-orthogonalization and
//! Rayleigh-Ritz on the projected pencil.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ldl::LdlFactor;
use super::{EigOptions, EigResult};
use crate::error::{invalid, Error, Result};
use crate::fem::SparseSymMatrix;

/// Ratio below which an orthogonalized vector counts as dependent.
const DROP_TOL: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// B-orthonormal basis with cached `B q` columns.
struct Basis<'a> {
    b: &'a SparseSymMatrix,
    q: Vec<Vec<f64>>,
    bq: Vec<Vec<f64>>,
}

impl<'a> Basis<'a> {
    fn new(b: &'a SparseSymMatrix) -> Self {
        Basis { b, q: Vec::new(), bq: Vec::new() }
    }

    /// Classical Gram-Schmidt applied twice. Returns false if `v` was dropped.
    fn push(&mut self, mut v: Vec<f64>) -> bool {
        let mut bv = self.b.matvec(&v);
        let before = dot(&v, &bv).max(0.0).sqrt();
        if before == 0.0 || !before.is_finite() {
            return false;
        }
        for _ in 0..2 {
            let coeffs: Vec<f64> = self.bq.iter().map(|bq| dot(bq, &v)).collect();
            for (c, q) in coeffs.iter().zip(&self.q) {
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
            bv = self.b.matvec(&v);
        }
        let after = dot(&v, &bv).max(0.0).sqrt();
        if after <= DROP_TOL * before {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= after);
        bv.iter_mut().for_each(|x| *x /= after);
        self.q.push(v);
        self.bq.push(bv);
        true
    }

    fn len(&self) -> usize {
        self.q.len()
    }
}

/// The `k` smallest eigenpairs of `A x = lambda B x` for symmetric `A` and SPD `B`.
pub fn solve_gep_smallest(a: &SparseSymMatrix, b: &SparseSymMatrix, opts: &EigOptions) -> Result<EigResult> {
    let n = a.n();
    if b.n() != n {
        return invalid(format!("pencil dimensions differ: {} vs {}", n, b.n()));
    }
    if opts.k == 0 || opts.k > n {
        return invalid(format!("requested {} eigenpairs of a {n}x{n} pencil", opts.k));
    }
    if !(opts.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let op = if opts.shift == 0.0 {
        LdlFactor::new(a)?
    } else {
        LdlFactor::new(&a.add_scaled(1.0, b, -opts.shift)?)?
    };

    let k = opts.k;
    let block = (k + 3).min(n);
    let max_dim = (4 * block).max(40).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<Vec<f64>> = (0..block).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    // One inverse step up front removes the high-frequency content of the random start.
    for v in &mut start {
        *v = op.solve(&b.matvec(v));
    }

    let mut best = EigResult::default();
    for _restart in 0..opts.max_iter.max(1) {
        let mut basis = Basis::new(b);
        let mut current = Vec::new();
        for v in start.drain(..) {
            if basis.push(v) {
                current.push(basis.len() - 1);
            }
        }
        while basis.len() < max_dim && !current.is_empty() {
            let mut next = Vec::new();
            for idx in current {
                if basis.len() >= max_dim {
                    break;
                }
                let w = op.solve(&basis.bq[idx]);
                if basis.push(w) {
                    next.push(basis.len() - 1);
                }
            }
            current = next;
        }
        // Pad with fresh random directions if the Krylov space became invariant early.
        let mut guard = 0;
        while basis.len() < block.min(n) && guard < 4 * n {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            basis.push(v);
            guard += 1;
        }

        let m = basis.len();
        let aq: Vec<Vec<f64>> = basis.q.iter().map(|q| a.matvec(q)).collect();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = 0.5 * (dot(&basis.q[i], &aq[j]) + dot(&basis.q[j], &aq[i]));
                t[(i, j)] = v;
                t[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

        let keep = block.min(m);
        let mut vals = Vec::with_capacity(keep);
        let mut vecs = Vec::with_capacity(keep);
        let mut res = Vec::with_capacity(keep);
        for &c in order.iter().take(keep) {
            let theta = eig.eigenvalues[c];
            let s = eig.eigenvectors.column(c);
            let mut y = vec![0.0; n];
            let mut ay = vec![0.0; n];
            let mut by = vec![0.0; n];
            for j in 0..m {
                let sj = s[j];
                for r in 0..n {
                    y[r] += sj * basis.q[j][r];
                    ay[r] += sj * aq[j][r];
                    by[r] += sj * basis.bq[j][r];
                }
            }
            let resid: Vec<f64> = ay.iter().zip(&by).map(|(p, q)| p - theta * q).collect();
            let scale = match norm(&ay) {
                s if s > 0.0 => s,
                _ => norm(&by),
            };
            vals.push(theta);
            vecs.push(y);
            res.push(norm(&resid) / scale);
        }
        let converged = res.iter().take(k).take_while(|&&r| r <= opts.tol).count();
        best = EigResult { eigenvalues: vals, eigenvectors: vecs, residuals: res };
        if converged >= k {
            best.eigenvalues.truncate(k);
            best.eigenvectors.truncate(k);
            best.residuals.truncate(k);
            for v in &mut best.eigenvectors {
                normalize_sign(v);
            }
            return Ok(best);
        }
        start = best.eigenvectors.clone();
    }
    let converged = best.residuals.iter().take(k).take_while(|&&r| r <= opts.tol).count();
    best.eigenvalues.truncate(k);
    best.eigenvectors.truncate(k);
    best.residuals.truncate(k);
    Err(Error::Convergence { iterations: opts.max_iter, converged, requested: k, partial: Box::new(best) })
}

/// Makes the entry of largest magnitude positive.
fn normalize_sign(v: &mut [f64]) {
    let idx = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if v.get(idx).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
