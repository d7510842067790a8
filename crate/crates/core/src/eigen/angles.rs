//! Principal angles between subspaces in a B-inner product.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::fem::SparseSymMatrix;

/// Relative norm below which a spanning vector is considered dependent.
const RANK_TOL: f64 = 1e-10;

fn b_orthonormalize(vs: &[Vec<f64>], b: &SparseSymMatrix, which: &str) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut bq: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        if v.len() != b.n() {
            return invalid(format!("{which}: vector length {} does not match B ({})", v.len(), b.n()));
        }
        let mut w = v.clone();
        let before = b.quad_form(&w).max(0.0).sqrt();
        for _ in 0..2 {
            for (qi, bqi) in q.iter().zip(&bq) {
                let c: f64 = bqi.iter().zip(&w).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(qi).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bw = b.matvec(&w);
        let after = bw.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>().max(0.0).sqrt();
        if !(before > 0.0) || after <= RANK_TOL * before {
            return invalid(format!("{which} is rank deficient"));
        }
        q.push(w.iter().map(|x| x / after).collect());
        bq.push(bw.iter().map(|x| x / after).collect());
    }
    Ok((q, bq))
}

/// Principal angles (ascending, radians) between `span(u)` and `span(v)` in the
/// inner product `<x, y> = x^T B y`. The spanning sets are orthonormalized first.
pub fn principal_angles(u: &[Vec<f64>], v: &[Vec<f64>], b: &SparseSymMatrix) -> Result<Vec<f64>> {
    if u.is_empty() || v.is_empty() {
        return invalid("principal angles need non-empty spanning sets");
    }
    let (qu, bqu) = b_orthonormalize(u, b, "U")?;
    let (qv, _) = b_orthonormalize(v, b, "V")?;
    let (p, q) = (qu.len(), qv.len());
    let mut c = DMatrix::<f64>::zeros(p, q);
    for i in 0..p {
        for j in 0..q {
            c[(i, j)] = bqu[i].iter().zip(&qv[j]).map(|(x, y)| x * y).sum();
        }
    }
    let svd = c.svd(false, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let vt = svd.v_t.expect("requested right singular vectors");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let mut angles = Vec::with_capacity(idx.len());
    for &s in &idx {
        let cos = sv[s].min(1.0);
        // sin from the residual of the V direction after projection onto U,
        // which keeps small angles accurate.
        let z = vt.row(s);
        let n = b.n();
        let mut y = vec![0.0; n];
        for j in 0..q {
            y.iter_mut().zip(&qv[j]).for_each(|(a, x)| *a += z[j] * x);
        }
        for (qi, bqi) in qu.iter().zip(&bqu) {
            let c: f64 = bqi.iter().zip(&y).map(|(x, w)| x * w).sum();
            y.iter_mut().zip(qi).for_each(|(a, x)| *a -= c * x);
        }
        let sin = b.quad_form(&y).max(0.0).sqrt().min(1.0);
        angles.push(sin.atan2(cos));
    }
    angles.sort_by(f64::total_cmp);
    Ok(angles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_spans_have_zero_angles() {
        let b = SparseSymMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0]);
        let u = vec![vec![1.0, 0.5, 0.0, 0.2], vec![0.0, 1.0, 1.0, 0.0]];
        let w = vec![vec![1.0, 1.5, 1.0, 0.2], vec![2.0, -1.0, -2.0, 0.4]];
        let a = principal_angles(&u, &w, &b).unwrap();
        assert!(a.iter().all(|x| x.abs() < 1e-7));
    }

    #[test]
    fn b_orthogonal_lines_are_perpendicular() {
        let b = SparseSymMatrix::from_diagonal(&[1.0, 4.0]);
        let a = principal_angles(&[vec![1.0, 0.0]], &[vec![0.0, 1.0]], &b).unwrap();
        assert!((a[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn rank_deficiency_rejected() {
        let b = SparseSymMatrix::identity(3);
        let u = vec![vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]];
        assert!(principal_angles(&u, &[vec![0.0, 1.0, 0.0]], &b).is_err());
    }
}
