//! Element-loop Galerkin assembly into reduced (constraint-eliminated) systems.

use nalgebra::DMatrix;

use super::basis::{p1_eval, p2_eval, q1_eval, ShapeValue};
use super::quadrature::QuadratureRule;
use super::space::{DofMap, ElementSpace};
use super::sparse::{SparseSymMatrix, TripletBuilder};
use crate::error::{invalid, Error, Result};
use crate::geometry::Mesh;

/// Scatters element matrices into the free-dof system. `local(e)` returns the
/// matrix of element `e` in the order of `dofmap.element_to_global[e]`; only
/// its lower triangle is read.
pub fn assemble_matrix<F>(dofmap: &DofMap, mut local: F) -> Result<SparseSymMatrix>
where
    F: FnMut(usize) -> Result<DMatrix<f64>>,
{
    let ne = dofmap.element_to_global.len();
    let nloc = dofmap.element_to_global.first().map_or(0, |v| v.len());
    let mut b = TripletBuilder::with_capacity(dofmap.n_free(), ne * nloc * (nloc + 1) / 2);
    for e in 0..ne {
        let dofs = &dofmap.element_to_global[e];
        let m = local(e)?;
        if m.nrows() != dofs.len() || m.ncols() != dofs.len() {
            return Err(Error::Assembly {
                element: e,
                reason: format!("element matrix is {}x{}, expected {}", m.nrows(), m.ncols(), dofs.len()),
            });
        }
        for a in 0..dofs.len() {
            let Some(i) = dofmap.free_index(dofs[a]) else { continue };
            for c in 0..=a {
                let Some(j) = dofmap.free_index(dofs[c]) else { continue };
                let v = m[(a, c)];
                if !v.is_finite() {
                    return Err(Error::Assembly { element: e, reason: "non-finite entry".into() });
                }
                b.add(i, j, v);
            }
        }
    }
    Ok(b.build())
}

/// Scatters element vectors into the free-dof right-hand side.
pub fn assemble_vector<F>(dofmap: &DofMap, mut local: F) -> Result<Vec<f64>>
where
    F: FnMut(usize) -> Result<Vec<f64>>,
{
    let mut out = vec![0.0; dofmap.n_free()];
    for (e, dofs) in dofmap.element_to_global.iter().enumerate() {
        let v = local(e)?;
        if v.len() != dofs.len() {
            return Err(Error::Assembly { element: e, reason: "element vector has the wrong length".into() });
        }
        for (a, &g) in dofs.iter().enumerate() {
            if let Some(i) = dofmap.free_index(g) {
                if !v[a].is_finite() {
                    return Err(Error::Assembly { element: e, reason: "non-finite entry".into() });
                }
                out[i] += v[a];
            }
        }
    }
    Ok(out)
}

/// Shape functions of a scalar nodal space at a reference point, with the
/// physical point and the quadrature Jacobian factor.
pub fn scalar_shapes(mesh: &Mesh, space: ElementSpace, e: usize, p: [f64; 2]) -> Result<(Vec<ShapeValue>, [f64; 2], f64)> {
    let c = mesh.element_coords(e);
    match space {
        ElementSpace::Q1Scalar => {
            let q = q1_eval(&c, p[0], p[1]);
            Ok((q.shapes.to_vec(), q.x, q.det_j))
        }
        ElementSpace::P1Scalar1D => {
            let (s, jac) = p1_eval(c[0][0], c[1][0], p[0]);
            Ok((s.to_vec(), [c[0][0] + (p[0] + 1.0) * jac, 0.0], jac))
        }
        ElementSpace::P2Scalar1D => {
            let (s, jac) = p2_eval(c[0][0], c[1][0], p[0]);
            Ok((s.to_vec(), [c[0][0] + (p[0] + 1.0) * jac, 0.0], jac))
        }
        _ => invalid(format!("{space:?} is not a scalar nodal space")),
    }
}

/// Assembles `M[i][j] = sum_e int density(x, phi_j, phi_i)` for a scalar nodal space.
pub fn assemble_scalar_density<D>(
    mesh: &Mesh,
    dofmap: &DofMap,
    space: ElementSpace,
    rule: &QuadratureRule,
    density: D,
) -> Result<SparseSymMatrix>
where
    D: Fn([f64; 2], &ShapeValue, &ShapeValue) -> f64,
{
    assemble_matrix(dofmap, |e| {
        let n = dofmap.element_to_global[e].len();
        let mut m = DMatrix::zeros(n, n);
        for (p, w) in rule.iter() {
            let (s, x, jac) = scalar_shapes(mesh, space, e, p)?;
            if s.len() != n {
                return Err(Error::Assembly { element: e, reason: "space does not match the dof map".into() });
            }
            for a in 0..n {
                for b in 0..=a {
                    m[(a, b)] += w * jac * density(x, &s[b], &s[a]);
                }
            }
        }
        Ok(m)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::{gauss_1d, gauss_quad};
    use crate::fem::space::{build_dofmap, Essential};
    use crate::geometry::{build_interval_mesh, build_rect_mesh};

    fn mass(u: &ShapeValue, v: &ShapeValue) -> f64 {
        u.value * v.value
    }

    fn stiffness(u: &ShapeValue, v: &ShapeValue) -> f64 {
        u.grad[0] * v.grad[0] + u.grad[1] * v.grad[1]
    }

    #[test]
    fn q1_mass_partition_of_unity() {
        let m = build_rect_mesh(1.0, 1.0, 3, 2).unwrap();
        let d = build_dofmap(&m, ElementSpace::Q1Scalar, &|_| Essential::NONE).unwrap();
        let mm = assemble_scalar_density(&m, &d, ElementSpace::Q1Scalar, &gauss_quad(2), |_, u, v| mass(u, v)).unwrap();
        let ones = vec![1.0; d.n_free()];
        assert!((mm.quad_form(&ones) - 1.0).abs() < 1e-12);
        let k = assemble_scalar_density(&m, &d, ElementSpace::Q1Scalar, &gauss_quad(2), |_, u, v| stiffness(u, v)).unwrap();
        let kc = k.matvec(&vec![2.5; d.n_free()]);
        assert!(kc.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn q1_element_matrices_closed_form() {
        // Rectangle a x b: mass ab/36 [4 2 1 2; ...], stiffness known closed form.
        let (a, b) = (0.5, 0.25);
        let m = build_rect_mesh(a, b, 1, 1).unwrap();
        let d = build_dofmap(&m, ElementSpace::Q1Scalar, &|_| Essential::NONE).unwrap();
        let mm = assemble_scalar_density(&m, &d, ElementSpace::Q1Scalar, &gauss_quad(2), |_, u, v| mass(u, v)).unwrap();
        let k = assemble_scalar_density(&m, &d, ElementSpace::Q1Scalar, &gauss_quad(2), |_, u, v| stiffness(u, v)).unwrap();
        // Node order of the single cell: (0,0), (a,0), (0,b), (a,b).
        let pat = [[4.0, 2.0, 2.0, 1.0], [2.0, 4.0, 1.0, 2.0], [2.0, 1.0, 4.0, 2.0], [1.0, 2.0, 2.0, 4.0]];
        let kx = |i: usize, j: usize| if (i % 2) == (j % 2) { 1.0 } else { -1.0 };
        let ky = |i: usize, j: usize| if (i / 2) == (j / 2) { 1.0 } else { -1.0 };
        let mx = |i: usize, j: usize| if (i % 2) == (j % 2) { 2.0 } else { 1.0 };
        let my = |i: usize, j: usize| if (i / 2) == (j / 2) { 2.0 } else { 1.0 };
        for i in 0..4 {
            for j in 0..4 {
                assert!((mm.get(i, j) - a * b / 36.0 * pat[i][j]).abs() < 1e-13);
                let exact = b / (6.0 * a) * kx(i, j) * my(i, j) + a / (6.0 * b) * ky(i, j) * mx(i, j);
                assert!((k.get(i, j) - exact).abs() < 1e-13, "({i},{j})");
            }
        }
    }

    #[test]
    fn p1_mass_1d() {
        let m = build_interval_mesh(0.0, 1.0, 2).unwrap();
        let d = build_dofmap(&m, ElementSpace::P1Scalar1D, &|_| Essential::NONE).unwrap();
        let mm = assemble_scalar_density(&m, &d, ElementSpace::P1Scalar1D, &gauss_1d(2), |_, u, v| mass(u, v)).unwrap();
        let h = 0.5;
        let expect = [[h / 3.0, h / 6.0, 0.0], [h / 6.0, 2.0 * h / 3.0, h / 6.0], [0.0, h / 6.0, h / 3.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((mm.get(i, j) - expect[i][j]).abs() < 1e-14);
            }
        }
        assert!((mm.quad_form(&[1.0; 3]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn constrained_rows_removed() {
        let m = build_rect_mesh(1.0, 1.0, 2, 2).unwrap();
        let d = build_dofmap(&m, ElementSpace::Q1Scalar, &|_| Essential::VALUE).unwrap();
        let k = assemble_scalar_density(&m, &d, ElementSpace::Q1Scalar, &gauss_quad(2), |_, u, v| stiffness(u, v)).unwrap();
        assert_eq!(k.n(), 1);
        assert!((k.get(0, 0) - 8.0 / 3.0).abs() < 1e-13);
    }
}
