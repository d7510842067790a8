//! Kirchhoff-Love limit pencils on Morley triangles.
//!
//! `A = D int (1 - sigma) D^2u:D^2v + sigma lap u lap v + int u v`, `B = int u v`,
//! with `D = E / (12 (1 - sigma^2))`. Second derivatives are taken element by
//! element; the mass uses a degree-4 rule, which is exact for products of quadratics.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigen::solve_system;
use crate::error::{invalid, Error, Result};
use crate::fem::basis::MorleyElement;
use crate::fem::quadrature::triangle_6;
use crate::fem::{assemble_matrix, assemble_vector, build_dofmap, DofBlock, DofMap, ElementSpace, Essential, Pencil};
use crate::geometry::{polygon_area, ElementKind, Mesh};
use crate::rm::BcFamily;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitBc {
    Clamped,
    Navier,
    Intermediate,
    Free,
}

impl LimitBc {
    pub fn name(self) -> &'static str {
        match self {
            LimitBc::Clamped => "clamped",
            LimitBc::Navier => "navier",
            LimitBc::Intermediate => "intermediate",
            LimitBc::Free => "free",
        }
    }

    fn essential(self) -> Essential {
        let (value, normal_derivative) = match self {
            LimitBc::Clamped => (true, true),
            LimitBc::Navier => (true, false),
            LimitBc::Intermediate => (false, true),
            LimitBc::Free => (false, false),
        };
        Essential { value, normal_derivative, ..Essential::NONE }
    }
}

impl fmt::Display for LimitBc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LimitBc {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clamped" => Ok(LimitBc::Clamped),
            "navier" | "simply-supported" => Ok(LimitBc::Navier),
            "intermediate" => Ok(LimitBc::Intermediate),
            "free" => Ok(LimitBc::Free),
            _ => Err(Error::InvalidArgument(format!("unknown limit boundary condition '{s}'"))),
        }
    }
}

/// Boundary conditions reached by each plate family as `t -> 0`.
pub fn map_limit_bc(bc: BcFamily) -> Result<LimitBc> {
    use BcFamily::*;
    match bc {
        HardClamped | SoftClamped => Ok(LimitBc::Clamped),
        HardSimplySupported | SoftSimplySupported => Ok(LimitBc::Navier),
        SoftRigid => Ok(LimitBc::Intermediate),
        FreeNeumann => Ok(LimitBc::Free),
        HardRigid | WeakNeumann => Err(Error::UnsupportedLimit(bc.name().to_string())),
    }
}

#[derive(Clone, Debug)]
pub struct BiharmonicSystem {
    pub mesh: Mesh,
    pub bc: LimitBc,
    pub e: f64,
    pub sigma: f64,
    /// Vertex values, then one normal-derivative dof per edge.
    pub dofmap: DofMap,
    pub pencil: Pencil,
}

impl BiharmonicSystem {
    pub fn element(&self, e: usize) -> Result<MorleyElement> {
        morley_element(&self.mesh, &self.dofmap, e)
    }

    /// Vertex-value block of a full coefficient vector.
    pub fn vertex_values<'a>(&self, full: &'a [f64]) -> &'a [f64] {
        &full[..self.mesh.n_nodes()]
    }
}

fn morley_element(mesh: &Mesh, dofmap: &DofMap, e: usize) -> Result<MorleyElement> {
    let nn = mesh.n_nodes();
    let c = mesh.element_coords(e);
    let dofs = &dofmap.element_to_global[e];
    let normals = [0, 1, 2].map(|k| dofmap.edge_normals[dofs[3 + k] - nn]);
    MorleyElement::new(&c, &normals).map_err(|_| Error::Assembly { element: e, reason: "degenerate triangle".into() })
}

/// Element `(stiffness without shift, mass)`.
fn element_matrices(mesh: &Mesh, el: &MorleyElement, e: usize, d: f64, sigma: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let c = mesh.element_coords(e);
    let area = polygon_area(&c);
    let h = el.hessians();
    let mut k = DMatrix::zeros(6, 6);
    for i in 0..6 {
        for j in 0..6 {
            let (a, b) = (h[i], h[j]);
            let ddot = a[0] * b[0] + 2.0 * a[1] * b[1] + a[2] * b[2];
            let lap = (a[0] + a[2]) * (b[0] + b[2]);
            k[(i, j)] = area * d * ((1.0 - sigma) * ddot + sigma * lap);
        }
    }
    let mut m = DMatrix::zeros(6, 6);
    for (p, w) in triangle_6().iter() {
        let x = affine_point(&c, p);
        let v = el.values(x);
        for i in 0..6 {
            for j in 0..6 {
                m[(i, j)] += 2.0 * area * w * v[i] * v[j];
            }
        }
    }
    (k, m)
}

fn affine_point(c: &[[f64; 2]], p: [f64; 2]) -> [f64; 2] {
    let l0 = 1.0 - p[0] - p[1];
    [l0 * c[0][0] + p[0] * c[1][0] + p[1] * c[2][0], l0 * c[0][1] + p[0] * c[1][1] + p[1] * c[2][1]]
}

/// Assembles the shifted Morley pencil on a triangle mesh.
pub fn assemble_biharmonic_pencil(mesh: &Mesh, e: f64, sigma: f64, bc: LimitBc) -> Result<BiharmonicSystem> {
    if mesh.element_kind != ElementKind::Tri3 {
        return invalid("biharmonic pencils need a triangle mesh");
    }
    if !(e > 0.0) || !(sigma > -1.0 && sigma < 1.0) {
        return invalid(format!("invalid material constants E = {e}, sigma = {sigma}"));
    }
    let ess = bc.essential();
    let dofmap = build_dofmap(mesh, ElementSpace::Morley, &|_| ess)?;
    let d = e / (12.0 * (1.0 - sigma * sigma));
    let mut locals = Vec::with_capacity(mesh.n_elements());
    for el in 0..mesh.n_elements() {
        let me = morley_element(mesh, &dofmap, el)?;
        locals.push(element_matrices(mesh, &me, el, d, sigma));
    }
    let a = assemble_matrix(&dofmap, |el| Ok(&locals[el].0 + &locals[el].1))?;
    let b = assemble_matrix(&dofmap, |el| Ok(locals[el].1.clone()))?;
    let layout = vec![DofBlock { name: "u".into(), offset: 0, len: dofmap.n_free() }];
    Ok(BiharmonicSystem { mesh: mesh.clone(), bc, e, sigma, dofmap, pencil: Pencil { a, b, layout } })
}

/// Solves `A u = (int f phi_i)_i`; returns the full coefficient vector.
pub fn solve_biharmonic_source(sys: &BiharmonicSystem, f: impl Fn([f64; 2]) -> f64) -> Result<(Vec<f64>, f64)> {
    let rule = triangle_6();
    let rhs = assemble_vector(&sys.dofmap, |el| {
        let me = sys.element(el)?;
        let c = sys.mesh.element_coords(el);
        let area = polygon_area(&c);
        let mut out = vec![0.0; 6];
        for (p, w) in rule.iter() {
            let x = affine_point(&c, p);
            let v = me.values(x);
            let fx = f(x);
            for i in 0..6 {
                out[i] += 2.0 * area * w * fx * v[i];
            }
        }
        Ok(out)
    })?;
    let (x, residual) = solve_system(&sys.pencil.a, &rhs)?;
    Ok((sys.dofmap.expand(&x), residual))
}

/// Morley interpolant: vertex values of `u` and midpoint normal derivatives of `grad u`.
pub fn morley_interpolate(sys: &BiharmonicSystem, u: impl Fn([f64; 2]) -> f64, grad: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let nn = sys.mesh.n_nodes();
    let mut full = vec![0.0; sys.dofmap.n_dofs];
    for (i, &p) in sys.mesh.nodes.iter().enumerate() {
        full[i] = u(p);
    }
    for (k, (edge, n)) in sys.dofmap.edges.iter().zip(&sys.dofmap.edge_normals).enumerate() {
        let (p, q) = (sys.mesh.nodes[edge[0]], sys.mesh.nodes[edge[1]]);
        let g = grad([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
        full[nn + k] = g[0] * n[0] + g[1] * n[1];
    }
    full
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{solve_gep_smallest, EigOptions};
    use crate::geometry::{build_rect_mesh, triangulate};

    fn tri_mesh(n: usize) -> Mesh {
        triangulate(&build_rect_mesh(1.0, 1.0, n, n).unwrap()).unwrap()
    }

    #[test]
    fn limit_map() {
        assert_eq!(map_limit_bc(BcFamily::FreeNeumann).unwrap(), LimitBc::Free);
        assert_eq!(map_limit_bc(BcFamily::SoftClamped).unwrap(), LimitBc::Clamped);
        assert_eq!(map_limit_bc(BcFamily::HardClamped).unwrap(), LimitBc::Clamped);
        assert_eq!(map_limit_bc(BcFamily::HardSimplySupported).unwrap(), LimitBc::Navier);
        assert_eq!(map_limit_bc(BcFamily::SoftRigid).unwrap(), LimitBc::Intermediate);
        assert!(matches!(map_limit_bc(BcFamily::HardRigid), Err(Error::UnsupportedLimit(_))));
        assert!(matches!(map_limit_bc(BcFamily::WeakNeumann), Err(Error::UnsupportedLimit(_))));
    }

    #[test]
    fn free_affine_functions_are_unit_eigenvectors() {
        let s = assemble_biharmonic_pencil(&tri_mesh(3), 1.0, 0.3, LimitBc::Free).unwrap();
        for (c0, cx) in [(1.0, 0.0), (0.0, 1.0), (0.5, -2.0)] {
            let x = s.dofmap.restrict(&morley_interpolate(&s, |p| c0 + cx * p[0], |_| [cx, 0.0]));
            let ax = s.pencil.a.matvec(&x);
            let bx = s.pencil.b.matvec(&x);
            for (p, q) in ax.iter().zip(&bx) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn free_kernel_has_three_members() {
        let s = assemble_biharmonic_pencil(&tri_mesh(4), 1.0, 0.3, LimitBc::Free).unwrap();
        let r = solve_gep_smallest(&s.pencil.a, &s.pencil.b, &EigOptions::smallest(5)).unwrap();
        assert_eq!(crate::eigen::count_near(&r.eigenvalues, 1.0, 1e-8), 3);
    }

    #[test]
    fn patch_test_quadratic_energy() {
        // u = 1 + x - 2y + 3x^2 - xy + 0.5 y^2: D^2u = [[6, -1], [-1, 1]], lap = 7.
        let u = |x: [f64; 2]| 1.0 + x[0] - 2.0 * x[1] + 3.0 * x[0] * x[0] - x[0] * x[1] + 0.5 * x[1] * x[1];
        let g = |x: [f64; 2]| [1.0 + 6.0 * x[0] - x[1], -2.0 - x[0] + x[1]];
        let (e, sigma) = (12.0 * (1.0 - 0.09), 0.3);
        let s = assemble_biharmonic_pencil(&tri_mesh(3), e, sigma, LimitBc::Free).unwrap();
        let x = s.dofmap.restrict(&morley_interpolate(&s, u, g));
        let energy = s.pencil.a.quad_form(&x) - s.pencil.b.quad_form(&x);
        let exact = (1.0 - sigma) * (36.0 + 2.0 + 1.0) + sigma * 49.0;
        assert!((energy - exact).abs() < 1e-10);
    }

    #[test]
    fn zero_and_constant_sources() {
        let s = assemble_biharmonic_pencil(&tri_mesh(4), 1.0, 0.3, LimitBc::Free).unwrap();
        let (u0, _) = solve_biharmonic_source(&s, |_| 0.0).unwrap();
        assert!(u0.iter().all(|&v| v == 0.0));
        let (u1, res) = solve_biharmonic_source(&s, |_| 1.0).unwrap();
        let nn = s.mesh.n_nodes();
        assert!(u1[..nn].iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(u1[nn..].iter().all(|v| v.abs() < 1e-10));
        assert!(res < 1e-10);
    }

    #[test]
    fn rejects_quads() {
        let m = build_rect_mesh(1.0, 1.0, 2, 2).unwrap();
        assert!(assemble_biharmonic_pencil(&m, 1.0, 0.3, LimitBc::Free).is_err());
    }
}
