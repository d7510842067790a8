//! Finite element spaces and degree-of-freedom maps with essential constraints.

use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::geometry::{ElementKind, Facet, Mesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ElementSpace {
    Q1Scalar,
    Q1Vector2,
    P1Scalar1D,
    P2Scalar1D,
    Morley,
}

impl ElementSpace {
    pub fn element_kind(self) -> ElementKind {
        match self {
            ElementSpace::Q1Scalar | ElementSpace::Q1Vector2 => ElementKind::Quad4,
            ElementSpace::P1Scalar1D | ElementSpace::P2Scalar1D => ElementKind::Segment,
            ElementSpace::Morley => ElementKind::Tri3,
        }
    }

    /// Dofs per (vertex, edge, cell).
    pub fn dofs_per_entity(self) -> (usize, usize, usize) {
        match self {
            ElementSpace::Q1Scalar | ElementSpace::P1Scalar1D => (1, 0, 0),
            ElementSpace::Q1Vector2 => (2, 0, 0),
            ElementSpace::P2Scalar1D => (1, 0, 1),
            ElementSpace::Morley => (1, 1, 0),
        }
    }
}

/// Essential conditions imposed on one boundary facet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Essential {
    /// Whole trace vanishes (all components).
    pub value: bool,
    /// Normal component of a vector field vanishes.
    pub normal: bool,
    /// Tangential component of a vector field vanishes.
    pub tangential: bool,
    /// Normal derivative vanishes (Morley edge dofs).
    pub normal_derivative: bool,
}

impl Essential {
    pub const NONE: Essential = Essential { value: false, normal: false, tangential: false, normal_derivative: false };
    pub const VALUE: Essential = Essential { value: true, normal: false, tangential: false, normal_derivative: false };
}

#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub n_dofs: usize,
    pub element_to_global: Vec<Vec<usize>>,
    pub constrained: Vec<bool>,
    free_index: Vec<Option<usize>>,
    free: Vec<usize>,
    /// Morley only: global edges (sorted node pairs) and their unit normals,
    /// oriented as the tangent from the lower to the higher node index rotated clockwise.
    pub edges: Vec<[usize; 2]>,
    pub edge_normals: Vec<[f64; 2]>,
}

impl DofMap {
    fn new(n_dofs: usize, element_to_global: Vec<Vec<usize>>, constrained: Vec<bool>) -> Self {
        let mut m = DofMap {
            n_dofs,
            element_to_global,
            constrained,
            free_index: Vec::new(),
            free: Vec::new(),
            edges: Vec::new(),
            edge_normals: Vec::new(),
        };
        m.renumber();
        m
    }

    fn renumber(&mut self) {
        self.free = (0..self.n_dofs).filter(|&i| !self.constrained[i]).collect();
        self.free_index = vec![None; self.n_dofs];
        for (k, &i) in self.free.iter().enumerate() {
            self.free_index[i] = Some(k);
        }
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn free_index(&self, global: usize) -> Option<usize> {
        self.free_index[global]
    }

    pub fn n_constrained(&self) -> usize {
        self.n_dofs - self.free.len()
    }

    /// Full vector restricted to the free dofs.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.n_dofs);
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Reduced vector expanded with zeros on constrained dofs.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        assert_eq!(reduced.len(), self.free.len());
        let mut full = vec![0.0; self.n_dofs];
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = reduced[k];
        }
        full
    }

    /// Block layout `[self | other]` on the same elements, `other` offset by `self.n_dofs`.
    pub fn concat(&self, other: &DofMap) -> Result<DofMap> {
        if self.element_to_global.len() != other.element_to_global.len() {
            return invalid("cannot concatenate dof maps over different meshes");
        }
        let off = self.n_dofs;
        let e2g = self
            .element_to_global
            .iter()
            .zip(&other.element_to_global)
            .map(|(a, b)| a.iter().copied().chain(b.iter().map(|&g| g + off)).collect())
            .collect();
        let mut constrained = self.constrained.clone();
        constrained.extend_from_slice(&other.constrained);
        Ok(DofMap::new(self.n_dofs + other.n_dofs, e2g, constrained))
    }
}

const AXIS_TOL: f64 = 1e-12;

/// Builds the dof map of `space` on `mesh`, constraining the dofs selected by
/// `essential` on each boundary facet.
///
/// Layouts: Q1/P1 dofs are node indices; Q1Vector2 stores component `c` of
/// node `n` at `c * n_nodes + n`; P2 puts vertex dofs first, then one
/// midpoint dof per element; Morley puts vertex values first, then one
/// normal-derivative dof per edge.
pub fn build_dofmap(mesh: &Mesh, space: ElementSpace, essential: &dyn Fn(&Facet) -> Essential) -> Result<DofMap> {
    if mesh.element_kind != space.element_kind() {
        return invalid(format!("{space:?} is not defined on {:?} meshes", mesh.element_kind));
    }
    let nn = mesh.n_nodes();
    let mut e2g: Vec<Vec<usize>> = Vec::with_capacity(mesh.n_elements());
    let mut edges = Vec::new();
    let mut edge_normals = Vec::new();
    let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
    let n_dofs = match space {
        ElementSpace::Q1Scalar | ElementSpace::P1Scalar1D => {
            e2g.extend(mesh.elements.iter().cloned());
            nn
        }
        ElementSpace::Q1Vector2 => {
            for el in &mesh.elements {
                e2g.push(el.iter().copied().chain(el.iter().map(|&n| n + nn)).collect());
            }
            2 * nn
        }
        ElementSpace::P2Scalar1D => {
            for (e, el) in mesh.elements.iter().enumerate() {
                e2g.push(vec![el[0], nn + e, el[1]]);
            }
            nn + mesh.n_elements()
        }
        ElementSpace::Morley => {
            for el in &mesh.elements {
                let mut dofs = el.clone();
                for k in 0..3 {
                    let (a, b) = (el[k], el[(k + 1) % 3]);
                    let key = if a < b { [a, b] } else { [b, a] };
                    let id = *edge_index.entry(key).or_insert_with(|| {
                        let (p, q) = (mesh.nodes[key[0]], mesh.nodes[key[1]]);
                        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
                        let len = (dx * dx + dy * dy).sqrt();
                        edges.push(key);
                        edge_normals.push([dy / len, -dx / len]);
                        edges.len() - 1
                    });
                    dofs.push(nn + id);
                }
                e2g.push(dofs);
            }
            nn + edges.len()
        }
    };

    let mut constrained = vec![false; n_dofs];
    for f in &mesh.facets {
        let ess = essential(f);
        let vector = space == ElementSpace::Q1Vector2;
        if (ess.normal || ess.tangential) && !vector {
            return invalid(format!("normal/tangential traces need a vector space, got {space:?}"));
        }
        if ess.normal_derivative && space != ElementSpace::Morley {
            return invalid(format!("normal-derivative constraints need the Morley space, got {space:?}"));
        }
        if ess.value {
            for &n in &f.nodes {
                constrained[n] = true;
                if vector {
                    constrained[n + nn] = true;
                }
            }
        }
        if ess.normal || ess.tangential {
            let normal_axis = if (f.normal[0].abs() - 1.0).abs() < AXIS_TOL {
                0
            } else if (f.normal[1].abs() - 1.0).abs() < AXIS_TOL {
                1
            } else {
                return invalid("normal/tangential traces are only supported on axis-aligned facets");
            };
            for &n in &f.nodes {
                if ess.normal {
                    constrained[n + normal_axis * nn] = true;
                }
                if ess.tangential {
                    constrained[n + (1 - normal_axis) * nn] = true;
                }
            }
        }
        if ess.normal_derivative {
            let key = if f.nodes[0] < f.nodes[1] { [f.nodes[0], f.nodes[1]] } else { [f.nodes[1], f.nodes[0]] };
            match edge_index.get(&key) {
                Some(&id) => constrained[nn + id] = true,
                None => return invalid("boundary facet is not a mesh edge"),
            }
        }
    }
    let mut map = DofMap::new(n_dofs, e2g, constrained);
    map.edges = edges;
    map.edge_normals = edge_normals;
    Ok(map)
}

/// Positions of the P2 dofs on an interval mesh, in dof order.
pub fn p2_dof_coordinates(mesh: &Mesh) -> Vec<f64> {
    let mut xs: Vec<f64> = mesh.nodes.iter().map(|p| p[0]).collect();
    for el in &mesh.elements {
        xs.push(0.5 * (mesh.nodes[el[0]][0] + mesh.nodes[el[1]][0]));
    }
    xs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_interval_mesh, build_rect_mesh, triangulate};

    #[test]
    fn full_dirichlet_q1() {
        let m = build_rect_mesh(1.0, 1.0, 2, 2).unwrap();
        let d = build_dofmap(&m, ElementSpace::Q1Scalar, &|_| Essential::VALUE).unwrap();
        assert_eq!((d.n_dofs, d.n_constrained()), (9, 8));
    }

    #[test]
    fn normal_trace_on_horizontal_facet_constrains_y() {
        let m = build_rect_mesh(1.0, 1.0, 3, 3).unwrap();
        let ess = |f: &Facet| Essential { normal: f.normal[1].abs() > 0.5, ..Essential::NONE };
        let d = build_dofmap(&m, ElementSpace::Q1Vector2, &ess).unwrap();
        let nn = m.n_nodes();
        for f in m.facets.iter().filter(|f| f.normal[1].abs() > 0.5) {
            for &n in &f.nodes {
                assert!(d.constrained[n + nn]);
            }
        }
        assert!(d.constrained[..nn].iter().all(|&c| !c));
    }

    #[test]
    fn no_essential_means_no_constraints() {
        let m = build_rect_mesh(1.0, 1.0, 2, 2).unwrap();
        let d = build_dofmap(&m, ElementSpace::Q1Vector2, &|_| Essential::NONE).unwrap();
        assert_eq!(d.n_constrained(), 0);
        assert_eq!(d.n_free(), 18);
    }

    #[test]
    fn incompatible_space_rejected() {
        let m = build_rect_mesh(1.0, 1.0, 2, 2).unwrap();
        assert!(build_dofmap(&m, ElementSpace::Morley, &|_| Essential::NONE).is_err());
        let i = build_interval_mesh(0.0, 1.0, 2).unwrap();
        assert!(build_dofmap(&i, ElementSpace::Q1Scalar, &|_| Essential::NONE).is_err());
        assert!(build_dofmap(&m, ElementSpace::Q1Scalar, &|_| Essential { normal: true, ..Essential::NONE }).is_err());
    }

    #[test]
    fn morley_counts() {
        let t = triangulate(&build_rect_mesh(1.0, 1.0, 2, 2).unwrap()).unwrap();
        let d = build_dofmap(&t, ElementSpace::Morley, &|_| Essential { value: true, normal_derivative: true, ..Essential::NONE })
            .unwrap();
        // 9 vertices, 16 edges (12 grid edges + 4 diagonals), 8 boundary vertices, 8 boundary edges.
        assert_eq!(d.n_dofs, 9 + 16);
        assert_eq!(d.n_constrained(), 16);
    }

    #[test]
    fn p2_layout() {
        let i = build_interval_mesh(0.0, 1.0, 2).unwrap();
        let d = build_dofmap(&i, ElementSpace::P2Scalar1D, &|_| Essential::NONE).unwrap();
        assert_eq!(d.n_dofs, 5);
        assert_eq!(d.element_to_global[1], vec![1, 4, 2]);
        assert_eq!(p2_dof_coordinates(&i), vec![0.0, 0.5, 1.0, 0.25, 0.75]);
    }
}
