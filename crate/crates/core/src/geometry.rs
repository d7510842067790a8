//! Structured meshes for plates, interval limit domains and thin profile domains.
//!
//! All 2D meshes are built from a tensor grid of `(nx + 1) x (ny + 1)` nodes,
//! numbered row by row (`node(i, j) = j * (nx + 1) + i`). Quadrilaterals are
//! counterclockwise, `[(i, j), (i+1, j), (i+1, j+1), (i, j+1)]`. The grid shape
//! is kept on the mesh so that column-wise operations (section averages,
//! triangulation parents) can be done without searching.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, io_err, Error, Result};

const NORMAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Segment,
    Quad4,
    Tri3,
}

impl ElementKind {
    pub fn nodes_per_element(self) -> usize {
        match self {
            ElementKind::Segment => 2,
            ElementKind::Quad4 => 4,
            ElementKind::Tri3 => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Lateral,
    TopBottom,
    WholeBoundary,
}

/// Boundary facet: an edge (2D) or an endpoint (1D).
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    pub nodes: Vec<usize>,
    pub tag: BoundaryTag,
    /// Outward unit normal. In 1D only the first component is used.
    pub normal: [f64; 2],
    pub element: usize,
}

/// Shape of the tensor grid a mesh was generated from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub element_kind: ElementKind,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<Vec<usize>>,
    pub facets: Vec<Facet>,
    /// Present for meshes produced by the structured builders.
    pub grid: Option<Grid>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> Vec<[f64; 2]> {
        self.elements[e].iter().map(|&n| self.nodes[n]).collect()
    }

    /// Length, area of the element (exact for straight-sided cells).
    pub fn element_measure(&self, e: usize) -> f64 {
        let c = self.element_coords(e);
        match self.element_kind {
            ElementKind::Segment => (c[1][0] - c[0][0]).abs(),
            ElementKind::Tri3 | ElementKind::Quad4 => polygon_area(&c),
        }
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_measure(e)).sum()
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 2] {
        let c = self.element_coords(e);
        let n = c.len() as f64;
        let sx: f64 = c.iter().map(|p| p[0]).sum();
        let sy: f64 = c.iter().map(|p| p[1]).sum();
        [sx / n, sy / n]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut flags = vec![false; self.n_nodes()];
        for f in &self.facets {
            for &n in &f.nodes {
                flags[n] = true;
            }
        }
        (0..self.n_nodes()).filter(|&n| flags[n]).collect()
    }

    /// Translate every node by `shift`.
    pub fn translated(&self, shift: [f64; 2]) -> Mesh {
        let mut m = self.clone();
        for p in &mut m.nodes {
            p[0] += shift[0];
            p[1] += shift[1];
        }
        m
    }

    /// Checks index ranges, unit outward normals, facet ownership and
    /// positivity of element Jacobians at the quadrature points.
    pub fn validate(&self) -> Result<()> {
        let npe = self.element_kind.nodes_per_element();
        let nn = self.n_nodes();
        for (e, el) in self.elements.iter().enumerate() {
            if el.len() != npe {
                return invalid(format!("element {e} has {} nodes, expected {npe}", el.len()));
            }
            if el.iter().any(|&n| n >= nn) {
                return invalid(format!("element {e} references a node out of range"));
            }
            let c = self.element_coords(e);
            let ok = match self.element_kind {
                ElementKind::Segment => c[1][0] > c[0][0],
                ElementKind::Tri3 => polygon_area(&c) > 0.0,
                ElementKind::Quad4 => quad_min_jacobian(&c) > 0.0,
            };
            if !ok {
                return invalid(format!("element {e} is inverted or degenerate"));
            }
        }
        let owners = facet_owners(self);
        for (k, f) in self.facets.iter().enumerate() {
            if f.nodes.iter().any(|&n| n >= nn) || f.element >= self.n_elements() {
                return invalid(format!("facet {k} references an index out of range"));
            }
            let len = (f.normal[0].powi(2) + f.normal[1].powi(2)).sqrt();
            if (len - 1.0).abs() > NORMAL_TOL {
                return invalid(format!("facet {k} normal is not unit length"));
            }
            match owners.get(&facet_key(&f.nodes)) {
                Some(list) if list.len() == 1 && list[0] == f.element => {}
                _ => return invalid(format!("facet {k} is not owned by exactly its element")),
            }
            let mid = facet_midpoint(self, f);
            let cen = self.element_centroid(f.element);
            let dot = f.normal[0] * (mid[0] - cen[0]) + f.normal[1] * (mid[1] - cen[1]);
            if dot <= 0.0 {
                return invalid(format!("facet {k} normal points inward"));
            }
        }
        Ok(())
    }
}

pub fn facet_midpoint(mesh: &Mesh, f: &Facet) -> [f64; 2] {
    let n = f.nodes.len() as f64;
    let mut m = [0.0, 0.0];
    for &i in &f.nodes {
        m[0] += mesh.nodes[i][0] / n;
        m[1] += mesh.nodes[i][1] / n;
    }
    m
}

fn facet_key(nodes: &[usize]) -> Vec<usize> {
    let mut k = nodes.to_vec();
    k.sort_unstable();
    k
}

/// Map from sorted facet node list to the elements containing all of its nodes
/// as a single element edge (or endpoint).
fn facet_owners(mesh: &Mesh) -> HashMap<Vec<usize>, Vec<usize>> {
    let mut map: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for (e, el) in mesh.elements.iter().enumerate() {
        match mesh.element_kind {
            ElementKind::Segment => {
                for &n in el {
                    map.entry(vec![n]).or_default().push(e);
                }
            }
            _ => {
                let m = el.len();
                for a in 0..m {
                    map.entry(facet_key(&[el[a], el[(a + 1) % m]])).or_default().push(e);
                }
            }
        }
    }
    map
}

pub(crate) fn polygon_area(c: &[[f64; 2]]) -> f64 {
    let n = c.len();
    let mut s = 0.0;
    for a in 0..n {
        let b = (a + 1) % n;
        s += c[a][0] * c[b][1] - c[b][0] * c[a][1];
    }
    0.5 * s
}

fn quad_min_jacobian(c: &[[f64; 2]]) -> f64 {
    let g = 1.0 / 3f64.sqrt();
    let mut m = f64::INFINITY;
    for &(xi, eta) in &[(-g, -g), (g, -g), (g, g), (-g, g), (0.0, 0.0)] {
        let dxi = [-(1.0 - eta), 1.0 - eta, 1.0 + eta, -(1.0 + eta)];
        let deta = [-(1.0 - xi), -(1.0 + xi), 1.0 + xi, 1.0 - xi];
        let (mut j00, mut j01, mut j10, mut j11) = (0.0, 0.0, 0.0, 0.0);
        for a in 0..4 {
            j00 += 0.25 * dxi[a] * c[a][0];
            j01 += 0.25 * dxi[a] * c[a][1];
            j10 += 0.25 * deta[a] * c[a][0];
            j11 += 0.25 * deta[a] * c[a][1];
        }
        m = m.min(j00 * j11 - j01 * j10);
    }
    m
}

fn outward_normal(p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    // Edge p -> q traversed counterclockwise: the outward normal is the
    // clockwise rotation of the tangent.
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    let len = (dx * dx + dy * dy).sqrt();
    [dy / len, -dx / len]
}

/// Quad4 tensor mesh whose node `(i, j)` sits at `place(i, j)`.
fn structured_quad_mesh(
    nx: usize,
    ny: usize,
    place: impl Fn(usize, usize) -> [f64; 2],
    tag_of_side: impl Fn(Side) -> BoundaryTag,
) -> Mesh {
    let grid = Grid { nx, ny };
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(place(i, j));
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push(vec![
                grid.node(i, j),
                grid.node(i + 1, j),
                grid.node(i + 1, j + 1),
                grid.node(i, j + 1),
            ]);
        }
    }
    let mut facets = Vec::with_capacity(2 * (nx + ny));
    let mut push = |a: usize, b: usize, element: usize, side: Side| {
        facets.push(Facet {
            nodes: vec![a, b],
            tag: tag_of_side(side),
            normal: outward_normal(nodes[a], nodes[b]),
            element,
        });
    };
    for i in 0..nx {
        push(grid.node(i, 0), grid.node(i + 1, 0), i, Side::Bottom);
    }
    for j in 0..ny {
        push(grid.node(nx, j), grid.node(nx, j + 1), j * nx + nx - 1, Side::Right);
    }
    for i in (0..nx).rev() {
        push(grid.node(i + 1, ny), grid.node(i, ny), (ny - 1) * nx + i, Side::Top);
    }
    for j in (0..ny).rev() {
        push(grid.node(0, j + 1), grid.node(0, j), j * nx, Side::Left);
    }
    Mesh {
        dim: 2,
        element_kind: ElementKind::Quad4,
        nodes,
        elements,
        facets,
        grid: Some(grid),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

/// Quad4 mesh of `(0, lx) x (0, ly)` with every boundary facet tagged
/// [`BoundaryTag::WholeBoundary`].
pub fn build_rect_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
        return invalid(format!("rectangle dimensions must be positive, got {lx} x {ly}"));
    }
    if nx == 0 || ny == 0 {
        return invalid("rectangle subdivisions must be at least 1");
    }
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    Ok(structured_quad_mesh(
        nx,
        ny,
        |i, j| {
            let x = if i == nx { lx } else { i as f64 * hx };
            let y = if j == ny { ly } else { j as f64 * hy };
            [x, y]
        },
        |_| BoundaryTag::WholeBoundary,
    ))
}

/// Segment mesh of `[a, b]` with `n` equal cells.
pub fn build_interval_mesh(a: f64, b: f64, n: usize) -> Result<Mesh> {
    if !(a < b) {
        return invalid(format!("interval requires a < b, got ({a}, {b})"));
    }
    if n == 0 {
        return invalid("interval needs at least one cell");
    }
    let h = (b - a) / n as f64;
    let nodes: Vec<[f64; 2]> = (0..=n)
        .map(|i| [if i == n { b } else { a + i as f64 * h }, 0.0])
        .collect();
    let elements = (0..n).map(|e| vec![e, e + 1]).collect();
    let facets = vec![
        Facet { nodes: vec![0], tag: BoundaryTag::WholeBoundary, normal: [-1.0, 0.0], element: 0 },
        Facet { nodes: vec![n], tag: BoundaryTag::WholeBoundary, normal: [1.0, 0.0], element: n - 1 },
    ];
    Ok(Mesh {
        dim: 1,
        element_kind: ElementKind::Segment,
        nodes,
        elements,
        facets,
        grid: Some(Grid { nx: n, ny: 0 }),
    })
}

/// Positive piecewise-linear function given by breakpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn constant(a: f64, b: f64, value: f64) -> Self {
        Profile { xs: vec![a, b], values: vec![value, value] }
    }

    pub fn linear(a: f64, b: f64, va: f64, vb: f64) -> Self {
        Profile { xs: vec![a, b], values: vec![va, vb] }
    }

    pub fn from_samples(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() != values.len() || xs.len() < 2 {
            return invalid("profile needs at least two (x, value) samples of equal length");
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("profile abscissae must be strictly increasing");
        }
        Ok(Profile { xs, values })
    }

    /// Linear interpolation, constant extension outside the breakpoints.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.values[0];
        }
        if x >= self.xs[n - 1] {
            return self.values[n - 1];
        }
        let k = self.xs.partition_point(|&xi| xi <= x).min(n - 1).max(1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let s = (x - x0) / (x1 - x0);
        self.values[k - 1] * (1.0 - s) + self.values[k] * s
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Thin profile domain `{(x, y): a < x < b, -delta f1(x) < y < delta f2(x)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThinDomainSpec {
    pub base_interval: (f64, f64),
    pub f1: Profile,
    pub f2: Profile,
    pub delta: f64,
    /// Number of thin directions. Coefficients accept any `d >= 1`; meshes only `d = 1`.
    pub d: usize,
}

impl ThinDomainSpec {
    pub fn new(base_interval: (f64, f64), f1: Profile, f2: Profile, delta: f64, d: usize) -> Result<Self> {
        let (a, b) = base_interval;
        if !(a < b) {
            return invalid("base interval requires a < b");
        }
        if !(delta > 0.0) {
            return invalid(format!("delta must be positive, got {delta}"));
        }
        if d == 0 {
            return invalid("thin-direction count must be at least 1");
        }
        if f1.min_value() <= 0.0 || f2.min_value() <= 0.0 {
            return invalid("profiles f1, f2 must be strictly positive");
        }
        Ok(ThinDomainSpec { base_interval, f1, f2, delta, d })
    }

    /// Straight strip `(a, b) x (-delta/2, delta/2)`.
    pub fn cylinder(a: f64, b: f64, delta: f64) -> Result<Self> {
        Self::new((a, b), Profile::constant(a, b, 0.5), Profile::constant(a, b, 0.5), delta, 1)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.base_interval, self.f1.clone(), self.f2.clone(), delta, self.d)
    }

    /// Section measure of the reference domain, `g = f1 + f2`.
    pub fn g(&self, x: f64) -> f64 {
        self.f1.eval(x) + self.f2.eval(x)
    }

    /// `(lower, upper)` boundary of the physical section at `x`.
    pub fn section(&self, x: f64) -> (f64, f64) {
        (-self.delta * self.f1.eval(x), self.delta * self.f2.eval(x))
    }
}

/// Quad4 mesh of the thin domain, image of the `nx x ny` grid of
/// `[a, b] x [0, 1]` under `(x, s) -> (x, -delta f1(x) + s delta g(x))`.
/// Lateral facets (`x = a`, `x = b`) are tagged `Lateral`, the rest `TopBottom`.
pub fn build_thin_mesh(spec: &ThinDomainSpec, nx: usize, ny: usize) -> Result<Mesh> {
    if spec.d != 1 {
        return Err(Error::Unsupported(format!(
            "thin meshes are only built for one thin direction, got d = {}",
            spec.d
        )));
    }
    if nx == 0 || ny == 0 {
        return invalid("thin mesh subdivisions must be at least 1");
    }
    let (a, b) = spec.base_interval;
    let hx = (b - a) / nx as f64;
    let xs: Vec<f64> = (0..=nx).map(|i| if i == nx { b } else { a + i as f64 * hx }).collect();
    let lower: Vec<f64> = xs.iter().map(|&x| -spec.delta * spec.f1.eval(x)).collect();
    let height: Vec<f64> = xs.iter().map(|&x| spec.delta * spec.g(x)).collect();
    Ok(structured_quad_mesh(
        nx,
        ny,
        |i, j| {
            let s = j as f64 / ny as f64;
            let y = if j == ny { spec.delta * spec.f2.eval(xs[i]) } else { lower[i] + s * height[i] };
            [xs[i], y]
        },
        |side| match side {
            Side::Left | Side::Right => BoundaryTag::Lateral,
            Side::Top | Side::Bottom => BoundaryTag::TopBottom,
        },
    ))
}

/// Image of a thin mesh under `(x, y) -> (x, y / delta)`.
pub fn rescale_to_reference(mesh_delta: &Mesh, spec: &ThinDomainSpec) -> Result<Mesh> {
    check_thin_mesh(mesh_delta, spec)?;
    let inv = 1.0 / spec.delta;
    let mut m = mesh_delta.clone();
    for p in &mut m.nodes {
        p[1] *= inv;
    }
    for f in &mut m.facets {
        let (p, q) = (m.nodes[f.nodes[0]], m.nodes[f.nodes[1]]);
        f.normal = outward_normal(p, q);
    }
    Ok(m)
}

/// Verifies that `mesh` is a structured thin mesh of `spec`: same lateral
/// extent and every column spanning exactly the section of the profile.
pub fn check_thin_mesh(mesh: &Mesh, spec: &ThinDomainSpec) -> Result<Grid> {
    let grid = match (mesh.element_kind, mesh.grid) {
        (ElementKind::Quad4, Some(g)) => g,
        _ => return invalid("expected a structured Quad4 thin mesh"),
    };
    let (a, b) = spec.base_interval;
    let scale = (b - a).abs().max(spec.delta);
    let tol = 1e-9 * scale;
    let x0 = mesh.nodes[grid.node(0, 0)][0];
    let x1 = mesh.nodes[grid.node(grid.nx, 0)][0];
    if (x0 - a).abs() > tol || (x1 - b).abs() > tol {
        return invalid("thin mesh lateral extent does not match the domain spec");
    }
    for i in 0..=grid.nx {
        let x = mesh.nodes[grid.node(i, 0)][0];
        let (lo, hi) = spec.section(x);
        let ylo = mesh.nodes[grid.node(i, 0)][1];
        let yhi = mesh.nodes[grid.node(i, grid.ny)][1];
        if (ylo - lo).abs() > tol || (yhi - hi).abs() > tol {
            return invalid(format!("thin mesh column {i} does not match the profile section"));
        }
    }
    Ok(grid)
}

/// Triangle mesh obtained by splitting every cell of a structured Quad4 mesh
/// along its `(i, j)-(i+1, j+1)` diagonal. Triangle `2e` and `2e + 1` come
/// from quad `e`.
pub fn triangulate(mesh: &Mesh) -> Result<Mesh> {
    if mesh.element_kind != ElementKind::Quad4 {
        return invalid("triangulation needs a Quad4 mesh");
    }
    let mut elements = Vec::with_capacity(2 * mesh.n_elements());
    for el in &mesh.elements {
        elements.push(vec![el[0], el[1], el[2]]);
        elements.push(vec![el[0], el[2], el[3]]);
    }
    let mut facets = mesh.facets.clone();
    for f in &mut facets {
        let quad = &mesh.elements[f.element];
        let lower = [quad[0], quad[1], quad[2]];
        let owns_lower = f.nodes.iter().all(|n| lower.contains(n));
        f.element = 2 * f.element + if owns_lower { 0 } else { 1 };
    }
    Ok(Mesh {
        dim: 2,
        element_kind: ElementKind::Tri3,
        nodes: mesh.nodes.clone(),
        elements,
        facets,
        grid: mesh.grid,
    })
}

#[derive(Serialize, Deserialize)]
struct FacetJson {
    nodes: Vec<usize>,
    tag: BoundaryTag,
    normal: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeshJson {
    dim: usize,
    element_kind: ElementKind,
    nodes: Vec<Vec<f64>>,
    elements: Vec<Vec<usize>>,
    facets: Vec<FacetJson>,
}

impl Mesh {
    pub fn to_json(&self) -> Result<String> {
        let dto = MeshJson {
            dim: self.dim,
            element_kind: self.element_kind,
            nodes: self.nodes.iter().map(|p| p[..self.dim].to_vec()).collect(),
            elements: self.elements.clone(),
            facets: self
                .facets
                .iter()
                .map(|f| FacetJson { nodes: f.nodes.clone(), tag: f.tag, normal: f.normal[..self.dim].to_vec() })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&dto)?)
    }

    /// Parses the JSON mesh format. Facet ownership is recovered from the
    /// connectivity, and tensor-grid structure is detected when present.
    pub fn from_json(text: &str) -> Result<Mesh> {
        let dto: MeshJson = serde_json::from_str(text)?;
        if dto.dim != 1 && dto.dim != 2 {
            return invalid(format!("mesh dimension must be 1 or 2, got {}", dto.dim));
        }
        let mut nodes = Vec::with_capacity(dto.nodes.len());
        for p in &dto.nodes {
            if p.len() != dto.dim {
                return invalid("node coordinate length does not match dim");
            }
            nodes.push([p[0], if dto.dim == 2 { p[1] } else { 0.0 }]);
        }
        let mut mesh = Mesh {
            dim: dto.dim,
            element_kind: dto.element_kind,
            nodes,
            elements: dto.elements,
            facets: Vec::new(),
            grid: None,
        };
        let npe = mesh.element_kind.nodes_per_element();
        let nn = mesh.n_nodes();
        if mesh.elements.iter().any(|el| el.len() != npe || el.iter().any(|&n| n >= nn)) {
            return invalid("element connectivity is malformed");
        }
        let owners = facet_owners(&mesh);
        for f in dto.facets {
            if f.normal.len() != mesh.dim {
                return invalid("facet normal length does not match dim");
            }
            let element = match owners.get(&facet_key(&f.nodes)) {
                Some(list) if list.len() == 1 => list[0],
                _ => return invalid(format!("facet {:?} is not a boundary facet of exactly one element", f.nodes)),
            };
            mesh.facets.push(Facet {
                nodes: f.nodes,
                tag: f.tag,
                normal: [f.normal[0], if mesh.dim == 2 { f.normal[1] } else { 0.0 }],
                element,
            });
        }
        mesh.grid = detect_grid(&mesh);
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(io_err(path))
    }

    pub fn read_json(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Mesh::from_json(&text)
    }
}

/// Recognizes the node/element numbering produced by the structured builders.
fn detect_grid(mesh: &Mesh) -> Option<Grid> {
    match mesh.element_kind {
        ElementKind::Segment => {
            let n = mesh.n_elements();
            let ok = mesh.n_nodes() == n + 1 && mesh.elements.iter().enumerate().all(|(e, el)| el == &vec![e, e + 1]);
            ok.then_some(Grid { nx: n, ny: 0 })
        }
        ElementKind::Quad4 => {
            // nx is the number of elements before the first node index jump.
            let nx = (1..=mesh.n_elements())
                .find(|&k| k == mesh.n_elements() || mesh.elements[k][0] != mesh.elements[k - 1][0] + 1)?;
            if mesh.n_elements() % nx != 0 {
                return None;
            }
            let ny = mesh.n_elements() / nx;
            let g = Grid { nx, ny };
            if mesh.n_nodes() != (nx + 1) * (ny + 1) {
                return None;
            }
            let ok = mesh.elements.iter().enumerate().all(|(e, el)| {
                let (i, j) = (e % nx, e / nx);
                el == &vec![g.node(i, j), g.node(i + 1, j), g.node(i + 1, j + 1), g.node(i, j + 1)]
            });
            ok.then_some(g)
        }
        ElementKind::Tri3 => None,
    }
}
