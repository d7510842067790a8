//! Dimension-reduced limit of plates on thin profile domains.
//!
//! The limit unknowns are an in-plane rotation `Phi` and a deflection `phi`
//! on the base interval, both P2, with the weighted form
//!
//! ```text
//! D int [(1 - sigma) + C_div] Phi' Psi' g + S int (phi' - Phi)(v' - Psi) g + int (phi v + t^2/12 Phi Psi) g
//! C_div = (1 - sigma) sigma / ((1 - sigma) + d sigma)
//! ```
//!
//! and natural conditions at both ends. [`ConnectingSystem`] couples a thin
//! mesh to the interval: thin column `m` sits at the position of the `m`-th
//! P2 node, so section averages and constant extensions are exact column maps.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigen::solve_system;
use crate::error::{invalid, Result};
use crate::fem::basis::{p2_eval, q1_eval};
use crate::fem::quadrature::{gauss_1d, gauss_quad};
use crate::fem::{assemble_matrix, build_dofmap, DofBlock, DofMap, ElementSpace, Essential, Pencil};
use crate::geometry::{build_interval_mesh, build_thin_mesh, check_thin_mesh, ElementKind, Grid, Mesh, ThinDomainSpec};
use crate::rm::{assemble_rm_pencil, solve_rm_source, BcFamily, FieldPair, MaterialParams, RmSystem};

/// `(1 - sigma) sigma / ((1 - sigma) + d sigma)`.
pub fn limit_div_coefficient(sigma: f64, d: usize) -> Result<f64> {
    let den = (1.0 - sigma) + d as f64 * sigma;
    if d == 0 || !(den > 0.0) {
        return invalid(format!("degenerate limit coefficient for sigma = {sigma}, d = {d}"));
    }
    Ok((1.0 - sigma) * sigma / den)
}

/// Diagonal thin-direction strain `q_jj = -sigma div / ((1 - sigma) + d sigma)`.
/// Off-diagonal entries vanish.
pub fn qjj_value(sigma: f64, d: usize, divx_beta: f64) -> f64 {
    -sigma * divx_beta / ((1.0 - sigma) + d as f64 * sigma)
}

/// Grad-div coefficient of the limit operator written two ways: from the
/// strong form `E (1 + (d+1) sigma) / (24 (1 + sigma) (1 + (d-1) sigma))` and
/// from the weak form `E / (24 (1 - sigma^2)) [(1 - sigma) + 2 C_div]`.
pub fn grad_div_coefficients(e: f64, sigma: f64, d: usize) -> Result<(f64, f64)> {
    let dd = d as f64;
    let strong = e * (1.0 + (dd + 1.0) * sigma) / (24.0 * (1.0 + sigma) * (1.0 + (dd - 1.0) * sigma));
    let weak = e / (24.0 * (1.0 - sigma * sigma)) * ((1.0 - sigma) + 2.0 * limit_div_coefficient(sigma, d)?);
    Ok((strong, weak))
}

/// Limit-side data or solution sampled at the P2 nodes in increasing `x`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LimitData {
    pub phi: Vec<f64>,
    pub w: Vec<f64>,
}

impl LimitData {
    pub fn from_fn(xs: &[f64], phi: impl Fn(f64) -> f64, w: impl Fn(f64) -> f64) -> Self {
        LimitData { phi: xs.iter().map(|&x| phi(x)).collect(), w: xs.iter().map(|&x| w(x)).collect() }
    }
}

#[derive(Clone, Debug)]
pub struct LimitSystem {
    pub mesh: Mesh,
    pub spec: ThinDomainSpec,
    pub params: MaterialParams,
    pub d: usize,
    /// `[Phi | phi]`, both P2 with vertex dofs first.
    pub dofmap: DofMap,
    pub pencil: Pencil,
    /// Weight values at the 3-point Gauss nodes of every cell.
    pub g_samples: Vec<[f64; 3]>,
}

fn check_interval(mesh: &Mesh) -> Result<usize> {
    match (mesh.element_kind, mesh.grid) {
        (ElementKind::Segment, Some(g)) => Ok(g.nx),
        _ => invalid("expected an interval mesh from the structured builder"),
    }
}

/// P2 dof index of the `m`-th node in increasing `x` on an `n`-cell interval mesh.
fn column_dof(n: usize, m: usize) -> usize {
    if m % 2 == 0 {
        m / 2
    } else {
        n + 1 + m / 2
    }
}

pub fn assemble_limit_pencil(mesh: &Mesh, spec: &ThinDomainSpec, params: &MaterialParams, d: usize) -> Result<LimitSystem> {
    params.validate()?;
    let n = check_interval(mesh)?;
    let (a0, b0) = spec.base_interval;
    let (x0, x1) = (mesh.nodes[0][0], mesh.nodes[n][0]);
    if (x0 - a0).abs() > 1e-12 * (b0 - a0) || (x1 - b0).abs() > 1e-12 * (b0 - a0) {
        return invalid("interval mesh does not span the base interval");
    }
    let c_div = limit_div_coefficient(params.sigma, d)?;
    let bend = params.bending_stiffness() * ((1.0 - params.sigma) + c_div);
    let shear = params.shear_stiffness();
    let rho = params.rotary_inertia();

    let p2 = build_dofmap(mesh, ElementSpace::P2Scalar1D, &|_| Essential::NONE)?;
    let dofmap = p2.concat(&p2)?;
    let rule = gauss_1d(3);
    let mut g_samples = Vec::with_capacity(n);
    for e in 0..n {
        let (xa, xb) = (mesh.nodes[e][0], mesh.nodes[e + 1][0]);
        let mut gs = [0.0; 3];
        for (q, (p, _)) in rule.iter().enumerate() {
            let x = xa + 0.5 * (p[0] + 1.0) * (xb - xa);
            gs[q] = spec.g(x);
            if !(gs[q] > 0.0) {
                return invalid(format!("weight g is not positive at x = {x}"));
            }
        }
        g_samples.push(gs);
    }
    let mut locals = Vec::with_capacity(n);
    for e in 0..n {
        let (xa, xb) = (mesh.nodes[e][0], mesh.nodes[e + 1][0]);
        let mut a = DMatrix::zeros(6, 6);
        let mut m = DMatrix::zeros(6, 6);
        for (q, (p, w)) in rule.iter().enumerate() {
            let (s, jac) = p2_eval(xa, xb, p[0]);
            let gw = g_samples[e][q] * w * jac;
            for i in 0..3 {
                for j in 0..3 {
                    let (vi, vj) = (s[i].value, s[j].value);
                    let (di, dj) = (s[i].grad[0], s[j].grad[0]);
                    a[(i, j)] += gw * (bend * di * dj + shear * vi * vj);
                    a[(i, 3 + j)] -= gw * shear * vi * dj;
                    a[(3 + i, j)] -= gw * shear * di * vj;
                    a[(3 + i, 3 + j)] += gw * shear * di * dj;
                    m[(i, j)] += gw * rho * vi * vj;
                    m[(3 + i, 3 + j)] += gw * vi * vj;
                }
            }
        }
        locals.push((a, m));
    }
    let a = assemble_matrix(&dofmap, |e| Ok(&locals[e].0 + &locals[e].1))?;
    let b = assemble_matrix(&dofmap, |e| Ok(locals[e].1.clone()))?;
    let layout = vec![
        DofBlock { name: "Phi".into(), offset: 0, len: p2.n_dofs },
        DofBlock { name: "phi".into(), offset: p2.n_dofs, len: p2.n_dofs },
    ];
    Ok(LimitSystem { mesh: mesh.clone(), spec: spec.clone(), params: *params, d, dofmap, pencil: Pencil { a, b, layout }, g_samples })
}

impl LimitSystem {
    pub fn n_cells(&self) -> usize {
        self.mesh.n_elements()
    }

    /// Number of P2 nodes, `2 n + 1`.
    pub fn n_columns(&self) -> usize {
        2 * self.n_cells() + 1
    }

    pub fn column_x(&self) -> Vec<f64> {
        let n = self.n_cells();
        (0..self.n_columns())
            .map(|m| {
                let e = (m / 2).min(n - 1);
                let (xa, xb) = (self.mesh.nodes[e][0], self.mesh.nodes[e + 1][0]);
                xa + (m - 2 * e) as f64 * 0.5 * (xb - xa)
            })
            .collect()
    }

    /// Column-ordered data to the pencil's dof vector.
    pub fn to_dofs(&self, data: &LimitData) -> Result<Vec<f64>> {
        let nc = self.n_columns();
        if data.phi.len() != nc || data.w.len() != nc {
            return invalid(format!("limit data must have {nc} samples per field"));
        }
        let n = self.n_cells();
        let mut x = vec![0.0; 2 * nc];
        for m in 0..nc {
            x[column_dof(n, m)] = data.phi[m];
            x[nc + column_dof(n, m)] = data.w[m];
        }
        Ok(x)
    }

    pub fn from_dofs(&self, x: &[f64]) -> LimitData {
        let nc = self.n_columns();
        let n = self.n_cells();
        LimitData {
            phi: (0..nc).map(|m| x[column_dof(n, m)]).collect(),
            w: (0..nc).map(|m| x[nc + column_dof(n, m)]).collect(),
        }
    }

    /// Evaluates a column-ordered P2 field at `x`.
    pub fn eval(&self, values: &[f64], x: f64) -> f64 {
        let n = self.n_cells();
        let (a, b) = (self.mesh.nodes[0][0], self.mesh.nodes[n][0]);
        let e = (((x - a) / (b - a) * n as f64).floor().max(0.0) as usize).min(n - 1);
        let (xa, xb) = (self.mesh.nodes[e][0], self.mesh.nodes[e + 1][0]);
        let xi = 2.0 * (x - xa) / (xb - xa) - 1.0;
        let (s, _) = p2_eval(xa, xb, xi);
        (0..3).map(|k| s[k].value * values[2 * e + k]).sum()
    }

    /// `B x_data`: load with the rotation block weighted by `t^2/12`.
    pub fn load(&self, data: &LimitData) -> Result<Vec<f64>> {
        Ok(self.pencil.b.matvec(&self.to_dofs(data)?))
    }
}

pub fn solve_limit_source(sys: &LimitSystem, data: &LimitData) -> Result<(LimitData, f64)> {
    let rhs = sys.load(data)?;
    let (x, residual) = solve_system(&sys.pencil.a, &rhs)?;
    Ok((sys.from_dofs(&x), residual))
}

/// Thin mesh, interval mesh and the maps between their fields.
#[derive(Clone, Debug)]
pub struct ConnectingSystem {
    pub spec: ThinDomainSpec,
    pub thin: Mesh,
    pub interval: Mesh,
    grid: Grid,
    /// Column positions and the mesh section weight `|section| / delta` there.
    xs: Vec<f64>,
    g_cols: Vec<f64>,
}

impl ConnectingSystem {
    /// Interval mesh with `n` cells and thin mesh with `2 n x ny` cells.
    pub fn new(spec: &ThinDomainSpec, n: usize, ny: usize) -> Result<Self> {
        let interval = build_interval_mesh(spec.base_interval.0, spec.base_interval.1, n)?;
        let thin = build_thin_mesh(spec, 2 * n, ny)?;
        Self::from_meshes(spec, thin, interval)
    }

    pub fn from_meshes(spec: &ThinDomainSpec, thin: Mesh, interval: Mesh) -> Result<Self> {
        let grid = check_thin_mesh(&thin, spec)?;
        let n = check_interval(&interval)?;
        if grid.nx != 2 * n {
            return invalid(format!("thin mesh has {} columns of cells, expected {}", grid.nx, 2 * n));
        }
        let xs: Vec<f64> = (0..=grid.nx).map(|i| thin.nodes[grid.node(i, 0)][0]).collect();
        let scale = spec.base_interval.1 - spec.base_interval.0;
        for e in 0..n {
            let (xa, xb) = (interval.nodes[e][0], interval.nodes[e + 1][0]);
            let ok = (xs[2 * e] - xa).abs() <= 1e-12 * scale
                && (xs[2 * e + 1] - 0.5 * (xa + xb)).abs() <= 1e-12 * scale
                && (xs[2 * e + 2] - xb).abs() <= 1e-12 * scale;
            if !ok {
                return invalid("thin mesh columns are not aligned with the P2 nodes of the interval");
            }
        }
        let g_cols = (0..=grid.nx)
            .map(|i| (thin.nodes[grid.node(i, grid.ny)][1] - thin.nodes[grid.node(i, 0)][1]) / spec.delta)
            .collect();
        Ok(ConnectingSystem { spec: spec.clone(), thin, interval, grid, xs, g_cols })
    }

    pub fn delta(&self) -> f64 {
        self.spec.delta
    }

    pub fn n_columns(&self) -> usize {
        self.grid.nx + 1
    }

    pub fn column_x(&self) -> &[f64] {
        &self.xs
    }

    /// Section average of a scalar Q1 field, one value per column.
    pub fn average(&self, nodal: &[f64]) -> Result<Vec<f64>> {
        if nodal.len() != self.thin.n_nodes() {
            return invalid("field length does not match the thin mesh");
        }
        let ny = self.grid.ny;
        Ok((0..=self.grid.nx)
            .map(|i| {
                let s: f64 = (0..ny).map(|l| 0.5 * (nodal[self.grid.node(i, l)] + nodal[self.grid.node(i, l + 1)])).sum();
                s / ny as f64
            })
            .collect())
    }

    /// Constant-in-`y` extension of column values.
    pub fn extend(&self, columns: &[f64]) -> Result<Vec<f64>> {
        if columns.len() != self.n_columns() {
            return invalid("column data length does not match the thin mesh");
        }
        let mut out = vec![0.0; self.thin.n_nodes()];
        for j in 0..=self.grid.ny {
            for i in 0..=self.grid.nx {
                out[self.grid.node(i, j)] = columns[i];
            }
        }
        Ok(out)
    }

    /// Averages `(beta_x, w)` and drops the thin rotation component.
    pub fn average_pair(&self, beta: &[f64], w: &[f64]) -> Result<LimitData> {
        let nn = self.thin.n_nodes();
        if beta.len() != 2 * nn {
            return invalid("rotation field length does not match the thin mesh");
        }
        Ok(LimitData { phi: self.average(&beta[..nn])?, w: self.average(w)? })
    }

    /// Extension with zero thin rotation: returns `(beta, w)` nodal vectors.
    pub fn extend_pair(&self, data: &LimitData) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut beta = self.extend(&data.phi)?;
        beta.extend(std::iter::repeat(0.0).take(self.thin.n_nodes()));
        Ok((beta, self.extend(&data.w)?))
    }

    /// `int g u v` for column data read as piecewise-linear functions, with the
    /// mesh section weight. Two Gauss points per cell are exact.
    pub fn h0_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let rule = gauss_1d(2);
        let mut s = 0.0;
        for i in 0..self.grid.nx {
            let h = self.xs[i + 1] - self.xs[i];
            for (p, w) in rule.iter() {
                let (a, b) = (0.5 * (1.0 - p[0]), 0.5 * (1.0 + p[0]));
                let g = a * self.g_cols[i] + b * self.g_cols[i + 1];
                let uu = a * u[i] + b * u[i + 1];
                let vv = a * v[i] + b * v[i + 1];
                s += 0.5 * h * w * g * uu * vv;
            }
        }
        s
    }

    /// Norm of the limit space: `sqrt(int g (|Phi|^2 + |phi|^2))`.
    pub fn h0_norm(&self, data: &LimitData) -> f64 {
        (self.h0_inner(&data.phi, &data.phi) + self.h0_inner(&data.w, &data.w)).sqrt()
    }

    /// Gram matrix of [`h0_inner`](Self::h0_inner) on `[Phi | phi]` column data.
    pub fn h0_gram(&self) -> crate::fem::SparseSymMatrix {
        let nc = self.n_columns();
        let mut b = crate::fem::TripletBuilder::new(2 * nc);
        let rule = gauss_1d(2);
        for i in 0..self.grid.nx {
            let h = self.xs[i + 1] - self.xs[i];
            for (p, w) in rule.iter() {
                let sh = [0.5 * (1.0 - p[0]), 0.5 * (1.0 + p[0])];
                let g = sh[0] * self.g_cols[i] + sh[1] * self.g_cols[i + 1];
                for a in 0..2 {
                    for c in 0..=a {
                        let v = 0.5 * h * w * g * sh[a] * sh[c];
                        for off in [0, nc] {
                            b.add(off + i + a, off + i + c, v);
                        }
                    }
                }
            }
        }
        b.build()
    }

    /// `delta^{-1} int_{thin} u . v` over all components of two thin pairs
    /// (nodal vectors of the same length; 2x2 Gauss is exact for Q1 products).
    pub fn h_delta_inner(&self, u: &[f64], v: &[f64], components: usize) -> f64 {
        let nn = self.thin.n_nodes();
        let rule = gauss_quad(2);
        let mut s = 0.0;
        for (e, el) in self.thin.elements.iter().enumerate() {
            let c = self.thin.element_coords(e);
            for (p, w) in rule.iter() {
                let q = q1_eval(&c, p[0], p[1]);
                for comp in 0..components {
                    let uu: f64 = (0..4).map(|a| q.shapes[a].value * u[comp * nn + el[a]]).sum();
                    let vv: f64 = (0..4).map(|a| q.shapes[a].value * v[comp * nn + el[a]]).sum();
                    s += w * q.det_j * uu * vv;
                }
            }
        }
        s / self.spec.delta
    }

    /// `||(beta, w)||_{H_delta}` of a thin pair.
    pub fn h_delta_norm(&self, beta: &[f64], w: &[f64]) -> f64 {
        let x: Vec<f64> = beta.iter().chain(w).copied().collect();
        self.h_delta_inner(&x, &x, 3).sqrt()
    }

    /// Share of a thin pair captured by its section average, `||M u|| / ||u||`.
    pub fn averaged_fraction(&self, beta: &[f64], w: &[f64]) -> Result<f64> {
        let full = self.h_delta_norm(beta, w);
        if full == 0.0 {
            return Ok(0.0);
        }
        Ok(self.h0_norm(&self.average_pair(beta, w)?) / full)
    }

    /// Free shifted plate pencil on the thin mesh.
    pub fn thin_system(&self, params: &MaterialParams) -> Result<RmSystem> {
        assemble_rm_pencil(&self.thin, params, BcFamily::FreeNeumann, true)
    }

    pub fn limit_system(&self, params: &MaterialParams) -> Result<LimitSystem> {
        assemble_limit_pencil(&self.interval, &self.spec, params, self.spec.d)
    }
}

/// Outcome of comparing the thin and limit resolvents on one datum.
#[derive(Clone, Debug)]
pub struct GapResult {
    /// `||B_delta E f0 - E B_0 f0||_{H_delta} / ||f0||_{H_0}`.
    pub gap: f64,
    pub f0_norm: f64,
    pub thin: FieldPair,
    pub limit: LimitData,
}

/// Resolvent gap for data `f0` given at the columns. The limit solution is
/// evaluated pointwise as a P2 function at 3x3 Gauss points of the thin mesh.
pub fn resolvent_gap(conn: &ConnectingSystem, params: &MaterialParams, f0: &LimitData) -> Result<GapResult> {
    let thin_sys = conn.thin_system(params)?;
    let limit_sys = conn.limit_system(params)?;
    resolvent_gap_with(conn, &thin_sys, &limit_sys, f0)
}

/// [`resolvent_gap`] with pre-assembled systems.
pub fn resolvent_gap_with(conn: &ConnectingSystem, thin_sys: &RmSystem, limit_sys: &LimitSystem, f0: &LimitData) -> Result<GapResult> {
    let f0_norm = conn.h0_norm(f0);
    if !(f0_norm > 0.0) {
        return invalid("resolvent gap needs nonzero data");
    }
    let (fb, fw) = conn.extend_pair(f0)?;
    let thin = solve_rm_source(thin_sys, &fb, &fw)?;
    let (limit, _) = solve_limit_source(limit_sys, f0)?;
    let nn = conn.thin.n_nodes();
    let rule = gauss_quad(3);
    let mut err = 0.0;
    for (e, el) in conn.thin.elements.iter().enumerate() {
        let c = conn.thin.element_coords(e);
        for (p, w) in rule.iter() {
            let q = q1_eval(&c, p[0], p[1]);
            let val = |v: &[f64], off: usize| -> f64 { (0..4).map(|a| q.shapes[a].value * v[off + el[a]]).sum() };
            let bx = val(&thin.beta, 0) - limit_sys.eval(&limit.phi, q.x[0]);
            let by = val(&thin.beta, nn);
            let ww = val(&thin.w, 0) - limit_sys.eval(&limit.w, q.x[0]);
            err += w * q.det_j * (bx * bx + by * by + ww * ww);
        }
    }
    let gap = (err / conn.delta()).sqrt() / f0_norm;
    Ok(GapResult { gap, f0_norm, thin, limit })
}

/// Energy of a thin pair: `delta^{-1} (1/2 x^T A x - l^T x)` with the load of
/// `E f0`, and its homogeneous part `delta^{-1} 1/2 x^T A x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energy {
    pub total: f64,
    pub homogeneous: f64,
}

pub fn energy_functional(conn: &ConnectingSystem, thin_sys: &RmSystem, pair: &FieldPair, f0: &LimitData) -> Result<Energy> {
    if thin_sys.bc != BcFamily::FreeNeumann || !thin_sys.shifted {
        return invalid("the energy functional is defined on the free shifted thin system");
    }
    let x = thin_sys.dofmap.restrict(&thin_sys.full_vector(&pair.beta, &pair.w)?);
    let (fb, fw) = conn.extend_pair(f0)?;
    let load = thin_sys.load(&fb, &fw)?;
    let hom = 0.5 * thin_sys.pencil.a.quad_form(&x);
    let lin: f64 = load.iter().zip(&x).map(|(a, b)| a * b).sum();
    let inv = 1.0 / conn.delta();
    Ok(Energy { total: inv * (hom - lin), homogeneous: inv * hom })
}
