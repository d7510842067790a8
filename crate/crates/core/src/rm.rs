//! Reissner-Mindlin plate pencils for the eight boundary-condition families.
//!
//! Unknowns are the rotation `beta` (Q1 vector) and the deflection `w` (Q1
//! scalar). The form is
//!
//! ```text
//! a(beta, eta) + S int (grad w - beta).(grad v - eta)  [+ B((beta, w), (eta, v)) if shifted]
//! a(beta, eta) = D int (1 - sigma) eps(beta):eps(eta) + sigma div beta div eta
//! B            = int w v + t^2/12 beta.eta
//! ```
//!
//! with `D = E / (12 (1 - sigma^2))` and `S = E k / (2 (1 + sigma) t^2)`.
//! Bending and mass use 2x2 Gauss points, shear a single centroid point.
//! One-point shear leaves the bilinear "checkerboard" deflection without any
//! stiffness, so a gradient-jump term `D sum_gp |grad w(gp) - grad w(0)|^2`
//! is added on `w`. It vanishes on affine `w`, so the rigid kernel is kept.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigen::{count_near, solve_gep_smallest, solve_system, EigOptions};
use crate::error::{invalid, Error, Result};
use crate::fem::basis::q1_eval;
use crate::fem::quadrature::gauss_quad;
use crate::fem::{assemble_matrix, assemble_vector, build_dofmap, DofBlock, DofMap, ElementSpace, Essential, Pencil};
use crate::geometry::{ElementKind, Facet, Mesh};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    #[serde(rename = "E")]
    pub e: f64,
    pub sigma: f64,
    pub k: f64,
    pub t: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams { e: 1.0, sigma: 0.3, k: 5.0 / 6.0, t: 0.1 }
    }
}

impl MaterialParams {
    pub fn new(e: f64, sigma: f64, k: f64, t: f64) -> Result<Self> {
        let p = MaterialParams { e, sigma, k, t };
        p.validate()?;
        Ok(p)
    }

    /// Checks positivity and `sigma` in `(-1, 1)` (plate dimension 2).
    pub fn validate(&self) -> Result<()> {
        if !(self.e > 0.0 && self.k > 0.0 && self.t > 0.0) || !self.e.is_finite() || !self.t.is_finite() {
            return invalid(format!("E, k and t must be positive, got {self:?}"));
        }
        if !(self.sigma > -1.0 && self.sigma < 1.0) {
            return invalid(format!("Poisson ratio {} outside (-1, 1)", self.sigma));
        }
        Ok(())
    }

    pub fn with_t(&self, t: f64) -> Self {
        MaterialParams { t, ..*self }
    }

    /// `E / (12 (1 - sigma^2))`.
    pub fn bending_stiffness(&self) -> f64 {
        self.e / (12.0 * (1.0 - self.sigma * self.sigma))
    }

    /// `mu1 k / t^2`.
    pub fn shear_stiffness(&self) -> f64 {
        lame_coefficients(self).0 * self.k / (self.t * self.t)
    }

    /// Weight of the rotation block in the mass form.
    pub fn rotary_inertia(&self) -> f64 {
        self.t * self.t / 12.0
    }
}

/// `(mu1, mu2) = (E / (2 (1 + sigma)), sigma E / (2 (1 - sigma^2)))`.
pub fn lame_coefficients(params: &MaterialParams) -> (f64, f64) {
    let (e, s) = (params.e, params.sigma);
    (e / (2.0 * (1.0 + s)), s * e / (2.0 * (1.0 - s * s)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BcFamily {
    HardClamped,
    SoftClamped,
    HardSimplySupported,
    SoftSimplySupported,
    FreeNeumann,
    HardRigid,
    SoftRigid,
    WeakNeumann,
}

/// Which part of the rotation trace is fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RotationTrace {
    Full,
    Normal,
    Tangential,
    None,
}

impl BcFamily {
    pub const ALL: [BcFamily; 8] = [
        BcFamily::HardClamped,
        BcFamily::SoftClamped,
        BcFamily::HardSimplySupported,
        BcFamily::SoftSimplySupported,
        BcFamily::FreeNeumann,
        BcFamily::HardRigid,
        BcFamily::SoftRigid,
        BcFamily::WeakNeumann,
    ];

    /// Essential conditions `(on beta, w = 0)`.
    pub fn constraints(self) -> (RotationTrace, bool) {
        use BcFamily::*;
        match self {
            HardClamped => (RotationTrace::Full, true),
            SoftClamped => (RotationTrace::Normal, true),
            HardSimplySupported => (RotationTrace::Tangential, true),
            SoftSimplySupported => (RotationTrace::None, true),
            FreeNeumann => (RotationTrace::None, false),
            HardRigid => (RotationTrace::Full, false),
            SoftRigid => (RotationTrace::Normal, false),
            WeakNeumann => (RotationTrace::Tangential, false),
        }
    }

    /// Dimension of the kernel of the unshifted operator on a connected plate.
    pub fn kernel_dimension(self) -> usize {
        match self {
            BcFamily::FreeNeumann => 3,
            BcFamily::HardRigid | BcFamily::SoftRigid | BcFamily::WeakNeumann => 1,
            _ => 0,
        }
    }

    pub fn name(self) -> &'static str {
        use BcFamily::*;
        match self {
            HardClamped => "hard-clamped",
            SoftClamped => "soft-clamped",
            HardSimplySupported => "hard-simply-supported",
            SoftSimplySupported => "soft-simply-supported",
            FreeNeumann => "free",
            HardRigid => "hard-rigid",
            SoftRigid => "soft-rigid",
            WeakNeumann => "weak-neumann",
        }
    }
}

impl fmt::Display for BcFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BcFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        match key.as_str() {
            "clamped" => return Ok(BcFamily::HardClamped),
            "free-neumann" | "free" => return Ok(BcFamily::FreeNeumann),
            _ => {}
        }
        BcFamily::ALL
            .into_iter()
            .find(|b| b.name() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown boundary condition '{s}'")))
    }
}

/// Assembled plate problem: mesh, dof map and the reduced pencil.
#[derive(Clone, Debug)]
pub struct RmSystem {
    pub mesh: Mesh,
    pub params: MaterialParams,
    pub bc: BcFamily,
    pub shifted: bool,
    /// Blocks `[beta_x | beta_y | w]`, each indexed by node.
    pub dofmap: DofMap,
    pub pencil: Pencil,
}

/// Rotation and deflection nodal vectors. `beta` is blocked: `x` components
/// of all nodes, then `y` components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldPair {
    pub beta: Vec<f64>,
    pub w: Vec<f64>,
    /// Relative residual of the linear solve that produced the pair.
    pub residual: f64,
}

/// Element contributions in local order `[beta_x(4), beta_y(4), w(4)]`.
#[derive(Clone, Debug)]
pub struct ElementMatrices {
    pub bending: DMatrix<f64>,
    pub shear: DMatrix<f64>,
    pub hourglass: DMatrix<f64>,
    pub mass: DMatrix<f64>,
}

impl ElementMatrices {
    /// Unshifted form: bending + shear + hourglass control.
    pub fn form(&self) -> DMatrix<f64> {
        &self.bending + &self.shear + &self.hourglass
    }
}

pub fn element_matrices(c: &[[f64; 2]], params: &MaterialParams) -> ElementMatrices {
    let d = params.bending_stiffness();
    let s = params.shear_stiffness();
    let rho = params.rotary_inertia();
    let sig = params.sigma;
    let mut bending = DMatrix::zeros(12, 12);
    let mut hourglass = DMatrix::zeros(12, 12);
    let mut mass = DMatrix::zeros(12, 12);
    let center = q1_eval(c, 0.0, 0.0);
    for (p, wq) in gauss_quad(2).iter() {
        let q = q1_eval(c, p[0], p[1]);
        let jw = wq * q.det_j;
        for ia in 0..4 {
            for ib in 0..4 {
                let (ga, gb) = (q.shapes[ia].grad, q.shapes[ib].grad);
                let nn = q.shapes[ia].value * q.shapes[ib].value;
                for ca in 0..2 {
                    for cb in 0..2 {
                        // eps(e_ca N_a) : eps(e_cb N_b) and the divergence product.
                        let same = if ca == cb { ga[0] * gb[0] + ga[1] * gb[1] } else { 0.0 };
                        let eps = 0.5 * (same + ga[cb] * gb[ca]);
                        let div = ga[ca] * gb[cb];
                        bending[(4 * ca + ia, 4 * cb + ib)] += jw * d * ((1.0 - sig) * eps + sig * div);
                    }
                    mass[(4 * ca + ia, 4 * ca + ib)] += jw * rho * nn;
                }
                mass[(8 + ia, 8 + ib)] += jw * nn;
                let ja = [ga[0] - center.shapes[ia].grad[0], ga[1] - center.shapes[ia].grad[1]];
                let jb = [gb[0] - center.shapes[ib].grad[0], gb[1] - center.shapes[ib].grad[1]];
                hourglass[(8 + ia, 8 + ib)] += jw * d * (ja[0] * jb[0] + ja[1] * jb[1]);
            }
        }
    }
    // One-point shear: gamma = grad w - beta at the centroid, weight 4 det J.
    let jw = 4.0 * center.det_j * s;
    let gamma = |i: usize| -> [f64; 2] {
        match i / 4 {
            0 => [-center.shapes[i % 4].value, 0.0],
            1 => [0.0, -center.shapes[i % 4].value],
            _ => center.shapes[i % 4].grad,
        }
    };
    let mut shear = DMatrix::zeros(12, 12);
    for i in 0..12 {
        let gi = gamma(i);
        for j in 0..12 {
            let gj = gamma(j);
            shear[(i, j)] = jw * (gi[0] * gj[0] + gi[1] * gj[1]);
        }
    }
    ElementMatrices { bending, shear, hourglass, mass }
}

fn rotation_essential(trace: RotationTrace) -> Essential {
    match trace {
        RotationTrace::Full => Essential::VALUE,
        RotationTrace::Normal => Essential { normal: true, ..Essential::NONE },
        RotationTrace::Tangential => Essential { tangential: true, ..Essential::NONE },
        RotationTrace::None => Essential::NONE,
    }
}

/// Assembles the pencil of `bc` on a Quad4 mesh. With `shifted`, `A` includes `+B`.
pub fn assemble_rm_pencil(mesh: &Mesh, params: &MaterialParams, bc: BcFamily, shifted: bool) -> Result<RmSystem> {
    params.validate()?;
    if mesh.dim != 2 || mesh.element_kind != ElementKind::Quad4 {
        return invalid("plate pencils need a 2D Quad4 mesh");
    }
    let (rot, w_zero) = bc.constraints();
    let beta_ess = rotation_essential(rot);
    let beta_map = build_dofmap(mesh, ElementSpace::Q1Vector2, &|_: &Facet| beta_ess)?;
    let w_ess = if w_zero { Essential::VALUE } else { Essential::NONE };
    let w_map = build_dofmap(mesh, ElementSpace::Q1Scalar, &|_: &Facet| w_ess)?;
    let dofmap = beta_map.concat(&w_map)?;
    let locals: Vec<ElementMatrices> =
        (0..mesh.n_elements()).map(|e| element_matrices(&mesh.element_coords(e), params)).collect();
    let a = assemble_matrix(&dofmap, |e| {
        let f = locals[e].form();
        Ok(if shifted { f + &locals[e].mass } else { f })
    })?;
    let b = assemble_matrix(&dofmap, |e| Ok(locals[e].mass.clone()))?;
    let n_beta = beta_map.n_free();
    let layout = vec![
        DofBlock { name: "beta".into(), offset: 0, len: n_beta },
        DofBlock { name: "w".into(), offset: n_beta, len: w_map.n_free() },
    ];
    Ok(RmSystem { mesh: mesh.clone(), params: *params, bc, shifted, dofmap, pencil: Pencil { a, b, layout } })
}

impl RmSystem {
    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    /// Full dof vector `[beta_x, beta_y, w]` of a pair.
    pub fn full_vector(&self, beta: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let nn = self.n_nodes();
        if beta.len() != 2 * nn || w.len() != nn {
            return invalid(format!("field lengths ({}, {}) do not match {} nodes", beta.len(), w.len(), nn));
        }
        Ok(beta.iter().chain(w).copied().collect())
    }

    /// Splits a reduced vector into a pair (constrained dofs are zero).
    pub fn pair_from_reduced(&self, x: &[f64], residual: f64) -> FieldPair {
        let full = self.dofmap.expand(x);
        let nn = self.n_nodes();
        FieldPair { beta: full[..2 * nn].to_vec(), w: full[2 * nn..].to_vec(), residual }
    }

    /// `B x_data` restricted to the free dofs: `(t^2/12) int F.eta + int f v`.
    pub fn load(&self, f_beta: &[f64], f_w: &[f64]) -> Result<Vec<f64>> {
        let data = self.full_vector(f_beta, f_w)?;
        assemble_vector(&self.dofmap, |e| {
            let m = element_matrices(&self.mesh.element_coords(e), &self.params).mass;
            let dofs = &self.dofmap.element_to_global[e];
            let local: Vec<f64> = dofs.iter().map(|&g| data[g]).collect();
            Ok((0..12).map(|i| (0..12).map(|j| m[(i, j)] * local[j]).sum()).collect())
        })
    }
}

/// Solves the source problem with data `(F, f)` given as nodal interpolants.
pub fn solve_rm_source(sys: &RmSystem, f_beta: &[f64], f_w: &[f64]) -> Result<FieldPair> {
    let rhs = sys.load(f_beta, f_w)?;
    let (x, residual) = solve_system(&sys.pencil.a, &rhs)?;
    Ok(sys.pair_from_reduced(&x, residual))
}

/// Number of eigenvalues of the shifted pencil within `tol` of 1.
pub fn kernel_count(sys: &RmSystem, tol: f64) -> Result<usize> {
    if !sys.shifted {
        return invalid("kernel counting needs the shifted pencil");
    }
    let n = sys.pencil.n();
    let mut k = 6.min(n);
    loop {
        let r = solve_gep_smallest(&sys.pencil.a, &sys.pencil.b, &EigOptions::smallest(k))?;
        let c = count_near(&r.eigenvalues, 1.0, tol);
        if c < k || k == n {
            return Ok(c);
        }
        k = (2 * k).min(n);
    }
}

/// Nodal interpolant of `(beta, w)` given as functions of position.
pub fn interpolate_pair(mesh: &Mesh, beta: impl Fn([f64; 2]) -> [f64; 2], w: impl Fn([f64; 2]) -> f64) -> (Vec<f64>, Vec<f64>) {
    let nn = mesh.n_nodes();
    let mut b = vec![0.0; 2 * nn];
    let mut wv = vec![0.0; nn];
    for (i, &p) in mesh.nodes.iter().enumerate() {
        let v = beta(p);
        b[i] = v[0];
        b[nn + i] = v[1];
        wv[i] = w(p);
    }
    (b, wv)
}
