//! Convergence sweeps in the plate thickness and the domain thinness, kernel
//! census, Korn and Poincare constants, rate fits and report files.
//!
//! Every sweep that fits a rate runs at two mesh levels. A rate is only
//! claimed for an error family when both levels agree on each error within the
//! configured control tolerance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::biharmonic::{assemble_biharmonic_pencil, map_limit_bc};
use crate::eigen::{clusters, principal_angles, solve_gep_smallest, EigOptions, EigResult, CLUSTER_TOL};
use crate::error::{invalid, io_err, Error, Result};
use crate::fem::basis::q1_eval;
use crate::fem::quadrature::gauss_quad;
use crate::fem::{assemble_matrix, assemble_scalar_density, build_dofmap, ElementSpace, Essential, SparseSymMatrix};
use crate::geometry::{build_rect_mesh, build_thin_mesh, triangulate, Mesh, Profile, ThinDomainSpec};
use crate::rm::{assemble_rm_pencil, interpolate_pair, kernel_count, BcFamily, MaterialParams};
use crate::thin::{resolvent_gap_with, ConnectingSystem, LimitData, LimitSystem};

/// Errors at or below this are exact zeros; no rate is fitted to them.
pub const EXACT_TOL: f64 = 1e-8;

/// Eigenvalues within this distance of 1 belong to the kernel of a shifted pencil.
pub const UNIT_TOL: f64 = 1e-6;

/// Thin eigenpairs whose section average keeps more than this share of the
/// norm are compared with limit eigenpairs.
pub const AVERAGED_FRACTION: f64 = 0.5;

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"), " (", env!("RM_PLATE_GIT_DESCRIBE"), ")");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    Thickness,
    Delta,
    Korn,
    Kernel,
    Poincare,
}

/// Base interval and profiles of the thin domains; `delta` comes from the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub base_interval: (f64, f64),
    pub f1: Profile,
    pub f2: Profile,
}

impl Default for Domain {
    fn default() -> Self {
        Domain { base_interval: (0.0, 1.0), f1: Profile::constant(0.0, 1.0, 0.5), f2: Profile::constant(0.0, 1.0, 0.5) }
    }
}

impl Domain {
    pub fn spec(&self, delta: f64) -> Result<ThinDomainSpec> {
        ThinDomainSpec::new(self.base_interval, self.f1.clone(), self.f2.clone(), delta, 1)
    }
}

/// Limit data `f0 = (Phi, phi)` for the resolvent gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSpec {
    /// `(0, sin(pi (x - a) / (b - a)))`.
    Sine,
    /// `(a, a x + b)`.
    Rigid { a: f64, b: f64 },
    /// Piecewise-linear samples.
    Samples { x: Vec<f64>, phi: Vec<f64>, w: Vec<f64> },
}

impl DataSpec {
    pub fn sample(&self, base: (f64, f64), xs: &[f64]) -> Result<LimitData> {
        match self {
            DataSpec::Sine => {
                let (a, b) = base;
                Ok(LimitData::from_fn(xs, |_| 0.0, |x| (std::f64::consts::PI * (x - a) / (b - a)).sin()))
            }
            DataSpec::Rigid { a, b } => Ok(LimitData::from_fn(xs, |_| *a, |x| a * x + b)),
            DataSpec::Samples { x, phi, w } => {
                let p = Profile::from_samples(x.clone(), phi.clone()).or_else(|_| invalid("f0 samples are malformed"))?;
                let q = Profile::from_samples(x.clone(), w.clone()).or_else(|_| invalid("f0 samples are malformed"))?;
                Ok(LimitData::from_fn(xs, |s| p.eval(s), |s| q.eval(s)))
            }
        }
    }
}

/// Pass/fail thresholds. Unset entries are not checked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Largest relative disagreement between the two mesh levels for a claimed rate.
    pub control: f64,
    pub min_slope: Option<f64>,
    pub max_slope: Option<f64>,
    pub min_r2: Option<f64>,
    /// Largest relative gap at the last sweep point.
    pub max_final_gap: Option<f64>,
    /// Largest principal angle at the last sweep point.
    pub max_angle: Option<f64>,
    /// Largest relative change of a constant between consecutive mesh levels.
    pub max_refinement_change: Option<f64>,
    /// Relative tolerance on the analytic value of the reference problem.
    pub reference_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: SweepKind,
    /// `t` or `delta` values, strictly decreasing.
    pub parameters: Vec<f64>,
    /// Mesh levels, increasing. The last is the primary level, the one before it the control.
    pub levels: Vec<usize>,
    /// Thin-direction layers per level (delta sweeps).
    pub layers: Vec<usize>,
    /// Morley levels extrapolated into the thickness-sweep reference.
    pub reference_levels: Vec<usize>,
    pub params: MaterialParams,
    pub bc: BcFamily,
    /// Eigenvalues (thickness) or eigenvalue clusters (delta) compared.
    pub k: usize,
    /// Relative residual accepted from the eigensolver.
    pub eig_tol: f64,
    pub domain: Domain,
    pub f0: DataSpec,
    pub thresholds: Thresholds,
    pub output: Option<PathBuf>,
}

impl SweepConfig {
    pub fn defaults(kind: SweepKind) -> Self {
        let base = SweepConfig {
            kind,
            parameters: vec![],
            levels: vec![16],
            layers: vec![],
            reference_levels: vec![],
            params: MaterialParams::default(),
            bc: BcFamily::HardClamped,
            k: 1,
            eig_tol: 1e-6,
            domain: Domain::default(),
            f0: DataSpec::Sine,
            thresholds: Thresholds { control: 0.2, ..Default::default() },
            output: None,
        };
        match kind {
            SweepKind::Thickness => SweepConfig {
                parameters: vec![0.2, 0.1, 0.05, 0.025],
                levels: vec![32, 64],
                reference_levels: vec![32, 64],
                k: 4,
                thresholds: Thresholds { control: 0.2, min_slope: Some(0.9), max_final_gap: Some(0.02), ..Default::default() },
                ..base
            },
            SweepKind::Delta => SweepConfig {
                parameters: vec![0.4, 0.2, 0.1, 0.05],
                levels: vec![64, 128],
                layers: vec![4, 8],
                k: 3,
                thresholds: Thresholds {
                    control: 0.2,
                    min_slope: Some(0.45),
                    min_r2: Some(0.98),
                    max_final_gap: Some(0.01),
                    max_angle: Some(0.15),
                    ..Default::default()
                },
                ..base
            },
            SweepKind::Korn => SweepConfig {
                parameters: vec![0.4, 0.2, 0.1],
                levels: vec![16, 32],
                thresholds: Thresholds { control: 0.2, max_refinement_change: Some(0.05), ..Default::default() },
                ..base
            },
            SweepKind::Kernel => SweepConfig { eig_tol: 1e-9, ..base },
            SweepKind::Poincare => SweepConfig {
                parameters: vec![0.4, 0.2, 0.1],
                levels: vec![16, 32],
                thresholds: Thresholds { control: 0.2, max_slope: Some(-1.9), reference_tol: Some(0.01), ..Default::default() },
                ..base
            },
        }
    }

    /// Parses a JSON config on top of the defaults of its kind. `kind` is used
    /// when the document has no `kind` field and must agree with it otherwise.
    pub fn from_json(text: &str, kind: Option<SweepKind>) -> Result<Self> {
        let user: Value = serde_json::from_str(text)?;
        if !user.is_object() {
            return invalid("config must be a JSON object");
        }
        let found: Option<SweepKind> = user.get("kind").map(|v| serde_json::from_value(v.clone())).transpose()?;
        let kind = match (found, kind) {
            (Some(a), Some(b)) if a != b => return invalid(format!("config kind {a:?} does not match {b:?}")),
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return invalid("config has no kind"),
        };
        let mut merged = serde_json::to_value(Self::defaults(kind))?;
        merge(&mut merged, &user);
        let cfg: SweepConfig = serde_json::from_value(merged)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path, kind: Option<SweepKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text, kind)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.k == 0 {
            return invalid("k must be at least 1");
        }
        if !(self.eig_tol > 0.0) {
            return invalid("eig_tol must be positive");
        }
        if self.parameters.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return invalid("sweep parameters must be positive");
        }
        if self.parameters.windows(2).any(|w| !(w[1] < w[0])) {
            return invalid("sweep parameters must be strictly decreasing");
        }
        if self.kind != SweepKind::Kernel && self.parameters.len() < 3 {
            return invalid("a rate fit needs at least 3 sweep points");
        }
        if self.levels.is_empty() || self.levels.iter().any(|&n| n < 2) || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("mesh levels must be increasing and at least 2");
        }
        if matches!(self.kind, SweepKind::Thickness | SweepKind::Delta | SweepKind::Poincare) && self.levels.len() < 2 {
            return invalid("this sweep needs two mesh levels for its discretization control");
        }
        match self.kind {
            SweepKind::Thickness => {
                if self.reference_levels.is_empty() || self.reference_levels.windows(2).any(|w| w[1] <= w[0]) {
                    return invalid("reference levels must be non-empty and increasing");
                }
            }
            SweepKind::Delta => {
                if self.layers.len() != self.levels.len() || self.layers.contains(&0) {
                    return invalid("delta sweeps need one positive layer count per level");
                }
                self.domain.spec(self.parameters[0])?;
            }
            _ => {}
        }
        Ok(())
    }

    fn eig_options(&self, k: usize) -> EigOptions {
        EigOptions { tol: self.eig_tol, ..EigOptions::smallest(k) }
    }
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// Least-squares line through `(log parameter, log error)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return invalid("a rate fit needs at least 3 points");
    }
    if points.iter().any(|&(p, e)| !(p > 0.0 && p.is_finite() && e > 0.0 && e.is_finite())) {
        return invalid("rate fits need positive parameters and errors");
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return invalid("rate fits need distinct parameters");
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(RateFit { slope, intercept: my - slope * mx, r2, points: points.to_vec() })
}

/// Largest pairwise relative difference `|p - c| / max(|p|, |c|)`.
pub fn control_disagreement(primary: &[f64], control: &[f64]) -> f64 {
    primary
        .iter()
        .zip(control)
        .map(|(p, c)| {
            let m = p.abs().max(c.abs());
            if m == 0.0 {
                0.0
            } else {
                (p - c).abs() / m
            }
        })
        .fold(0.0, f64::max)
}

/// `fine + (fine - coarse) / (2^order - 1)` for a halved mesh size.
pub fn richardson(coarse: f64, fine: f64, order: i32) -> f64 {
    fine + (fine - coarse) / (2f64.powi(order) - 1.0)
}

/// One error family across the sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyFit {
    pub name: String,
    /// All primary errors are at or below [`EXACT_TOL`].
    pub exact: bool,
    pub fit: Option<RateFit>,
    /// Largest relative disagreement between primary and control errors.
    pub disagreement: f64,
    /// The fit exists and the control levels agree.
    pub claimed: bool,
}

fn family(name: &str, parameters: &[f64], primary: &[f64], control: &[f64], control_tol: f64) -> FamilyFit {
    let exact = primary.iter().all(|e| e.abs() <= EXACT_TOL);
    let fit = if exact {
        None
    } else {
        let pts: Vec<(f64, f64)> = parameters.iter().copied().zip(primary.iter().copied()).collect();
        fit_rate(&pts).ok()
    };
    let disagreement = control_disagreement(primary, control);
    let claimed = fit.is_some() && disagreement <= control_tol;
    FamilyFit { name: name.to_string(), exact, fit, disagreement, claimed }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(checks: &mut Vec<Check>, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
    checks.push(Check { name: name.into(), passed, detail: detail.into() });
}

/// Measurements at one sweep parameter.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: f64,
    /// Per-eigenvalue (or per-cluster) gaps at the primary level.
    pub gaps: Vec<f64>,
    pub control_gaps: Vec<f64>,
    pub resolvent_gap: Option<f64>,
    pub control_resolvent_gap: Option<f64>,
    /// Eigenvalues at the primary level.
    pub eigenvalues: Vec<f64>,
    pub reference: Vec<f64>,
    /// Largest principal angle per cluster at the primary level.
    pub angles: Vec<f64>,
    /// Scalar measured at this point (Korn or Poincare constant).
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub kind: SweepKind,
    pub config: SweepConfig,
    pub points: Vec<SweepPoint>,
    pub fits: Vec<FamilyFit>,
    pub checks: Vec<Check>,
    pub kernel: BTreeMap<String, usize>,
    pub diagnostics: BTreeMap<String, f64>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl Report {
    fn new(cfg: &SweepConfig) -> Self {
        Report {
            version: VERSION.to_string(),
            kind: cfg.kind,
            config: cfg.clone(),
            points: vec![],
            fits: vec![],
            checks: vec![],
            kernel: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn fit(&self, name: &str) -> Option<&FamilyFit> {
        self.fits.iter().find(|f| f.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// CSV header: `point,parameter,gap_1..gap_k,resolvent_gap,slope`. `slope`
    /// repeats the slope of the first fitted family on every row.
    pub fn to_csv(&self) -> String {
        let k = self.points.iter().map(|p| p.gaps.len()).max().unwrap_or(0);
        let mut s = String::from("point,parameter");
        for j in 1..=k {
            let _ = write!(s, ",gap_{j}");
        }
        s.push_str(",resolvent_gap,slope\n");
        let slope = self.fits.iter().find_map(|f| f.fit.as_ref().map(|r| r.slope));
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for (i, p) in self.points.iter().enumerate() {
            let _ = write!(s, "{i},{:e}", p.parameter);
            for j in 0..k {
                let _ = write!(s, ",{}", opt(p.gaps.get(j).copied()));
            }
            let _ = writeln!(s, ",{},{}", opt(p.resolvent_gap), opt(slope));
        }
        s
    }
}

/// Writes `report.json` and `report.csv` into `dir`.
pub fn emit_report(report: &Report, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    if report.points.is_empty() {
        return invalid("refusing to write a report without sweep points");
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let json = dir.join("report.json");
    let csv = dir.join("report.csv");
    std::fs::write(&json, report.to_json()?).map_err(io_err(&json))?;
    std::fs::write(&csv, report.to_csv()).map_err(io_err(&csv))?;
    Ok((json, csv))
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.kind {
        SweepKind::Thickness => sweep_thickness(cfg),
        SweepKind::Delta => sweep_delta(cfg),
        SweepKind::Korn => sweep_korn(cfg),
        SweepKind::Kernel => sweep_kernel(cfg),
        SweepKind::Poincare => poincare_check(cfg),
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", items.join(", "))
}

fn column(points: &[SweepPoint], f: impl Fn(&SweepPoint) -> f64) -> Vec<f64> {
    points.iter().map(f).collect()
}

/// Plate eigenvalues on the unit square against the extrapolated Morley limit.
pub fn sweep_thickness(cfg: &SweepConfig) -> Result<Report> {
    let lbc = map_limit_bc(cfg.bc)?;
    let mut report = Report::new(cfg);
    let opts = cfg.eig_options(cfg.k);
    let clock = Instant::now();
    let mut morley = Vec::new();
    for &n in &cfg.reference_levels {
        let tri = triangulate(&build_rect_mesh(1.0, 1.0, n, n)?)?;
        let sys = assemble_biharmonic_pencil(&tri, cfg.params.e, cfg.params.sigma, lbc)?;
        morley.push(solve_gep_smallest(&sys.pencil.a, &sys.pencil.b, &opts)?.eigenvalues);
    }
    let reference: Vec<f64> = match morley.len() {
        1 => morley[0].clone(),
        m => (0..cfg.k).map(|j| richardson(morley[m - 2][j], morley[m - 1][j], 2)).collect(),
    };
    report.timings.insert("reference".into(), clock.elapsed().as_secs_f64());
    for (j, r) in reference.iter().enumerate() {
        report.diagnostics.insert(format!("reference_{}", j + 1), *r);
    }

    let nl = cfg.levels.len();
    let mut eig = vec![Vec::new(), Vec::new()];
    for (slot, &n) in cfg.levels[nl - 2..].iter().enumerate() {
        let mesh = build_rect_mesh(1.0, 1.0, n, n)?;
        for &t in &cfg.parameters {
            let clock = Instant::now();
            let sys = assemble_rm_pencil(&mesh, &cfg.params.with_t(t), cfg.bc, true)?;
            eig[slot].push(solve_gep_smallest(&sys.pencil.a, &sys.pencil.b, &opts)?.eigenvalues);
            report.timings.insert(format!("n{n}_t{t}"), clock.elapsed().as_secs_f64());
        }
    }
    for (i, &t) in cfg.parameters.iter().enumerate() {
        let gaps = |v: &[f64]| -> Vec<f64> { (0..cfg.k).map(|j| (v[j] - reference[j]).abs()).collect() };
        report.points.push(SweepPoint {
            parameter: t,
            gaps: gaps(&eig[1][i]),
            control_gaps: gaps(&eig[0][i]),
            eigenvalues: eig[1][i].clone(),
            reference: reference.clone(),
            ..Default::default()
        });
    }

    let th = &cfg.thresholds;
    let mut first_rate = None;
    for j in 0..cfg.k {
        let name = format!("eig_{}", j + 1);
        let prim = column(&report.points, |p| p.gaps[j]);
        let ctrl = column(&report.points, |p| p.control_gaps[j]);
        let fam = family(&name, &cfg.parameters, &prim, &ctrl, th.control);
        if fam.exact {
            check(&mut report.checks, format!("{name}_exact"), true, fmt_list(&prim));
        } else {
            check(&mut report.checks, format!("{name}_decreasing"), strictly_decreasing(&prim), fmt_list(&prim));
            if let Some(m) = th.max_final_gap {
                let rel = prim[prim.len() - 1] / reference[j].abs();
                check(&mut report.checks, format!("{name}_final_gap"), rel <= m, format!("relative gap {rel:.4e}, limit {m}"));
            }
            first_rate.get_or_insert(fam.clone());
        }
        report.fits.push(fam);
    }
    if let (Some(min), Some(fam)) = (th.min_slope, first_rate) {
        let slope = fam.fit.as_ref().map_or(f64::NAN, |f| f.slope);
        check(
            &mut report.checks,
            format!("{}_slope", fam.name),
            fam.claimed && slope >= min,
            format!("slope {slope:.4}, minimum {min}, control disagreement {:.3} (limit {})", fam.disagreement, th.control),
        );
    }
    report.timings.insert("total".into(), clock.elapsed().as_secs_f64());
    Ok(report)
}

/// Smallest eigenpairs passing `accept`, enlarging the request until `want` are found.
fn accepted_pairs(a: &SparseSymMatrix, b: &SparseSymMatrix, want: usize, tol: f64, accept: impl Fn(f64, &[f64]) -> Result<bool>) -> Result<EigResult> {
    let n = a.n();
    let mut k = (2 * want + 4).min(n);
    loop {
        let r = solve_gep_smallest(a, b, &EigOptions { tol, ..EigOptions::smallest(k) })?;
        let mut out = EigResult::default();
        for i in 0..r.eigenvalues.len() {
            if accept(r.eigenvalues[i], &r.eigenvectors[i])? {
                out.eigenvalues.push(r.eigenvalues[i]);
                out.eigenvectors.push(r.eigenvectors[i].clone());
                out.residuals.push(r.residuals[i]);
            }
        }
        if out.eigenvalues.len() >= want {
            return Ok(out);
        }
        if k == n {
            return invalid(format!("only {} of {want} requested eigenpairs exist", out.eigenvalues.len()));
        }
        k = (2 * k).min(n);
    }
}

fn is_unit(l: f64) -> bool {
    (l - 1.0).abs() <= UNIT_TOL
}

/// Non-kernel eigenpairs of the limit pencil, as column data.
fn limit_modes(sys: &LimitSystem, want: usize, tol: f64) -> Result<(Vec<f64>, Vec<LimitData>)> {
    let r = accepted_pairs(&sys.pencil.a, &sys.pencil.b, want, tol, |l, _| Ok(!is_unit(l)))?;
    let vecs = r.eigenvectors.iter().map(|v| sys.from_dofs(v)).collect();
    Ok((r.eigenvalues, vecs))
}

struct ThinLevel {
    resolvent: f64,
    values: Vec<f64>,
    averaged: Vec<LimitData>,
    limit: Vec<LimitData>,
    gram: SparseSymMatrix,
}

fn stack(d: &LimitData) -> Vec<f64> {
    d.phi.iter().chain(&d.w).copied().collect()
}

/// Thin-domain resolvent and eigenvalue convergence toward the limit system.
pub fn sweep_delta(cfg: &SweepConfig) -> Result<Report> {
    let mut report = Report::new(cfg);
    let clock = Instant::now();
    let nl = cfg.levels.len();
    let levels: Vec<(usize, usize)> = (nl - 2..nl).map(|i| (cfg.levels[i], cfg.layers[i])).collect();
    let want = cfg.k + 2;

    let mut limits = Vec::new();
    for &(n, _) in &levels {
        let spec = cfg.domain.spec(cfg.parameters[0])?;
        let conn = ConnectingSystem::new(&spec, n, 1)?;
        let sys = conn.limit_system(&cfg.params)?;
        let (values, vecs) = limit_modes(&sys, want, cfg.eig_tol)?;
        limits.push((sys, values, vecs));
    }
    let reference: Vec<f64> = (0..want).map(|j| richardson(limits[0].1[j], limits[1].1[j], 4)).collect();
    let groups: Vec<std::ops::Range<usize>> = clusters(&reference, CLUSTER_TOL).into_iter().take(cfg.k).collect();
    if groups.len() < cfg.k || groups.last().map_or(true, |g| g.end >= want) {
        return invalid("not enough separated limit eigenvalue clusters; lower k");
    }
    let members = groups.last().map_or(0, |g| g.end);
    let cluster_ref: Vec<f64> = groups.iter().map(|g| reference[g.clone()].iter().sum::<f64>() / g.len() as f64).collect();
    for (c, r) in cluster_ref.iter().enumerate() {
        report.diagnostics.insert(format!("limit_{}", c + 1), *r);
    }
    report.timings.insert("limit".into(), clock.elapsed().as_secs_f64());

    for &delta in &cfg.parameters {
        let spec = cfg.domain.spec(delta)?;
        let mut runs = Vec::new();
        for (slot, &(n, ny)) in levels.iter().enumerate() {
            let clock = Instant::now();
            let conn = ConnectingSystem::new(&spec, n, ny)?;
            let thin = conn.thin_system(&cfg.params)?;
            let lim = &limits[slot].0;
            let f0 = cfg.f0.sample(cfg.domain.base_interval, conn.column_x())?;
            let gap = resolvent_gap_with(&conn, &thin, lim, &f0)?;
            let nn = conn.thin.n_nodes();
            let r = accepted_pairs(&thin.pencil.a, &thin.pencil.b, members, cfg.eig_tol, |l, v| {
                if is_unit(l) {
                    return Ok(false);
                }
                let full = thin.dofmap.expand(v);
                Ok(conn.averaged_fraction(&full[..2 * nn], &full[2 * nn..])? > AVERAGED_FRACTION)
            })?;
            let averaged = r
                .eigenvectors
                .iter()
                .map(|v| {
                    let full = thin.dofmap.expand(v);
                    conn.average_pair(&full[..2 * nn], &full[2 * nn..])
                })
                .collect::<Result<Vec<_>>>()?;
            runs.push(ThinLevel { resolvent: gap.gap, values: r.eigenvalues, averaged, limit: limits[slot].2.clone(), gram: conn.h0_gram() });
            report.timings.insert(format!("n{n}_delta{delta}"), clock.elapsed().as_secs_f64());
        }
        let gaps = |run: &ThinLevel| -> Vec<f64> {
            groups.iter().zip(&cluster_ref).map(|(g, r)| g.clone().map(|i| (run.values[i] - r).abs()).sum()).collect()
        };
        let prim = &runs[1];
        let mut angles = Vec::new();
        for g in &groups {
            let u: Vec<Vec<f64>> = g.clone().map(|i| stack(&prim.averaged[i])).collect();
            let v: Vec<Vec<f64>> = g.clone().map(|i| stack(&prim.limit[i])).collect();
            let a = principal_angles(&u, &v, &prim.gram)?;
            angles.push(a.into_iter().fold(0.0, f64::max));
        }
        report.points.push(SweepPoint {
            parameter: delta,
            gaps: gaps(prim),
            control_gaps: gaps(&runs[0]),
            resolvent_gap: Some(prim.resolvent),
            control_resolvent_gap: Some(runs[0].resolvent),
            eigenvalues: prim.values[..members].to_vec(),
            reference: cluster_ref.clone(),
            angles,
            value: None,
        });
    }

    let th = &cfg.thresholds;
    let prim = column(&report.points, |p| p.resolvent_gap.unwrap_or(f64::NAN));
    let ctrl = column(&report.points, |p| p.control_resolvent_gap.unwrap_or(f64::NAN));
    let fam = family("resolvent", &cfg.parameters, &prim, &ctrl, th.control);
    if fam.exact {
        check(&mut report.checks, "resolvent_exact", true, fmt_list(&prim));
    } else {
        check(&mut report.checks, "resolvent_decreasing", strictly_decreasing(&prim), fmt_list(&prim));
        let (slope, r2) = fam.fit.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.slope, f.r2));
        if let Some(min) = th.min_slope {
            check(
                &mut report.checks,
                "resolvent_slope",
                fam.claimed && slope >= min,
                format!("slope {slope:.4}, minimum {min}, control disagreement {:.3} (limit {})", fam.disagreement, th.control),
            );
        }
        if let Some(min) = th.min_r2 {
            check(&mut report.checks, "resolvent_r2", r2 >= min, format!("r2 {r2:.5}, minimum {min}"));
        }
    }
    report.fits.push(fam);
    let last = report.points.len() - 1;
    for c in 0..groups.len() {
        let name = format!("eig_{}", c + 1);
        let prim = column(&report.points, |p| p.gaps[c]);
        let ctrl = column(&report.points, |p| p.control_gaps[c]);
        check(&mut report.checks, format!("{name}_decreasing"), strictly_decreasing(&prim), fmt_list(&prim));
        if let Some(m) = th.max_final_gap {
            let rel = prim[last] / (cluster_ref[c].abs() * groups[c].len() as f64);
            check(&mut report.checks, format!("{name}_final_gap"), rel < m, format!("relative gap {rel:.4e}, limit {m}"));
        }
        if let Some(m) = th.max_angle {
            let a = report.points[last].angles[c];
            check(&mut report.checks, format!("{name}_final_angle"), a <= m, format!("angle {a:.4e} rad, limit {m}"));
        }
        report.fits.push(family(&name, &cfg.parameters, &prim, &ctrl, th.control));
    }
    report.timings.insert("total".into(), clock.elapsed().as_secs_f64());
    Ok(report)
}

/// Kernel dimension of every shifted plate pencil on `mesh`.
pub fn kernel_census(params: &MaterialParams, mesh: &Mesh) -> Result<Vec<(BcFamily, usize)>> {
    BcFamily::ALL
        .iter()
        .map(|&bc| {
            let sys = assemble_rm_pencil(mesh, params, bc, true)?;
            Ok((bc, kernel_count(&sys, 1e-8)?))
        })
        .collect()
}

fn sweep_kernel(cfg: &SweepConfig) -> Result<Report> {
    let mut report = Report::new(cfg);
    let clock = Instant::now();
    for &n in &cfg.levels {
        let census = kernel_census(&cfg.params, &build_rect_mesh(1.0, 1.0, n, n)?)?;
        let ok = census.iter().all(|(bc, c)| *c == bc.kernel_dimension());
        let detail: Vec<String> = census.iter().map(|(bc, c)| format!("{bc}: {c}")).collect();
        check(&mut report.checks, format!("census_n{n}"), ok, detail.join(", "));
        report.kernel = census.iter().map(|(bc, c)| (bc.name().to_string(), *c)).collect();
        report.points.push(SweepPoint { parameter: n as f64, gaps: census.iter().map(|(_, c)| *c as f64).collect(), ..Default::default() });
    }
    report.timings.insert("total".into(), clock.elapsed().as_secs_f64());
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KornSubspace {
    /// No constraints: the second Korn inequality.
    Full,
    /// Vanishing trace, which removes rigid motions.
    Clamped,
}

/// `(K, M)` with `K = int |D eta|^2` and `M = int |eps(eta)|^2 + |eta|^2` on Q1 vector fields.
pub fn korn_pencil(mesh: &Mesh, subspace: KornSubspace) -> Result<(SparseSymMatrix, SparseSymMatrix)> {
    let ess = match subspace {
        KornSubspace::Full => Essential::NONE,
        KornSubspace::Clamped => Essential::VALUE,
    };
    let dofmap = build_dofmap(mesh, ElementSpace::Q1Vector2, &|_| ess)?;
    let rule = gauss_quad(2);
    let mut locals = Vec::with_capacity(mesh.n_elements());
    for e in 0..mesh.n_elements() {
        let c = mesh.element_coords(e);
        let (mut k, mut m) = (DMatrix::zeros(8, 8), DMatrix::zeros(8, 8));
        for (p, w) in rule.iter() {
            let q = q1_eval(&c, p[0], p[1]);
            let jw = w * q.det_j;
            for i in 0..8 {
                for j in 0..8 {
                    let (ci, ai, cj, aj) = (i / 4, i % 4, j / 4, j % 4);
                    let (gi, gj) = (q.shapes[ai].grad, q.shapes[aj].grad);
                    let same = if ci == cj { gi[0] * gj[0] + gi[1] * gj[1] } else { 0.0 };
                    let eps = 0.5 * (same + gi[cj] * gj[ci]);
                    let nn = if ci == cj { q.shapes[ai].value * q.shapes[aj].value } else { 0.0 };
                    k[(i, j)] += jw * same;
                    m[(i, j)] += jw * (eps + nn);
                }
            }
        }
        locals.push((k, m));
    }
    let k = assemble_matrix(&dofmap, |e| Ok(locals[e].0.clone()))?;
    let m = assemble_matrix(&dofmap, |e| Ok(locals[e].1.clone()))?;
    Ok((k, m))
}

/// Largest eigenvalue of `(K, M)`, computed as `1 / mu - 1` with `mu` the
/// smallest eigenvalue of `(M, K + M)`.
pub fn korn_constant(mesh: &Mesh, subspace: KornSubspace) -> Result<f64> {
    let (k, m) = korn_pencil(mesh, subspace)?;
    let km = k.add_scaled(1.0, &m, 1.0)?;
    let r = solve_gep_smallest(&m, &km, &EigOptions { tol: 1e-8, ..EigOptions::smallest(1) })?;
    Ok(1.0 / r.eigenvalues[0] - 1.0)
}

/// Rayleigh quotient of `(K, M)` at the interpolant of the rotation `(y, -x)`.
pub fn rotation_quotient(mesh: &Mesh) -> Result<f64> {
    let (k, m) = korn_pencil(mesh, KornSubspace::Full)?;
    let (beta, _) = interpolate_pair(mesh, |p| [p[1], -p[0]], |_| 0.0);
    Ok(k.quad_form(&beta) / m.quad_form(&beta))
}

fn sweep_korn(cfg: &SweepConfig) -> Result<Report> {
    let mut report = Report::new(cfg);
    let clock = Instant::now();
    let th = &cfg.thresholds;
    let mut square = Vec::new();
    for &n in &cfg.levels {
        let c = korn_constant(&build_rect_mesh(1.0, 1.0, n, n)?, KornSubspace::Full)?;
        report.diagnostics.insert(format!("unit_square_n{n}"), c);
        square.push(c);
    }
    let quotient = rotation_quotient(&build_rect_mesh(1.0, 1.0, cfg.levels[0], cfg.levels[0])?)?;
    report.diagnostics.insert("rotation_quotient".into(), quotient);
    check(&mut report.checks, "unit_square_lower_bound", square.iter().all(|&c| c >= quotient - 1e-10), format!("constants {}, rotation quotient {quotient:.6}", fmt_list(&square)));
    if let Some(m) = th.max_refinement_change {
        let change = square.windows(2).map(|w| (w[1] - w[0]).abs() / w[0]).fold(0.0, f64::max);
        check(&mut report.checks, "unit_square_refinement", change <= m, format!("largest relative change {change:.4e}, limit {m}"));
    }
    let n = *cfg.levels.last().unwrap_or(&16);
    for &delta in &cfg.parameters {
        let mesh = build_thin_mesh(&cfg.domain.spec(delta)?, n, n)?;
        let c = korn_constant(&mesh, KornSubspace::Full)?;
        report.points.push(SweepPoint { parameter: delta, gaps: vec![c], value: Some(c), ..Default::default() });
    }
    let values = column(&report.points, |p| p.value.unwrap_or(f64::NAN));
    check(&mut report.checks, "thin_increasing", values.windows(2).all(|w| w[1] > w[0]), fmt_list(&values));
    let pts: Vec<(f64, f64)> = cfg.parameters.iter().copied().zip(values.iter().copied()).collect();
    report.fits.push(FamilyFit { name: "korn".into(), exact: false, fit: fit_rate(&pts).ok(), disagreement: 0.0, claimed: false });
    report.timings.insert("total".into(), clock.elapsed().as_secs_f64());
    Ok(report)
}

/// Smallest eigenvalue of the Dirichlet Laplacian pencil `(int |grad w|^2, int w^2)`.
pub fn dirichlet_eigenvalue(mesh: &Mesh, tol: f64) -> Result<f64> {
    let dofmap = build_dofmap(mesh, ElementSpace::Q1Scalar, &|_| Essential::VALUE)?;
    let rule = gauss_quad(2);
    let a = assemble_scalar_density(mesh, &dofmap, ElementSpace::Q1Scalar, &rule, |_, u, v| u.grad[0] * v.grad[0] + u.grad[1] * v.grad[1])?;
    let b = assemble_scalar_density(mesh, &dofmap, ElementSpace::Q1Scalar, &rule, |_, u, v| u.value * v.value)?;
    Ok(solve_gep_smallest(&a, &b, &EigOptions { tol, ..EigOptions::smallest(1) })?.eigenvalues[0])
}

/// Extrapolated Dirichlet eigenvalue on the thin domain of width `delta`,
/// meshed `n x n` at the last two levels.
fn extrapolated_dirichlet(domain: &Domain, delta: f64, levels: &[usize], tol: f64) -> Result<(f64, f64, f64)> {
    let spec = domain.spec(delta)?;
    let l = levels.len();
    let coarse = dirichlet_eigenvalue(&build_thin_mesh(&spec, levels[l - 2], levels[l - 2])?, tol)?;
    let fine = dirichlet_eigenvalue(&build_thin_mesh(&spec, levels[l - 1], levels[l - 1])?, tol)?;
    Ok((richardson(coarse, fine, 2), coarse, fine))
}

/// Growth of the Dirichlet eigenvalue on thin domains, plus the `delta = 1` check against `2 pi^2`.
pub fn poincare_check(cfg: &SweepConfig) -> Result<Report> {
    let mut report = Report::new(cfg);
    let clock = Instant::now();
    let th = &cfg.thresholds;
    let (unit, _, _) = extrapolated_dirichlet(&cfg.domain, 1.0, &cfg.levels, cfg.eig_tol)?;
    let exact = 2.0 * std::f64::consts::PI.powi(2);
    report.diagnostics.insert("unit_extrapolated".into(), unit);
    if let Some(tol) = th.reference_tol {
        let rel = (unit - exact).abs() / exact;
        check(&mut report.checks, "unit_square_reference", rel <= tol, format!("{unit:.6} against 2 pi^2 = {exact:.6}, relative {rel:.3e}"));
    }
    for &delta in &cfg.parameters {
        let (v, coarse, fine) = extrapolated_dirichlet(&cfg.domain, delta, &cfg.levels, cfg.eig_tol)?;
        report.points.push(SweepPoint { parameter: delta, gaps: vec![v], control_gaps: vec![coarse], eigenvalues: vec![fine], value: Some(v), ..Default::default() });
    }
    let values = column(&report.points, |p| p.value.unwrap_or(f64::NAN));
    check(&mut report.checks, "positive", values.iter().all(|&v| v > 0.0), fmt_list(&values));
    let pts: Vec<(f64, f64)> = cfg.parameters.iter().copied().zip(values.iter().copied()).collect();
    let fit = fit_rate(&pts).ok();
    if let Some(max) = th.max_slope {
        let slope = fit.as_ref().map_or(f64::NAN, |f| f.slope);
        check(&mut report.checks, "slope", slope <= max, format!("slope {slope:.5}, maximum {max}"));
    }
    let claimed = fit.is_some();
    report.fits.push(FamilyFit { name: "poincare".into(), exact: false, fit, disagreement: 0.0, claimed });
    report.timings.insert("total".into(), clock.elapsed().as_secs_f64());
    Ok(report)
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| Error::InvalidArgument(format!("unknown sweep kind '{s}'")))
    }
}
