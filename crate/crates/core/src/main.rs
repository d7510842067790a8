use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rm_plate::biharmonic::{assemble_biharmonic_pencil, LimitBc};
use rm_plate::eigen::{solve_gep_smallest, EigOptions, EigResult};
use rm_plate::experiments::{emit_report, run_sweep, Report, SweepConfig, SweepKind};
use rm_plate::fem::mm::write_dense_matrix_market;
use rm_plate::fem::Pencil;
use rm_plate::geometry::{build_interval_mesh, build_rect_mesh, triangulate, ElementKind, Mesh, ThinDomainSpec};
use rm_plate::rm::{assemble_rm_pencil, BcFamily, MaterialParams};
use rm_plate::thin::assemble_limit_pencil;
use rm_plate::Result;

#[derive(Parser)]
#[command(name = "rm-plate", version, about = "Plate eigenproblems, their thin limits and convergence sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Smallest eigenpairs of a shifted plate pencil.
    SolveRm {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long, default_value = "hard-clamped")]
        bc: BcFamily,
        #[command(flatten)]
        material: MaterialArgs,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Smallest eigenpairs of the shifted Morley biharmonic pencil.
    SolveBiharmonic {
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long, default_value = "clamped")]
        bc: LimitBc,
        #[command(flatten)]
        material: MaterialArgs,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Smallest eigenpairs of the one-dimensional limit pencil on a cylinder.
    SolveLimit {
        /// Cells of the base interval (0, 1).
        #[arg(long, default_value_t = 64)]
        cells: usize,
        #[command(flatten)]
        material: MaterialArgs,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Plate eigenvalues against the biharmonic limit as t decreases.
    SweepT(SweepArgs),
    /// Thin-domain resolvent and eigenvalue convergence as delta decreases.
    SweepDelta(SweepArgs),
    /// Kernel dimensions of all boundary-condition families.
    KernelCheck(SweepArgs),
    /// Discrete second Korn constants.
    Korn(SweepArgs),
    /// Dirichlet eigenvalue growth on thin domains.
    Poincare(SweepArgs),
}

#[derive(Args)]
struct MeshArgs {
    /// Mesh JSON file; defaults to a structured unit square.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Subdivisions of the unit square when no mesh file is given.
    #[arg(long, default_value_t = 16)]
    n: usize,
}

impl MeshArgs {
    fn load(&self) -> Result<Mesh> {
        match &self.mesh {
            Some(path) => Mesh::read_json(path),
            None => build_rect_mesh(1.0, 1.0, self.n, self.n),
        }
    }
}

#[derive(Args)]
struct MaterialArgs {
    #[arg(long = "E", default_value_t = 1.0)]
    e: f64,
    #[arg(long, default_value_t = 0.3)]
    sigma: f64,
    /// Shear correction factor.
    #[arg(long, default_value_t = 5.0 / 6.0)]
    shear_correction: f64,
    /// Plate thickness.
    #[arg(long, default_value_t = 0.1)]
    t: f64,
}

impl MaterialArgs {
    fn params(&self) -> Result<MaterialParams> {
        MaterialParams::new(self.e, self.sigma, self.shear_correction, self.t)
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Number of eigenpairs.
    #[arg(short = 'k', long, default_value_t = 6)]
    num_eigs: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Writes `<prefix>_A.mtx` and `<prefix>_B.mtx` into this directory.
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
    /// Also writes the eigenvectors as a dense Matrix Market array.
    #[arg(long, requires = "dump_matrices")]
    dump_eigvecs: bool,
    /// JSON file for the results; printed to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON config overriding the defaults of the sweep.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for report.json and report.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    problem: &'a str,
    dofs: usize,
    eigenvalues: &'a [f64],
    residuals: &'a [f64],
}

fn solve(problem: &str, prefix: &str, pencil: &Pencil, args: &SolveArgs) -> Result<bool> {
    let opts = EigOptions { tol: args.tol, ..EigOptions::smallest(args.num_eigs.min(pencil.n())) };
    let r: EigResult = solve_gep_smallest(&pencil.a, &pencil.b, &opts)?;
    if let Some(dir) = &args.dump_matrices {
        pencil.dump(dir, prefix)?;
        if args.dump_eigvecs {
            write_dense_matrix_market(&r.eigenvectors, &dir.join(format!("{prefix}_eigvecs.mtx")))?;
        }
    }
    let out = SolveOutput { problem, dofs: pencil.n(), eigenvalues: &r.eigenvalues, residuals: &r.residuals };
    let text = serde_json::to_string_pretty(&out)?;
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|source| rm_plate::Error::Io { path: path.clone(), source })?,
        None => println!("{text}"),
    }
    Ok(r.residuals.iter().all(|&x| x <= args.tol))
}

fn sweep(kind: SweepKind, args: &SweepArgs) -> Result<bool> {
    let cfg = match &args.config {
        Some(path) => SweepConfig::read(path, Some(kind))?,
        None => SweepConfig::defaults(kind),
    };
    let report: Report = run_sweep(&cfg)?;
    let dir = args.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    let (json, csv) = emit_report(&report, &dir)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {} and {}", display(&json), display(&csv));
    Ok(report.passed())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SolveRm { mesh, bc, material, solve: args } => {
            let sys = assemble_rm_pencil(&mesh.load()?, &material.params()?, bc, true)?;
            solve("rm", "rm", &sys.pencil, &args)
        }
        Command::SolveBiharmonic { mesh, bc, material, solve: args } => {
            let mut m = mesh.load()?;
            if m.element_kind == ElementKind::Quad4 {
                m = triangulate(&m)?;
            }
            let p = material.params()?;
            let sys = assemble_biharmonic_pencil(&m, p.e, p.sigma, bc)?;
            solve("biharmonic", "biharmonic", &sys.pencil, &args)
        }
        Command::SolveLimit { cells, material, solve: args } => {
            let spec = ThinDomainSpec::cylinder(0.0, 1.0, 0.1)?;
            let sys = assemble_limit_pencil(&build_interval_mesh(0.0, 1.0, cells)?, &spec, &material.params()?, 1)?;
            solve("limit", "limit", &sys.pencil, &args)
        }
        Command::SweepT(a) => sweep(SweepKind::Thickness, &a),
        Command::SweepDelta(a) => sweep(SweepKind::Delta, &a),
        Command::KernelCheck(a) => sweep(SweepKind::Kernel, &a),
        Command::Korn(a) => sweep(SweepKind::Korn, &a),
        Command::Poincare(a) => sweep(SweepKind::Poincare, &a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
