use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use g2cal::boundary::{assemble_dl, decompose_boundary_bundles, index, rigidity_report, Bundle};
use g2cal::certify::{
    algebra_suite, band_limited_field, certify_ball, certify_cy, certify_torus, smooth_field, Basis, CheckResult,
    Report, Tolerances,
};
use g2cal::cy::{adjointness_residual as dvee_adjointness, assemble_dvee, cy_kernel_dim, dvee_square_vs_laplacian};
use g2cal::dec::{build_dec, DualKind};
use g2cal::dirac::{
    adjointness_residual, assemble_d, kernel_dim, l2_norm_sq, linearization_error, spectrum, weitzenboeck_residual,
    BoundaryCondition, NormalField,
};
use g2cal::geometry::{second_fundamental_form, simons_operators};
use g2cal::mesh::{build_ball_mesh, build_torus_grid, BallShape, Domain, DomainKind, MeshFile};
use g2cal::Vec7;

#[derive(Parser, Debug)]
#[command(name = "g2cal", version, about = "Deformation numerics for associative submanifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Absolute tolerance for kernel detection (default: 1e-6 times the operator norm).
    #[arg(long, global = true)]
    abs_tol: Option<f64>,
    /// Minimum ratio between the first retained and last discarded singular value.
    #[arg(long, global = true, default_value_t = 50.0)]
    gap_ratio: f64,
    /// Tolerance for exact discrete identities.
    #[arg(long, global = true, default_value_t = 1e-10)]
    identity_tol: f64,
    /// Omit the wall time so reports are byte-identical across runs.
    #[arg(long, global = true)]
    no_timing: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cross product, associator and symbol identities on random inputs.
    AlgebraCheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a torus grid or ball mesh and write it as JSON.
    Mesh {
        #[arg(long, value_enum)]
        kind: MeshKind,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        refine: usize,
        #[arg(long, value_enum, default_value_t = ShapeArg::Round)]
        shape: ShapeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Second fundamental form and normal-bundle curvature operators.
    Simons {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, alias = "out")]
        report: Option<PathBuf>,
    },
    /// Spectrum, kernel and identity residuals of the Dirac-type operator.
    Dirac {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, value_enum, default_value_t = BcArg::None)]
        bc: BcArg,
        #[arg(long, value_enum)]
        task: DiracTask,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Boundary operator, Chern numbers, index and rigidity verdict.
    Boundary {
        #[arg(long)]
        mesh: PathBuf,
        /// Unit normal direction of the coassociative boundary condition.
        #[arg(long, default_value = "0,0,0,1,0,0,0")]
        e: String,
        #[arg(long, value_enum)]
        task: BoundaryTask,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Form-level operator on a closed 3-dimensional complex.
    Cy {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, value_enum)]
        task: CyTask,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full ball suite: index, Chern numbers, kernels, verdict, convergence.
    CertifyBall {
        #[arg(long, default_value_t = 3)]
        refine: usize,
        #[arg(long, value_enum, default_value_t = ShapeArg::Round)]
        shape: ShapeArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full torus suite: Fourier spectrum, kernel, identities, linearization.
    CertifyTorus {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Form-level suite on T³, S³ and S¹ × S².
    CertifyCy {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MeshKind {
    Torus,
    Ball,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ShapeArg {
    Round,
    Ellipsoid,
    Waisted,
}

impl ShapeArg {
    fn shape(self) -> BallShape {
        match self {
            ShapeArg::Round => BallShape::Round { radius: 1.0 },
            ShapeArg::Ellipsoid => BallShape::Ellipsoid { axes: [1.0, 0.8, 0.6] },
            ShapeArg::Waisted => BallShape::Waisted { pinch: 0.45 },
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BcArg {
    #[value(name = "nu_x")]
    NuX,
    #[value(name = "mu_x")]
    MuX,
    None,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DiracTask {
    Spectrum,
    Kernel,
    Weitzenboeck,
    Adjointness,
    Linearize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BoundaryTask {
    Dl,
    Chern,
    Index,
    Rigidity,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CyTask {
    #[value(name = "dvee-check")]
    DveeCheck,
    Betti,
    Kernel,
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// Bad input files or arguments (exit 2).
    Usage(anyhow::Error),
    /// Numerical or internal failure (exit 1).
    Runtime(anyhow::Error),
}

impl From<g2cal::G2Error> for Failure {
    fn from(e: g2cal::G2Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn load_mesh(path: &Path) -> Result<Domain, Failure> {
    MeshFile::read(path)
        .and_then(MeshFile::into_domain)
        .with_context(|| format!("reading mesh {}", path.display()))
        .map_err(Failure::Usage)
}

fn parse_e(s: &str) -> Result<Vec7, Failure> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Usage(anyhow!("--e: {e}")))?;
    let arr: [f64; 7] = parts
        .try_into()
        .map_err(|v: Vec<f64>| Failure::Usage(anyhow!("--e needs 7 components, got {}", v.len())))?;
    Ok(Vec7(arr))
}

fn random_fields(domain: &Domain, seed: u64, count: usize) -> Vec<NormalField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| match domain.kind {
            DomainKind::PeriodicGrid { .. } => band_limited_field(domain, &mut rng, 4, 3),
            _ => smooth_field(domain, &mut rng),
        })
        .collect()
}

fn boundary_condition(domain: &Domain, bc: BcArg) -> Result<Option<BoundaryCondition>, Failure> {
    let which = match bc {
        BcArg::None => return Ok(None),
        BcArg::NuX => Bundle::NuX,
        BcArg::MuX => Bundle::MuX,
    };
    let b = decompose_boundary_bundles(domain, Vec7::basis(3))?;
    Ok(Some(b.condition(which)))
}

fn run_dirac(domain: &Domain, bc: BcArg, task: DiracTask, seed: u64, count: usize, tol: &Tolerances) -> Result<Report, Failure> {
    let mut r = Report::new(format!("dirac {task:?}").to_lowercase());
    let dirac = assemble_d(domain)?;
    let cond = boundary_condition(domain, bc)?;
    let closed = matches!(domain.kind, DomainKind::PeriodicGrid { .. });
    r.put("nodes", domain.len());
    r.put("h", domain.h);
    match task {
        DiracTask::Spectrum => {
            let s = spectrum(domain, &dirac, cond.as_ref(), count)?;
            r.put("values", &s);
            r.spectrum = s;
        }
        DiracTask::Kernel => {
            let k = kernel_dim(domain, &dirac, cond.as_ref(), tol.abs_tol, tol.gap_ratio, count)?;
            r.put("dim", k.dim);
            r.put("gap", k.gap);
            r.put("abs_tol", k.abs_tol);
            r.put("method", k.method);
            r.push(CheckResult::above("gap ratio", k.gap, tol.gap_ratio, Basis::ClosedForm));
            r.spectrum = k.singular_values;
        }
        DiracTask::Weitzenboeck | DiracTask::Adjointness => {
            let simons = simons_operators(&second_fundamental_form(domain, &dirac.grad));
            let mask: Option<Vec<bool>> = (!closed).then(|| domain.nodes.iter().map(|x| x.norm() < 0.6).collect());
            let fields = random_fields(domain, seed, if closed { 100 } else { 10 });
            let mut worst = 0.0_f64;
            for pair in fields.chunks(2) {
                let v = if matches!(task, DiracTask::Weitzenboeck) {
                    weitzenboeck_residual(&dirac, &simons, &pair[0], mask.as_deref())
                } else {
                    let scale = (l2_norm_sq(&dirac, &pair[0]) * l2_norm_sq(&dirac, &pair[1])).sqrt();
                    adjointness_residual(domain, &dirac, &pair[0], &pair[1]) / scale
                };
                worst = worst.max(v);
            }
            let (bound, basis) = if closed {
                (tol.identity_tol, Basis::Identity)
            } else {
                (domain.h, Basis::Convergence)
            };
            r.push(CheckResult::below(format!("{task:?} residual").to_lowercase(), worst, bound, basis));
        }
        DiracTask::Linearize => {
            let steps: Vec<f64> = (1..=10).map(|k| 10f64.powi(-k)).collect();
            let mut worst = (0.0_f64, 0.0);
            for psi in random_fields(domain, seed, 20) {
                let (err, eps) = linearization_error(domain, &dirac, &psi, &steps)?;
                if err >= worst.0 {
                    worst = (err, eps);
                }
            }
            r.put("step_at_worst", worst.1);
            r.push(CheckResult::below("linearization relative error", worst.0, 1e-6, Basis::Identity));
        }
    }
    Ok(r)
}

fn run_boundary(domain: &Domain, e: Vec7, task: BoundaryTask) -> Result<Report, Failure> {
    let mut r = Report::new(format!("boundary {task:?}").to_lowercase());
    let surface = domain.boundary.as_ref().ok_or(g2cal::G2Error::MissingBoundary)?;
    let bundles = decompose_boundary_bundles(domain, e)?;
    r.put("invariance_residual", bundles.invariance_residual);
    match task {
        BoundaryTask::Dl => {
            for (name, planes) in [("nu_x", &bundles.nu_x), ("mu_x", &bundles.mu_x)] {
                let dl = assemble_dl(surface, planes, 0.0)?;
                let trace_err = dl
                    .traces
                    .iter()
                    .zip(&surface.mean_curvature)
                    .map(|(t, h)| (t - 2.0 * h).abs())
                    .fold(0.0, f64::max);
                r.put(&format!("{name}_eigenvalues"), &dl.eigenvalues);
                r.put(&format!("{name}_traces"), &dl.traces);
                r.push(CheckResult::below(format!("{name}: |trace - 2H|"), trace_err, 2.0 * domain.h, Basis::Convergence));
            }
            r.put("mean_curvature", &surface.mean_curvature);
        }
        BoundaryTask::Chern | BoundaryTask::Index => {
            let idx = index(domain, &bundles)?;
            r.push(CheckResult::equals("Chern relation", idx.chern_relation, 0, Basis::PublishedValue));
            r.push(CheckResult::equals(
                "index = c1(nu_X) + 1 - g",
                idx.index,
                idx.c1_nu_x.value + 1 - idx.genus,
                Basis::Identity,
            ));
            r.put("report", &idx);
        }
        BoundaryTask::Rigidity => {
            let dirac = assemble_d(domain)?;
            let simons = simons_operators(&second_fundamental_form(domain, &dirac.grad));
            let idx = index(domain, &bundles)?;
            let dl = assemble_dl(surface, &bundles.mu_x, 0.0)?;
            r.put("rigidity", rigidity_report(&dl, &simons, idx.index));
        }
    }
    Ok(r)
}

fn run_cy(domain: &Domain, task: CyTask, tol: &Tolerances) -> Result<Report, Failure> {
    let mut r = Report::new(format!("cy {task:?}").to_lowercase());
    let dec = build_dec(domain, DualKind::Barycentric)?;
    r.put("cells", dec.n);
    match task {
        CyTask::Betti => {
            let (a, b) = dec.dd_defect();
            r.put("betti", dec.betti());
            r.push(CheckResult::below("d o d", a.max(b), 1e-300, Basis::Identity));
        }
        CyTask::DveeCheck => {
            let dv = assemble_dvee(&dec)?;
            let (rx, ry) = dvee_square_vs_laplacian(&dv, &dec);
            r.push(CheckResult::below("D^2 + Laplacian", rx.max(ry), tol.identity_tol, Basis::Identity));
            r.push(CheckResult::below("skew-adjointness", dvee_adjointness(&dv), tol.identity_tol, Basis::Identity));
        }
        CyTask::Kernel => {
            let dv = assemble_dvee(&dec)?;
            let k = cy_kernel_dim(&dv, tol.abs_tol, tol.gap_ratio, 12)?;
            let betti = dec.betti();
            r.put("betti", betti);
            r.put("dim", k.dim);
            r.push(CheckResult::equals("kernel = b1 + 1", k.dim as i64, betti[1] as i64 + 1, Basis::PublishedValue));
            r.push(CheckResult::below("harmonic split residual", k.harmonic_residual, 1e-8, Basis::Identity));
            r.spectrum = k.singular_values;
        }
    }
    Ok(r)
}

/// Returns the report and the output path (if any).
fn run(cli: &Cli) -> Result<(Report, Option<PathBuf>), Failure> {
    let tol = Tolerances {
        abs_tol: cli.abs_tol,
        gap_ratio: cli.gap_ratio,
        identity_tol: cli.identity_tol,
    };
    if tol.abs_tol.is_some_and(|t| t <= 0.0) || tol.gap_ratio <= 0.0 || tol.identity_tol <= 0.0 {
        return Err(Failure::Usage(anyhow!("tolerances must be positive")));
    }
    Ok(match &cli.command {
        Command::AlgebraCheck { seed, samples, out } => (algebra_suite(*seed, *samples), out.clone()),
        Command::Mesh {
            kind,
            n,
            refine,
            shape,
            out,
        } => {
            let domain = match kind {
                MeshKind::Torus => build_torus_grid(*n),
                MeshKind::Ball => build_ball_mesh(shape.shape(), *refine),
            }
            .map_err(|e| Failure::Usage(e.into()))?;
            let text = serde_json::to_string(&MeshFile::from_domain(&domain)).map_err(|e| Failure::Runtime(e.into()))?;
            write_atomic(out, text.as_bytes())?;
            let mut r = Report::new("mesh");
            r.put("nodes", domain.len());
            r.put("cells", domain.cells.len());
            r.put("h", domain.h);
            (r, None)
        }
        Command::Simons { mesh, report } => {
            let domain = load_mesh(mesh)?;
            let dirac = assemble_d(&domain)?;
            let s = simons_operators(&second_fundamental_form(&domain, &dirac.grad));
            let mut r = Report::new("simons");
            let min_a = s.min_eigen_script_a.iter().copied().fold(f64::INFINITY, f64::min);
            let (node, min_r) = s.min_r_nu();
            r.put("min_eigen_r_nu", &s.min_eigen_r_nu);
            r.put("min_eigen_script_a", &s.min_eigen_script_a);
            r.put("global_min_r_nu", min_r);
            r.put("global_min_r_nu_node", node);
            r.put("r_nu_nonnegative", min_r >= -1e-10);
            r.put("flat", s.is_flat(1e-10));
            r.push(CheckResult::above("script A is positive semidefinite", min_a, -1e-10, Basis::Identity));
            (r, report.clone())
        }
        Command::Dirac {
            mesh,
            bc,
            task,
            seed,
            count,
            out,
        } => (run_dirac(&load_mesh(mesh)?, *bc, *task, *seed, *count, &tol)?, out.clone()),
        Command::Boundary { mesh, e, task, out } => (run_boundary(&load_mesh(mesh)?, parse_e(e)?, *task)?, out.clone()),
        Command::Cy { mesh, task, out } => (run_cy(&load_mesh(mesh)?, *task, &tol)?, out.clone()),
        Command::CertifyBall {
            refine,
            shape,
            seed,
            out,
        } => (certify_ball(shape.shape(), *refine, *seed, &tol)?, out.clone()),
        Command::CertifyTorus { n, seed, out } => (certify_torus(*n, *seed, &tol)?, out.clone()),
        Command::CertifyCy { n, out } => (certify_cy(*n, &tol)?, out.clone()),
    })
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| Failure::Usage(anyhow::Error::new(e).context(format!("writing {}", path.display())));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("G2CAL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        g2cal::set_thread_cap(n);
    }
    let start = Instant::now();
    let result = run(&cli).and_then(|(mut report, out)| {
        if !cli.no_timing {
            report.wall_time_s = Some(start.elapsed().as_secs_f64());
        }
        if let Some(path) = out {
            let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Runtime(e.into()))?;
            write_atomic(&path, json.as_bytes())?;
            if !report.spectrum.is_empty() {
                let csv: String = report.spectrum.iter().map(|v| format!("{v:.17e}\n")).collect();
                write_atomic(&path.with_extension("csv"), csv.as_bytes())?;
            }
        }
        Ok(report)
    });
    match result {
        Ok(report) => {
            for c in &report.checks {
                println!("{} {}: {:.6e} (expected {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.expected);
            }
            if report.checks.is_empty() {
                println!("{}", serde_json::to_string(&report.data).unwrap_or_default());
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
