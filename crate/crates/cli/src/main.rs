//! `isomesh` command-line interface.
//!
//! Exit codes: 0 on success, 1 when an input fails validation, 2 when a
//! solver fails, 64 on usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use isomesh::analysis_norms::{
    convergence_study, default_study_immersion, weak_holder_norm, StudyKind, MAX_EXACT_FACES,
};
use isomesh::flow_engine::{run_flow, FlowConfig, Termination};
use isomesh::io::{
    check_report, export_obj, load_face_function, load_mesh, save_mesh, write_atomic, MeshFile, MeshKind, Projection,
    Provenance,
};
use isomesh::isoperturb::{fixed_point_solve, nondegenerate_rotation, GreenConfig};
use isomesh::pyramid_refine::{genericity_perturb, nudge_to_immersion, refine, DEFAULT_TOL};
use isomesh::{sample_immersion, Error, Immersion, ImmersionSpec, VertexField};

const EXIT_VALIDATION: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "isomesh",
    version,
    about = "Isotropic quadrangular and triangular meshes of tori"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample an immersion on the grid of resolution N.
    Sample {
        /// Immersion JSON file, or a library name (product, bumped-product,
        /// degenerate-product, rotated-product, triple-product).
        #[arg(long)]
        imm: String,
        #[arg(long = "N")]
        resolution: usize,
        /// Expected half-dimension; checked against the immersion.
        #[arg(long)]
        n: Option<usize>,
        /// Add seeded uniform noise of this amplitude to every coordinate.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the discrete moment map flow.
    Flow {
        mesh: PathBuf,
        /// Initial time step (default 0.5/N²).
        #[arg(long)]
        dt0: Option<f64>,
        /// Stop when max |μ^r| falls below this value.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_steps: usize,
        /// Fixed step, no backtracking.
        #[arg(long)]
        no_adaptive: bool,
        #[arg(long, default_value_t = 1)]
        log_every: usize,
        /// CSV energy trace (default: next to --out with extension .csv).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Perturb the samples of an immersion into an isotropic mesh.
    Perturb {
        #[arg(long)]
        imm: String,
        #[arg(long = "N")]
        resolution: usize,
        /// Relative residual of the conjugate-gradient solves.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1e-12)]
        fp_tol: f64,
        #[arg(long, default_value_t = 200)]
        fp_max_iters: usize,
        /// Rotate the cover first if the immersion is degenerate.
        #[arg(long)]
        rotate: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine an isotropic quad mesh into its optimal triangulation.
    Refine {
        mesh: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Apply a generic shear of this size before refining.
        #[arg(long)]
        generic: Option<f64>,
        /// Nudge apexes until the piecewise-linear map is an immersion.
        #[arg(long)]
        nudge: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print diagnostics of a mesh file as JSON.
    Check {
        mesh: PathBuf,
        /// Also estimate the spectral gap of the Laplacian.
        #[arg(long)]
        gap: bool,
    },
    /// Weak Hölder norm of a face-function file, as JSON.
    Norms {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Enumerate all pairs instead of sampling.
        #[arg(long)]
        exact_holder: bool,
    },
    /// Convergence study: CSV rows and fitted log-log slope.
    Study {
        #[arg(value_enum)]
        case: StudyCase,
        /// Comma-separated ascending resolutions.
        #[arg(long = "N", value_delimiter = ',', required = true)]
        resolutions: Vec<usize>,
        #[arg(long)]
        imm: Option<String>,
        /// CSV output (stdout if omitted; the JSON summary then goes to stderr).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a mesh to OBJ.
    Export {
        mesh: PathBuf,
        #[arg(long, value_enum, default_value_t = ProjectionArg::RadialStereo)]
        projection: ProjectionArg,
        /// Coordinate dropped by the `drop` projection.
        #[arg(long, default_value_t = 3)]
        drop: usize,
        /// Write quads natively instead of two triangles.
        #[arg(long)]
        quads: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StudyCase {
    SampleError,
    Eta,
    FixedPoint,
    Limit,
    Pl,
    Kappa,
}

impl From<StudyCase> for StudyKind {
    fn from(c: StudyCase) -> Self {
        match c {
            StudyCase::SampleError => StudyKind::SampleError,
            StudyCase::Eta => StudyKind::EtaNorm,
            StudyCase::FixedPoint => StudyKind::FixedPointDistance,
            StudyCase::Limit => StudyKind::LimitResidual,
            StudyCase::Pl => StudyKind::PlSupError,
            StudyCase::Kappa => StudyKind::KappaError,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProjectionArg {
    RadialStereo,
    Drop,
}

/// Failure of a subcommand with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SolverDiverged(_)
        | Error::DegenerateKernel
        | Error::NoContraction { .. }
        | Error::NoNondegenerateRotation
        | Error::GenericityFailed(_)
        | Error::NonFinite => EXIT_SOLVER,
        Error::Face { source, .. } => exit_code(source),
        _ => EXIT_VALIDATION,
    }
}

fn validation(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        message: message.into(),
    }
}

fn load_immersion(arg: &str) -> Result<Immersion, Failure> {
    if Immersion::LIBRARY.contains(&arg) {
        return Ok(Immersion::library(arg)?);
    }
    let text = fs::read_to_string(arg).map_err(|e| validation(format!("{arg}: {e}")))?;
    let spec: ImmersionSpec = serde_json::from_str(&text).map_err(|e| validation(format!("{arg}: {e}")))?;
    Ok(Immersion::from_spec(&spec)?)
}

/// Deterministic run identifier: FNV-1a of the subcommand, its inputs and
/// its configuration (output paths do not enter).
fn run_id(parts: &[&[u8]]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for a in parts {
        for &b in a.iter().chain(std::iter::once(&0)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure {
        code: EXIT_VALIDATION,
        message: e.to_string(),
    })
}

fn csv_error(e: csv::Error) -> Failure {
    validation(format!("csv: {e}"))
}

fn write_csv<R: serde::Serialize>(path: Option<&Path>, header: &[&str], rows: &[R]) -> Result<(), Failure> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| validation(e.to_string()))?;
    match path {
        Some(p) => write_atomic(p, &bytes)?,
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

fn provenance(
    command: &str,
    input: &[u8],
    immersion: Option<isomesh::ImmersionSpec>,
    config: serde_json::Value,
) -> Result<Provenance, Failure> {
    let spec = to_json(&immersion)?;
    let cfg = to_json(&config)?;
    let id = run_id(&[command.as_bytes(), input, spec.as_bytes(), cfg.as_bytes()]);
    Ok(Provenance {
        immersion,
        config: Some(config),
        run_id: Some(id),
    })
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| validation(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sample {
            imm,
            resolution,
            n,
            noise,
            seed,
            out,
        } => {
            let immersion = load_immersion(&imm)?;
            if let Some(n) = n {
                if n != immersion.n() {
                    return Err(validation(format!(
                        "--n {n} but the immersion lives in R^{}",
                        2 * immersion.n()
                    )));
                }
            }
            let grid = Arc::new(immersion.grid(resolution)?);
            let mut mesh = sample_immersion(&immersion, &grid)?;
            if noise != 0.0 {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let values = (0..mesh.as_slice().len())
                    .map(|_| noise * rng.random_range(-1.0..1.0))
                    .collect();
                mesh = mesh.add_field(&VertexField::new(grid.clone(), mesh.n(), values)?, 1.0)?;
            }
            let config = serde_json::json!({ "N": resolution, "noise": noise, "seed": seed });
            save_mesh(
                &out,
                &MeshFile::from_mesh(&mesh).with_provenance(provenance(
                    "sample",
                    &[],
                    Some(immersion.to_spec()),
                    config,
                )?),
            )?;
            info!("sampled {} vertices into {}", grid.num_vertices(), out.display());
        }
        Command::Flow {
            mesh,
            dt0,
            tol,
            max_steps,
            no_adaptive,
            log_every,
            trace,
            out,
        } => {
            let file = load_mesh(&mesh)?;
            let start = file.to_mesh()?;
            let cfg = FlowConfig {
                dt0,
                tol_density: tol,
                max_steps,
                adaptive: !no_adaptive,
                log_every,
                ..Default::default()
            };
            let (result, report) = run_flow(&start, &cfg)?;
            let config = serde_json::json!({
                "flow": { "dt0": dt0, "tol": tol, "max_steps": max_steps, "adaptive": !no_adaptive },
            });
            let imm = file.provenance.as_ref().and_then(|p| p.immersion.clone());
            let prov = provenance("flow", &read_input(&mesh)?, imm, config)?;
            save_mesh(&out, &MeshFile::from_mesh(&result).with_provenance(prov))?;
            let trace_path = trace.unwrap_or_else(|| out.with_extension("csv"));
            let rows: Vec<_> = report
                .trace
                .iter()
                .map(|r| (r.step, r.energy, r.max_density, r.dt))
                .collect();
            write_csv(Some(&trace_path), &["step", "energy", "max_density", "dt"], &rows)?;
            println!(
                "{}",
                to_json(&serde_json::json!({
                    "termination": report.termination,
                    "steps": report.steps,
                    "final_energy": report.final_energy,
                    "final_max_density": report.final_max_density,
                    "final_gradient_norm": report.final_gradient_norm,
                }))?
            );
            match report.termination {
                Termination::Converged => {}
                Termination::MaxSteps => {
                    return Err(Failure {
                        code: EXIT_SOLVER,
                        message: "flow did not converge within the step budget".into(),
                    })
                }
                Termination::Diverged => {
                    return Err(Failure {
                        code: EXIT_SOLVER,
                        message: "flow diverged".into(),
                    })
                }
            }
        }
        Command::Perturb {
            imm,
            resolution,
            tol,
            fp_tol,
            fp_max_iters,
            rotate,
            out,
        } => {
            let mut immersion = load_immersion(&imm)?;
            let mut angle = 0.0;
            if rotate {
                (angle, immersion) = nondegenerate_rotation(&immersion, 8)?;
            }
            let grid = Arc::new(immersion.grid(resolution)?);
            let tau = sample_immersion(&immersion, &grid)?;
            let cfg = GreenConfig {
                cg_tol: tol,
                ..Default::default()
            };
            let (_, rho, report) = fixed_point_solve(&tau, &cfg, fp_tol, fp_max_iters)?;
            let config = serde_json::json!({
                "N": resolution, "cg_tol": tol, "fp_tol": fp_tol, "fp_max_iters": fp_max_iters, "rotation": angle,
            });
            save_mesh(
                &out,
                &MeshFile::from_mesh(&rho).with_provenance(provenance(
                    "perturb",
                    &[],
                    Some(immersion.to_spec()),
                    config,
                )?),
            )?;
            println!("{}", to_json(&report)?);
            if !report.converged {
                return Err(Failure {
                    code: EXIT_SOLVER,
                    message: "fixed-point iteration did not converge".into(),
                });
            }
        }
        Command::Refine {
            mesh,
            tol,
            generic,
            nudge,
            seed,
            out,
        } => {
            let file = load_mesh(&mesh)?;
            if file.header.kind != MeshKind::Quad {
                return Err(validation("refine expects a quad mesh"));
            }
            let mut rho = file.to_mesh()?;
            if let Some(s) = generic {
                rho = genericity_perturb(&rho, s, seed)?;
            }
            let mut tm = refine(&rho, tol)?;
            if nudge {
                let size = 0.01 / rho.grid().resolution() as f64;
                (tm, _) = nudge_to_immersion(&tm, 100, size, seed)?;
            }
            let config = serde_json::json!({ "tol": tol, "generic": generic, "nudge": nudge, "seed": seed });
            let imm = file.provenance.as_ref().and_then(|p| p.immersion.clone());
            let prov = provenance("refine", &read_input(&mesh)?, imm, config)?;
            save_mesh(&out, &MeshFile::from_trimesh(&tm).with_provenance(prov))?;
            info!(
                "refined into {} triangles, max residual {:e}",
                tm.num_triangles(),
                tm.max_residual()
            );
        }
        Command::Check { mesh, gap } => {
            let report = check_report(&load_mesh(&mesh)?, gap)?;
            println!("{}", to_json(&report)?);
        }
        Command::Norms {
            file,
            k,
            alpha,
            exact_holder,
        } => {
            let phi = load_face_function(&file)?;
            if exact_holder && phi.len() > MAX_EXACT_FACES {
                return Err(Error::TooLargeForExact(phi.len()).into());
            }
            println!("{}", to_json(&weak_holder_norm(&phi, k, alpha, exact_holder)?)?);
        }
        Command::Study {
            case,
            resolutions,
            imm,
            out,
        } => {
            let kind = StudyKind::from(case);
            let immersion = match imm {
                Some(arg) => load_immersion(&arg)?,
                None => default_study_immersion(kind),
            };
            let table = convergence_study(kind, &immersion, &resolutions)?;
            write_csv(out.as_deref(), &["N", "value"], &table.rows)?;
            let summary = to_json(&table)?;
            if out.is_some() {
                println!("{summary}");
            } else {
                eprintln!("{summary}");
            }
        }
        Command::Export {
            mesh,
            projection,
            drop,
            quads,
            out,
        } => {
            let file = load_mesh(&mesh)?;
            let base = file.to_mesh()?;
            let tm = if file.header.kind == MeshKind::Tri {
                Some(file.to_trimesh()?)
            } else {
                None
            };
            let proj = match projection {
                ProjectionArg::RadialStereo => Projection::RadialStereo,
                ProjectionArg::Drop => Projection::Drop { drop },
            };
            let summary = export_obj(&out, &base, tm.as_ref().map(|t| t.apexes()), proj, quads)?;
            println!("{}", to_json(&summary)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            eprintln!();
            let mut cmd = <Cli as clap::CommandFactory>::command();
            let _ = cmd.print_help();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
