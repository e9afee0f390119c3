//! `lopa`: decide uniform Lopatinski/Evans conditions and measure the
//! resulting stability constants for constant-coefficient boundary value
//! problems on a half-space.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use lopa_core::document::{
    self, complex_matrix_json, complex_vector_json, parse_complex_vector, parse_profile,
    profile_json, real_matrix_json,
};
use lopa_core::linalg::C64;
use lopa_core::lopatinski::{self, ScanConfig, ScanVerdict};
use lopa_core::profile::ExponentialProfile;
use lopa_core::stability::{self, TrialProtocol, WeightFn};
use lopa_core::symmetrizer;
use lopa_core::system::{BoundarySymbol, Frequency};
use lopa_core::viscous::{self, ViscousWeights};
use lopa_core::{catalog, Error};

#[derive(Parser)]
#[command(
    name = "lopa",
    version,
    about = "Uniform Lopatinski/Evans condition checks and stability-constant measurement for half-space boundary value problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Emit the report as JSON instead of a table.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for the randomized trial protocols.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for grid scans (0 picks the default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Check shapes, the noncharacteristic boundary, and hyperbolicity.
    Validate {
        input: PathBuf,
        /// Unit directions sampled on the symbol sphere.
        #[arg(long, default_value_t = 64)]
        sphere_samples: usize,
        /// Relative tolerance on eigenvalue defects.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Search for a Friedrichs symmetrizer.
    Symmetrizer { input: PathBuf },
    /// Build the canonical maximally dissipative boundary condition.
    DissipativeBc { input: PathBuf },
    /// Emit the time-reversed forward form of the adjoint problem.
    Adjoint { input: PathBuf },
    /// Scan the uniform Lopatinski condition over the frequency hemisphere.
    Lopatinski {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        gamma_min: f64,
        #[arg(long, default_value_t = 24)]
        resolution: usize,
        /// Radial cutoff used when the boundary symbol depends on the frequency.
        #[arg(long, default_value_t = 100.0)]
        radial_cutoff: f64,
        /// Verdict threshold on the scanned infimum of sigma.
        #[arg(long, default_value_t = 1e-8)]
        sigma_tol: f64,
    },
    /// Solve the resolvent problem at one frequency.
    Solve {
        input: PathBuf,
        #[arg(long)]
        tau: f64,
        /// Tangential frequency components, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        eta: Vec<f64>,
        #[arg(long)]
        gamma: f64,
        /// Forcing profile as JSON terms [{"v": [...], "mu": [re,im], "m": 0}, ...],
        /// or @file.
        #[arg(long)]
        forcing: Option<String>,
        /// Boundary datum as a JSON vector, or @file.
        #[arg(long)]
        boundary_data: Option<String>,
    },
    /// Measure Kreiss-type stability ratios over a gamma grid.
    Kreiss {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        gamma_min: f64,
        #[arg(long, default_value_t = 1e3)]
        gamma_max: f64,
        /// Number of gamma grid points.
        #[arg(long, default_value_t = 17)]
        grid: usize,
        /// Random trials per frequency.
        #[arg(long, default_value_t = 8)]
        trials: usize,
        /// Verdict cap on the measured ratio.
        #[arg(long, default_value_t = 1e6)]
        cap: f64,
    },
    /// Re-enact the auxiliary/residual decomposition with constant tracking.
    Decompose {
        input: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        eta: Vec<f64>,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        forcing: Option<String>,
        #[arg(long)]
        boundary_data: Option<String>,
        /// Trials per grid point when measuring the reference constant.
        #[arg(long, default_value_t = 8)]
        trials: usize,
    },
    /// Validate a partially parabolic system and scan its Evans quantity.
    ViscousEvans {
        input: PathBuf,
        /// JSON frequency set: explicit points or tau/eta/gamma ranges.
        #[arg(long)]
        grid_file: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        sigma_tol: f64,
    },
    /// Weighted stability ratios for the reduced viscous system.
    ViscousKreiss {
        input: PathBuf,
        #[arg(long)]
        grid_file: PathBuf,
        /// Interior weights "w_u,w_du"; each entry is `gamma` or a number.
        #[arg(long, default_value = "gamma,1")]
        weights: String,
        #[arg(long, default_value_t = 8)]
        trials: usize,
        #[arg(long, default_value_t = 1e9)]
        cap: f64,
    },
    /// List the built-in example systems or emit one as a document.
    Catalog {
        /// Entry name; omit to list all entries.
        #[arg(long)]
        name: Option<String>,
        /// Emit the failing boundary variant instead of the good one.
        #[arg(long)]
        bad: bool,
        /// State dimension for the random-symmetrizable generator.
        #[arg(long)]
        n: Option<usize>,
        /// Space dimension for the random-symmetrizable generator.
        #[arg(long)]
        d: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // ignore failures from double initialization
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let as_json = cli.json;
    match run(cli) {
        Ok(outcome) => {
            emit(&outcome, as_json);
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let code = classify(&e);
            if code == 1 {
                // a checked condition failed: structured report on stdout
                let outcome = Outcome {
                    command: "error".into(),
                    config: Value::Null,
                    pass: false,
                    report: json!({ "verdict": false, "error": e.to_string() }),
                };
                emit(&outcome, as_json);
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(code)
        }
    }
}

struct Outcome {
    command: String,
    config: Value,
    pass: bool,
    report: Value,
}

fn emit(outcome: &Outcome, as_json: bool) {
    use std::io::Write;
    let envelope = json!({
        "tool_version": env!("CARGO_PKG_VERSION"),
        "timestamp": chrono::Utc::now().to_rfc3339(),
        "command": outcome.command,
        "config": outcome.config,
        "verdict": outcome.pass,
        "report": outcome.report,
    });
    let text = if as_json {
        let mut s = serde_json::to_string_pretty(&envelope).expect("report serializes");
        s.push('\n');
        s
    } else {
        output::render(&envelope)
    };
    // tolerate closed pipes downstream
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

/// Exit code classification: 2 for inputs the tool cannot interpret, 1 for
/// well-posed inputs whose checked condition fails.
fn classify(e: &Error) -> u8 {
    match e {
        Error::SchemaError(_)
        | Error::ValueError(_)
        | Error::DimensionMismatch(_)
        | Error::InvalidFrequency(_)
        | Error::InvalidGrid(_)
        | Error::InvalidWeights(_) => 2,
        _ => 1,
    }
}

fn read_to_string(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::SchemaError(format!("cannot read {}: {e}", path.display())))
}

/// Inline JSON or `@file` indirection for data arguments.
fn arg_json(arg: &str) -> Result<Value, Error> {
    let text = if let Some(path) = arg.strip_prefix('@') {
        read_to_string(Path::new(path))?
    } else {
        arg.to_string()
    };
    serde_json::from_str(&text)
        .map_err(|e| Error::SchemaError(format!("invalid JSON argument: {e}")))
}

fn frequency_for(system_d: usize, tau: f64, eta: &[f64], gamma: f64) -> Result<Frequency, Error> {
    if eta.len() != system_d - 1 {
        return Err(Error::DimensionMismatch(format!(
            "eta has {} components, expected d - 1 = {}",
            eta.len(),
            system_d - 1
        )));
    }
    Frequency::new(tau, DVector::from_vec(eta.to_vec()), gamma)
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    let seed = cli.seed;
    match cli.command {
        Command::Validate {
            input,
            sphere_samples,
            tol,
        } => {
            let parsed = document::parse_system(&read_to_string(&input)?)?;
            let validation = lopa_core::validate_system(&parsed.system)?;
            let hyperbolicity = lopa_core::check_hyperbolicity(&parsed.system, sphere_samples, tol);
            let pass = validation.verdict && hyperbolicity.pass;
            Ok(Outcome {
                command: "validate".into(),
                config: json!({ "input": input.display().to_string(), "sphere_samples": sphere_samples, "tol": tol }),
                pass,
                report: json!({
                    "verdict": pass,
                    "validation": validation,
                    "hyperbolicity": hyperbolicity,
                }),
            })
        }
        Command::Symmetrizer { input } => {
            let parsed = document::parse_system(&read_to_string(&input)?)?;
            lopa_core::validate_system(&parsed.system)?;
            let s = lopa_core::find_symmetrizer(&parsed.system)?;
            Ok(Outcome {
                command: "symmetrizer".into(),
                config: json!({ "input": input.display().to_string() }),
                pass: true,
                report: json!({
                    "verdict": true,
                    "S": real_matrix_json(s.matrix()),
                    "lambda_min": s.lambda_min,
                    "residual": s.residual,
                }),
            })
        }
        Command::DissipativeBc { input } => {
            let parsed = document::parse_system(&read_to_string(&input)?)?;
            lopa_core::validate_system(&parsed.system)?;
            let s = lopa_core::find_symmetrizer(&parsed.system)?;
            let gt = lopa_core::build_dissipative_bc(&s, &parsed.system)?;
            let cert = lopa_core::check_maximal_dissipativity(
                &s,
                &parsed.system,
                &lopa_core::linalg::to_complex(&gt),
            )?;
            Ok(Outcome {
                command: "dissipative-bc".into(),
                config: json!({ "input": input.display().to_string() }),
                pass: true,
                report: json!({
                    "verdict": true,
                    "S": real_matrix_json(s.matrix()),
                    "Gamma_tilde": real_matrix_json(&gt),
                    "certificate": cert,
                }),
            })
        }
        Command::Adjoint { input } => {
            let parsed = document::parse_system(&read_to_string(&input)?)?;
            lopa_core::validate_system(&parsed.system)?;
            if !parsed.boundary.is_constant() {
                return Err(Error::ValueError(
                    "the adjoint construction needs a constant boundary matrix".into(),
                ));
            }
            let gamma = parsed.boundary.evaluate(&Frequency::one_d(0.0, 1.0)?);
            let (rev, gstar) = symmetrizer::adjoint_forward_form(&parsed.system, &gamma)?;
            let doc = document::system_document(&rev, &BoundarySymbol::constant(gstar.clone()));
            Ok(Outcome {
                command: "adjoint".into(),
                config: json!({ "input": input.display().to_string() }),
                pass: true,
                report: json!({
                    "verdict": true,
                    "Gamma_star": complex_matrix_json(&gstar),
                    "system": doc,
                }),
            })
        }
        Command::Lopatinski {
            input,
            gamma_min,
            resolution,
            radial_cutoff,
            sigma_tol,
        } => {
            let parsed = document::parse_system(&read_to_string(&input)?)?;
            lopa_core::validate_system(&parsed.system)?;
            let config = ScanConfig {
                gamma_min,
                resolution,
                radial_cutoff,
                sigma_tol,
                ..Default::default()
            };
            let scan = lopatinski::uniform_scan(&parsed.system, &parsed.boundary, &config)?;
            let pass = matches!(
                scan.verdict,
                ScanVerdict::Holds | ScanVerdict::VacuouslyHolds
            );
            Ok(Outcome {
                command: "lopatinski".into(),
                config: json!({
                    "input": input.display().to_string(),
                    "gamma_min": gamma_min,
                    "resolution": resolution,
                    "radial_cutoff": radial_cutoff,
                    "sigma_tol": sigma_tol,
                }),
                pass,
                report: serde_json::to_value(&scan).expect("scan serializes"),
            })
        }
        Command::Solve {
            input,
            tau,
            eta,
            gamma,
            forcing,
            boundary_data,
        } => {
            let parsed = document::parse_system(&read_to_string(&input)?)?;
            lopa_core::validate_system(&parsed.system)?;
            let freq = frequency_for(parsed.system.d(), tau, &eta, gamma)?;
            let n = parsed.system.n();
            let f = match &forcing {
                None => ExponentialProfile::zero(n),
                Some(arg) => parse_profile(&arg_json(arg)?, n)?,
            };
            let gamma_m = parsed.boundary.evaluate(&freq);
            let g = match &boundary_data {
                None => DVector::from_element(gamma_m.nrows(), C64::new(0.0, 0.0)),
                Some(arg) => parse_complex_vector(&arg_json(arg)?, "boundary data")?,
            };
            if g.len() != gamma_m.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "boundary datum has length {}, expected k = {}",
                    g.len(),
                    gamma_m.nrows()
                )));
            }
            let gm = lopa_core::resolvent_matrix(&parsed.system, &freq)?;
            let sol = lopa_core::solve_resolvent(&gm, &gamma_m, &f, &g)?;
            let trace = sol.profile.trace0();
            Ok(Outcome {
                command: "solve".into(),
                config: json!({
                    "input": input.display().to_string(),
                    "tau": tau, "eta": eta, "gamma": gamma,
                }),
                pass: true,
                report: json!({
                    "verdict": true,
                    "solution": profile_json(&sol.profile),
                    "interior_norm": sol.profile.norm(),
                    "trace": complex_vector_json(&trace),
                    "trace_norm": lopa_core::linalg::vec_norm(&trace),
                    "sigma": sol.sigma,
                    "boundary_residual": sol.boundary_residual,
                }),
            })
        }
        Command::Kreiss {
            input,
            gamma_min,
            gamma_max,
            grid,
            trials,
            cap,
        } => {
            let parsed = document::parse_system(&read_to_string(&input)?)?;
            lopa_core::validate_system(&parsed.system)?;
            let freqs = stability::gamma_line(parsed.system.d(), gamma_min, gamma_max, grid)?;
            let protocol = TrialProtocol {
                trials,
                seed,
                probes: true,
            };

            // Constant chain context: the reference condition, its measured
            // constant and the sigma floor give a predicted bound.
            let mut context = Map::new();
            let mut predicted = None;
            if let Ok(s) = lopa_core::find_symmetrizer(&parsed.system) {
                if let Ok(gt) = lopa_core::build_dissipative_bc(&s, &parsed.system) {
                    if let Ok(est) = stability::measure_dissipative_constant(
                        &parsed.system,
                        &gt,
                        &freqs,
                        &protocol,
                    ) {
                        let mut sigma_floor = f64::INFINITY;
                        for freq in &freqs {
                            if let Ok(v) =
                                lopatinski::lopatinski_value(&parsed.system, &parsed.boundary, freq)
                            {
                                sigma_floor = sigma_floor.min(v.sigma);
                            }
                        }
                        if sigma_floor.is_finite() && sigma_floor > 0.0 {
                            let c1 = parsed.boundary.bound();
                            let c2 = lopa_core::linalg::spectral_norm_real(&gt);
                            let big_c = 1.0 / (sigma_floor * sigma_floor);
                            let bound = 1.0
                                + 2.0
                                    * est.c_tilde
                                    * c2
                                    * c2
                                    * big_c
                                    * (1.0 + c1 * c1 * est.c_tilde);
                            predicted = Some(bound);
                            context.insert("c_tilde".into(), json!(est.c_tilde));
                            context.insert("sigma_floor".into(), json!(sigma_floor));
                        }
                    }
                }
            }
            let report = stability::kreiss_constant(
                &parsed.system,
                &parsed.boundary,
                &freqs,
                &protocol,
                cap,
                predicted,
            )?;
            let pass = report.verdict;
            let mut body = serde_json::to_value(&report).expect("report serializes");
            if let Value::Object(obj) = &mut body {
                obj.insert("chain_context".into(), Value::Object(context));
            }
            Ok(Outcome {
                command: "kreiss".into(),
                config: json!({
                    "input": input.display().to_string(),
                    "gamma_min": gamma_min, "gamma_max": gamma_max,
                    "grid": grid, "trials": trials, "cap": cap, "seed": seed,
                }),
                pass,
                report: body,
            })
        }
        Command::Decompose {
            input,
            tau,
            eta,
            gamma,
            forcing,
            boundary_data,
            trials,
        } => {
            let parsed = document::parse_system(&read_to_string(&input)?)?;
            lopa_core::validate_system(&parsed.system)?;
            let freq = frequency_for(parsed.system.d(), tau, &eta, gamma)?;
            let n = parsed.system.n();
            let f = match &forcing {
                None => ExponentialProfile::zero(n),
                Some(arg) => parse_profile(&arg_json(arg)?, n)?,
            };
            let s = lopa_core::find_symmetrizer(&parsed.system)?;
            let gamma_m = parsed.boundary.evaluate(&freq);
            let g = match &boundary_data {
                None => DVector::from_element(gamma_m.nrows(), C64::new(0.0, 0.0)),
                Some(arg) => parse_complex_vector(&arg_json(arg)?, "boundary data")?,
            };
            let gt = lopa_core::build_dissipative_bc(&s, &parsed.system)?;
            let protocol = TrialProtocol {
                trials,
                seed,
                probes: true,
            };
            let grid = stability::gamma_line(
                parsed.system.d(),
                (gamma / 10.0).max(1e-6),
                gamma * 10.0,
                9,
            )?;
            let est =
                stability::measure_dissipative_constant(&parsed.system, &gt, &grid, &protocol)?;
            let trace = stability::proposition_main_decompose(
                &parsed.system,
                &s,
                &parsed.boundary,
                &f,
                &g,
                &freq,
                est.c_tilde,
            )?;
            let comparison = stability::direct_vs_decomposed(
                &parsed.system,
                &s,
                &parsed.boundary,
                &f,
                &g,
                &freq,
            )?;
            let checks: Vec<Value> = trace
                .checks
                .iter()
                .map(|c| json!({ "name": c.name, "lhs": c.lhs, "rhs": c.rhs, "residual": c.residual }))
                .collect();
            let pass = comparison.pass;
            Ok(Outcome {
                command: "decompose".into(),
                config: json!({
                    "input": input.display().to_string(),
                    "tau": tau, "eta": eta, "gamma": gamma, "trials": trials, "seed": seed,
                }),
                pass,
                report: json!({
                    "verdict": pass,
                    "auxiliary": profile_json(&trace.w),
                    "residual_solution": profile_json(&trace.e),
                    "solution": profile_json(&trace.u),
                    "Gamma_tilde": complex_matrix_json(&trace.gtilde),
                    "residual_datum": complex_vector_json(&trace.g_tilde_datum),
                    "alpha": trace.alpha,
                    "sigma": trace.sigma,
                    "c_tilde_supplied": trace.c_tilde_supplied,
                    "c_tilde_used": trace.c_tilde_used,
                    "c_tilde_enlarged": trace.c_tilde_enlarged,
                    "trace_constant": trace.big_c,
                    "c1": trace.c1,
                    "c2": trace.c2,
                    "checks": checks,
                    "predicted_constant": trace.predicted_constant,
                    "measured_ratio": trace.measured_ratio,
                    "direct_vs_decomposed": comparison,
                }),
            })
        }
        Command::ViscousEvans {
            input,
            grid_file,
            sigma_tol,
        } => {
            let parsed = document::parse_viscous(&read_to_string(&input)?)?;
            let validation = viscous::validate_second_order(&parsed.system, 32)?;
            let gamma_u = viscous_boundary(&parsed)?;
            let freqs = parse_grid_file(&read_to_string(&grid_file)?, parsed.system.d())?;
            let scan = viscous::evans_scan(&parsed.system, &gamma_u, &freqs, sigma_tol)?;
            let pass = matches!(
                scan.verdict,
                ScanVerdict::Holds | ScanVerdict::VacuouslyHolds
            );
            Ok(Outcome {
                command: "viscous-evans".into(),
                config: json!({
                    "input": input.display().to_string(),
                    "grid_file": grid_file.display().to_string(),
                    "sigma_tol": sigma_tol,
                }),
                pass,
                report: json!({
                    "verdict": pass,
                    "validation": validation,
                    "boundary_on_U": complex_matrix_json(&gamma_u),
                    "scan": scan,
                }),
            })
        }
        Command::ViscousKreiss {
            input,
            grid_file,
            weights,
            trials,
            cap,
        } => {
            let parsed = document::parse_viscous(&read_to_string(&input)?)?;
            viscous::validate_second_order(&parsed.system, 32)?;
            let gamma_u = viscous_boundary(&parsed)?;
            let freqs = parse_grid_file(&read_to_string(&grid_file)?, parsed.system.d())?;
            let w = parse_weights(&weights)?;
            let protocol = TrialProtocol {
                trials,
                seed,
                probes: true,
            };
            let report = viscous::viscous_stability_check(
                &parsed.system,
                &gamma_u,
                &freqs,
                &protocol,
                &w,
                cap,
            )?;
            let pass = report.verdict;
            Ok(Outcome {
                command: "viscous-kreiss".into(),
                config: json!({
                    "input": input.display().to_string(),
                    "grid_file": grid_file.display().to_string(),
                    "weights": weights, "trials": trials, "cap": cap, "seed": seed,
                }),
                pass,
                report: serde_json::to_value(&report).expect("report serializes"),
            })
        }
        Command::Catalog { name, bad, n, d } => match name {
            None => {
                let entries: Vec<Value> = catalog::catalog()
                    .iter()
                    .map(|e| json!({ "name": e.name, "description": e.description }))
                    .collect();
                Ok(Outcome {
                    command: "catalog".into(),
                    config: Value::Null,
                    pass: true,
                    report: json!({ "verdict": true, "entries": entries }),
                })
            }
            Some(name) if name == "random-symmetrizable" && (n.is_some() || d.is_some()) => {
                let n = n.unwrap_or(4);
                let d = d.unwrap_or(2);
                if n == 0 || d == 0 {
                    return Err(Error::ValueError("n and d must be positive".into()));
                }
                let system = catalog::random_symmetrizable(seed, n, d);
                let (good, bad_m) = catalog::random_symmetrizable_boundaries(&system)?;
                let chosen = if bad { bad_m } else { good };
                let doc = document::system_document(&system, &BoundarySymbol::constant(chosen));
                Ok(Outcome {
                    command: "catalog".into(),
                    config: json!({ "name": name, "seed": seed, "n": n, "d": d, "bad": bad }),
                    pass: true,
                    report: json!({ "verdict": true, "document": doc }),
                })
            }
            Some(name) => {
                let entry = catalog::find(&name).ok_or_else(|| {
                    Error::ValueError(format!("unknown catalog entry \"{name}\""))
                })?;
                let doc = if bad {
                    catalog::bad_document(&entry).ok_or_else(|| {
                        Error::ValueError(format!(
                            "entry \"{name}\" has no failing boundary variant"
                        ))
                    })?
                } else {
                    catalog::entry_document(&entry)
                };
                Ok(Outcome {
                    command: "catalog".into(),
                    config: json!({ "name": name, "bad": bad }),
                    pass: true,
                    report: json!({ "verdict": true, "description": entry.description, "document": doc }),
                })
            }
        },
    }
}

/// Boundary matrix on U from a viscous document: explicit, lifted from the
/// hyperbolic block, or pure Dirichlet when nothing is given and n1 = 0.
fn viscous_boundary(parsed: &document::ParsedViscous) -> Result<DMatrix<C64>, Error> {
    if let Some(gu) = &parsed.boundary_u {
        return Ok(gu.clone());
    }
    let gamma1 =
        match &parsed.boundary1 {
            Some(g1) => g1.clone(),
            None if parsed.system.n1() == 0 => DMatrix::from_element(0, 0, C64::new(0.0, 0.0)),
            None => return Err(Error::SchemaError(
                "a viscous document with a hyperbolic block needs \"boundary1\" or \"boundaryU\""
                    .into(),
            )),
        };
    viscous::rousset_bc(&parsed.system, &gamma1)
}

/// Frequency set file: either explicit points or tau/eta/gamma ranges.
fn parse_grid_file(text: &str, d: usize) -> Result<Vec<Frequency>, Error> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::SchemaError(format!("invalid grid file: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::SchemaError("grid file must be a JSON object".into()))?;
    if let Some(points) = obj.get("points") {
        let list = points
            .as_array()
            .ok_or_else(|| Error::SchemaError("\"points\" must be an array".into()))?;
        let mut out = Vec::with_capacity(list.len());
        for p in list {
            let po = p
                .as_object()
                .ok_or_else(|| Error::SchemaError("each point must be an object".into()))?;
            let tau = po.get("tau").and_then(Value::as_f64).unwrap_or(0.0);
            let gamma = po
                .get("gamma")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::SchemaError("point needs \"gamma\"".into()))?;
            let eta: Vec<f64> = match po.get("eta") {
                None => vec![0.0; d - 1],
                Some(e) => e
                    .as_array()
                    .ok_or_else(|| Error::SchemaError("\"eta\" must be an array".into()))?
                    .iter()
                    .map(|x| {
                        x.as_f64()
                            .ok_or_else(|| Error::ValueError("eta entries must be numbers".into()))
                    })
                    .collect::<Result<_, _>>()?,
            };
            if eta.len() != d - 1 {
                return Err(Error::DimensionMismatch(format!(
                    "eta has {} components, expected {}",
                    eta.len(),
                    d - 1
                )));
            }
            out.push(Frequency::new(tau, DVector::from_vec(eta), gamma)?);
        }
        if out.is_empty() {
            return Err(Error::InvalidGrid("the frequency set is empty".into()));
        }
        return Ok(out);
    }

    type Range = (f64, f64, usize, bool);
    let range = |key: &str, default: Option<Range>| -> Result<Range, Error> {
        match obj.get(key) {
            None => default.ok_or_else(|| Error::SchemaError(format!("grid file needs \"{key}\""))),
            Some(v) => {
                let o = v
                    .as_object()
                    .ok_or_else(|| Error::SchemaError(format!("\"{key}\" must be an object")))?;
                let min = o.get("min").and_then(Value::as_f64).ok_or_else(|| {
                    Error::SchemaError(format!("\"{key}\" needs numeric \"min\""))
                })?;
                let max = o.get("max").and_then(Value::as_f64).ok_or_else(|| {
                    Error::SchemaError(format!("\"{key}\" needs numeric \"max\""))
                })?;
                let count = o.get("count").and_then(Value::as_u64).unwrap_or(5) as usize;
                let log = o.get("scale").and_then(Value::as_str) == Some("log");
                Ok((min, max, count.max(1), log))
            }
        }
    };
    let samples = |(min, max, count, log): Range| -> Vec<f64> {
        if count == 1 {
            return vec![min];
        }
        (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                if log {
                    min * (max / min).powf(t)
                } else {
                    min + (max - min) * t
                }
            })
            .collect()
    };
    let taus = samples(range("tau", Some((0.0, 0.0, 1, false)))?);
    let gammas = samples(range("gamma", None)?);
    let etas: Vec<Vec<f64>> = if d == 1 {
        vec![Vec::new()]
    } else {
        let axis = samples(range("eta", Some((0.0, 0.0, 1, false)))?);
        // product over the d-1 tangential components
        let mut grids: Vec<Vec<f64>> = vec![Vec::new()];
        for _ in 0..(d - 1) {
            let mut next = Vec::new();
            for g in &grids {
                for &v in &axis {
                    let mut g2 = g.clone();
                    g2.push(v);
                    next.push(g2);
                }
            }
            grids = next;
        }
        grids
    };
    let mut out = Vec::new();
    for &gamma in &gammas {
        for &tau in &taus {
            for eta in &etas {
                out.push(Frequency::new(tau, DVector::from_vec(eta.clone()), gamma)?);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidGrid("the frequency set is empty".into()));
    }
    Ok(out)
}

/// Parse "gamma,1" style weight pairs.
fn parse_weights(arg: &str) -> Result<ViscousWeights, Error> {
    let parts: Vec<&str> = arg.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::InvalidWeights(format!(
            "expected \"w_u,w_du\", got \"{arg}\""
        )));
    }
    let parse_one = |s: &str| -> Result<WeightFn, Error> {
        if s.eq_ignore_ascii_case("gamma") {
            Ok(WeightFn::Gamma)
        } else {
            let v: f64 = s.parse().map_err(|_| {
                Error::InvalidWeights(format!("weight \"{s}\" is neither gamma nor a number"))
            })?;
            Ok(WeightFn::Const(v))
        }
    };
    let w = ViscousWeights {
        u: parse_one(parts[0])?,
        du: parse_one(parts[1])?,
    };
    w.u.validate()?;
    w.du.validate()?;
    Ok(w)
}
