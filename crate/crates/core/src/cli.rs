//! Command-line front end: `simulate`, `mc` and `validate`.
//!
//! Exit codes: 0 success, 1 failed invariant check or runtime error,
//! 2 configuration error, 3 numerical divergence or kinematic singularity.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attitude::{g_matrix, UnitQuaternion};
use crate::config::RunConfig;
use crate::dynamics::{kinetic_energy, mass_matrix, step, GeneralizedForce, ModelPair, SystemState};
use crate::error::{Error, Result};
use crate::experiments::campaign::{mc_attitude, mc_uncertainty};
use crate::experiments::telemetry::write_telemetry_strided;
use crate::experiments::{convergence_time, run_episode, Controller, ControllerKind, EpisodeOutcome, EpisodeStatus};
use crate::persist::write_json;
use crate::reference::{Reference, ScenarioKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ORBITAL_ARM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "orbital-arm", version, about = "Free-flying satellite and manipulator simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ControllerArg {
    Ntsmc,
    Pd,
    Euler,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    Hold,
    Diagonal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CampaignArg {
    Attitude,
    Uncertainty,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one closed-loop episode and write telemetry.csv and metrics.json.
    Simulate {
        /// TOML run configuration; defaults apply when omitted.
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ntsmc")]
        controller: ControllerArg,
        /// Overrides `scenario.kind`.
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
        /// Overrides `disturbance.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte-Carlo campaign and write summary.json plus per-run telemetry.
    Mc {
        config: Option<PathBuf>,
        /// `attitude` or `uncertainty`.
        #[arg(long)]
        campaign: String,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; capped by ORBITAL_ARM_THREADS.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the configuration and run the fast model invariant suite.
    Validate { config: Option<PathBuf> },
}

fn load(config: Option<&Path>) -> Result<RunConfig> {
    match config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn config_failure(e: &Error) -> i32 {
    eprintln!("configuration error: {e}");
    EXIT_CONFIG
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Simulate { config, controller, scenario, seed, out } => {
            cmd_simulate(config.as_deref(), controller, scenario, seed, out.as_deref())
        }
        Command::Mc { config, campaign, runs, seed, jobs, out } => {
            cmd_mc(config.as_deref(), &campaign, runs, seed, jobs, out.as_deref())
        }
        Command::Validate { config } => cmd_validate(config.as_deref()),
    }
}

fn runtime_failure(e: &Error) -> i32 {
    eprintln!("error: {e}");
    match e {
        Error::InvalidParameter { .. } | Error::Dimension { .. } | Error::Planning(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

#[derive(Debug, Serialize)]
struct SimulationMetrics {
    controller: ControllerKind,
    scenario: ScenarioKind,
    seed: u64,
    #[serde(flatten)]
    status: EpisodeStatus,
    steps: usize,
    energy: f64,
    torque_integral: f64,
    peak_u_pre: f64,
    traversed_rotation: f64,
    final_position_error: f64,
    final_attitude_error: f64,
    final_joint_error: f64,
    final_ee_position_error: f64,
    final_ee_attitude_error: f64,
    final_k_delta_trace: f64,
    ee_position_convergence_time: Option<f64>,
    ee_attitude_convergence_time: Option<f64>,
}

impl SimulationMetrics {
    fn new(o: &EpisodeOutcome, scenario: ScenarioKind, seed: u64, pos_tol: f64, att_tol: f64) -> Self {
        let last = o.final_record();
        let f = |g: fn(&crate::experiments::TelemetryRecord) -> f64| last.map_or(f64::NAN, g);
        let done = o.status.is_completed();
        Self {
            controller: o.controller,
            scenario,
            seed,
            status: o.status.clone(),
            steps: o.telemetry.len(),
            energy: o.energy(),
            torque_integral: o.torque_integral(),
            peak_u_pre: o.peak_u_pre(),
            traversed_rotation: o.traversed_rotation,
            final_position_error: f(|r| r.position_error_norm),
            final_attitude_error: f(|r| r.attitude_error_norm),
            final_joint_error: f(|r| r.joint_error_norm),
            final_ee_position_error: f(|r| r.ee_position_error_norm),
            final_ee_attitude_error: f(|r| r.ee_attitude_error_norm),
            final_k_delta_trace: o.final_adaptive.trace(),
            ee_position_convergence_time: done
                .then(|| convergence_time(&o.telemetry, pos_tol, |r| r.ee_position_error_norm))
                .flatten(),
            ee_attitude_convergence_time: done
                .then(|| convergence_time(&o.telemetry, att_tol, |r| r.ee_attitude_error_norm))
                .flatten(),
        }
    }
}

fn cmd_simulate(
    config: Option<&Path>,
    controller: ControllerArg,
    scenario: Option<ScenarioArg>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> i32 {
    let mut cfg = match load(config) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    if let Some(s) = scenario {
        cfg.scenario.kind = match s {
            ScenarioArg::Hold => ScenarioKind::Hold,
            ScenarioArg::Diagonal => ScenarioKind::Diagonal,
        };
    }
    if let Some(s) = seed {
        cfg.disturbance.seed = s;
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone());
    match simulate(&cfg, controller, &out) {
        Ok(metrics) => {
            println!(
                "{:?} on {:?}: {:?}, final base error {:.3e} m / {:.3e} rad, EE {:.3e} m / {:.3e} rad, energy {:.4e}",
                metrics.controller,
                metrics.scenario,
                metrics.status,
                metrics.final_position_error,
                metrics.final_attitude_error,
                metrics.final_ee_position_error,
                metrics.final_ee_attitude_error,
                metrics.energy
            );
            println!("wrote {}", out.display());
            if metrics.status.is_completed() {
                EXIT_OK
            } else {
                EXIT_DIVERGED
            }
        }
        Err(e) => runtime_failure(&e),
    }
}

fn simulate(cfg: &RunConfig, controller: ControllerArg, out: &Path) -> Result<SimulationMetrics> {
    let setup = cfg.setup();
    let n = setup.model.dof();
    let reference = Reference::build(&setup.scenario, &setup.model)?;
    let initial = reference.initial_state(&setup.scenario);
    let controller = match controller {
        ControllerArg::Ntsmc => Controller::Ntsmc(setup.gains.clone()),
        ControllerArg::Pd => Controller::Pd(setup.pd_gains.clone()),
        ControllerArg::Euler => Controller::Euler(setup.euler_gains.clone()),
    };
    let disturbance = setup.disturbance.build(n, 0);
    let pair = ModelPair::exact(setup.model.clone());
    let outcome = run_episode(&pair, &controller, &reference, &initial, &disturbance, &cfg.episode_config())?;
    write_telemetry_strided(&outcome.telemetry, cfg.output.telemetry_stride, &out.join("telemetry.csv"))?;
    let metrics = SimulationMetrics::new(
        &outcome,
        setup.scenario.kind,
        cfg.disturbance.seed,
        cfg.mc.position_threshold,
        cfg.mc.attitude_threshold_deg.to_radians(),
    );
    write_json(&out.join("metrics.json"), &metrics)?;
    Ok(metrics)
}

/// Worker count: the request (or all cores), capped by [`THREADS_ENV`].
pub fn resolve_jobs(requested: Option<usize>) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&c| c > 0);
    let jobs = requested.unwrap_or(available).max(1);
    cap.map_or(jobs, |c| jobs.min(c))
}

fn cmd_mc(
    config: Option<&Path>,
    campaign: &str,
    runs: Option<usize>,
    seed: Option<u64>,
    jobs: Option<usize>,
    out: Option<&Path>,
) -> i32 {
    let attitude = match campaign {
        "attitude" => true,
        "uncertainty" => false,
        other => {
            eprintln!("configuration error: unknown campaign '{other}' (attitude, uncertainty)");
            return EXIT_CONFIG;
        }
    };
    let mut cfg = match load(config) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    if let Some(r) = runs {
        cfg.mc.runs = r;
    }
    if let Some(s) = seed {
        cfg.mc.seed = s;
    }
    if let Err(e) = cfg.mc.validate("mc") {
        return config_failure(&e);
    }
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone());
    let jobs = resolve_jobs(jobs);
    let setup = cfg.setup();
    let telemetry = out.join("telemetry");
    let result = if attitude {
        mc_attitude(&setup, &cfg.mc, jobs, Some(&telemetry)).and_then(|s| {
            write_json(&out.join("summary.json"), &s)?;
            println!(
                "attitude campaign: {} runs, proposed completed {}, Euler completed {} (singular {})",
                s.runs, s.proposed_completed, s.euler_completed, s.euler_singular
            );
            println!(
                "lower torque integral in {:.0}% of runs, closer to the geodesic axis in {:.0}%",
                100.0 * s.fraction_lower_torque,
                100.0 * s.fraction_closer_axis
            );
            if let Some(r) = &s.torque_reduction_percent {
                println!(
                    "mean torque-integral reduction {:.2}% (reference {:.2}%)",
                    r.mean, s.reference_torque_reduction_percent
                );
            }
            Ok(())
        })
    } else {
        mc_uncertainty(&setup, &cfg.mc, jobs, Some(&telemetry)).and_then(|s| {
            write_json(&out.join("summary.json"), &s)?;
            println!("uncertainty campaign: {} of {} runs converged", s.converged, s.runs);
            let mean = |x: &Option<crate::experiments::Statistics>| x.as_ref().map(|s| format!("{:.2} s", s.mean));
            println!(
                "mean EE convergence: position {} (reference {:.2} s), attitude {} (reference {:.2} s)",
                mean(&s.ee_position_time).unwrap_or_else(|| "n/a".into()),
                s.reference_ee_position_time,
                mean(&s.ee_attitude_time).unwrap_or_else(|| "n/a".into()),
                s.reference_ee_attitude_time
            );
            Ok(())
        })
    };
    match result {
        Ok(()) => {
            println!("wrote {}", out.display());
            EXIT_OK
        }
        Err(e) => runtime_failure(&e),
    }
}

/// One line of the invariant report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> SystemState {
    let mut s = SystemState::rest(n);
    s.p_b = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    s.q_b = UnitQuaternion::new_normalize(
        rng.random_range(-1.0..1.0),
        Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
    );
    s.q = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    s.set_velocity(&DVector::from_fn(6 + n, |_, _| rng.random_range(-0.5..0.5)));
    s
}

/// Mass-matrix symmetry and definiteness, `G Gᵀ = E`, and the power balance
/// `ΔK = ∫ ẋᵀ u dt` over one second of forced motion.
pub fn invariant_checks(cfg: &RunConfig) -> Result<Vec<Check>> {
    let model = &cfg.model;
    let n = model.dof();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut checks = Vec::new();

    let (mut asym, mut min_eig) = (0.0_f64, f64::INFINITY);
    for _ in 0..50 {
        let m = mass_matrix(model, &random_state(&mut rng, n))?;
        asym = asym.max((&m - m.transpose()).amax() / m.amax());
        min_eig = min_eig.min(m.symmetric_eigenvalues().min());
    }
    checks.push(Check {
        name: "mass matrix symmetric",
        passed: asym < 1e-10,
        detail: format!("max relative asymmetry {asym:.2e} over 50 states"),
    });
    checks.push(Check {
        name: "mass matrix positive definite",
        passed: min_eig > 0.0,
        detail: format!("smallest eigenvalue {min_eig:.4e}"),
    });

    let mut gg = 0.0_f64;
    for _ in 0..50 {
        let q = random_state(&mut rng, 0).q_b;
        let g = g_matrix(&q);
        gg = gg.max((g * g.transpose() - Matrix3::identity()).amax());
    }
    checks.push(Check { name: "G Gᵀ = E", passed: gg < 1e-12, detail: format!("max deviation {gg:.2e}") });

    let dt = 1e-3;
    let mut s = random_state(&mut rng, n);
    let u = GeneralizedForce::from_vector(&DVector::from_fn(6 + n, |_, _| rng.random_range(-2.0..2.0)))?;
    let uv = u.to_vector();
    let k0 = kinetic_energy(model, &s)?;
    let mut work = 0.0;
    let mut p_prev = s.velocity().dot(&uv);
    for _ in 0..1000 {
        s = step(model, &s, &u, dt)?;
        let p = s.velocity().dot(&uv);
        work += 0.5 * dt * (p_prev + p);
        p_prev = p;
    }
    let dk = kinetic_energy(model, &s)? - k0;
    let rel = (dk - work).abs() / work.abs().max(dk.abs()).max(1e-12);
    checks.push(Check {
        name: "power balance over 1 s",
        passed: rel < 1e-5,
        detail: format!("ΔK = {dk:.6e} J, ∫ẋᵀu dt = {work:.6e} J, relative gap {rel:.2e}"),
    });
    Ok(checks)
}

fn cmd_validate(config: Option<&Path>) -> i32 {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    println!("configuration: ok (schema version {}, {} joints)", cfg.schema_version, cfg.model.dof());
    match invariant_checks(&cfg) {
        Ok(checks) => {
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                EXIT_OK
            } else {
                EXIT_FAILURE
            }
        }
        Err(e) => runtime_failure(&e),
    }
}
