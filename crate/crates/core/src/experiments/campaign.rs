//! Monte-Carlo campaigns: large initial attitude misalignments (quaternion vs
//! Euler-angle controller) and parametric uncertainty of base and end effector.
//!
//! Run `i` draws from its own `ChaCha8Rng` seeded with `seed ^ i`, and results
//! are merged in run-index order, so the summary does not depend on the number
//! of worker threads.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{convergence_time, mean_axis_distance, Statistics};
use super::telemetry::write_telemetry_strided;
use super::{run_episode, Controller, EpisodeConfig, EpisodeOutcome, EpisodeStatus};
use crate::actuation::ActuatorLimits;
use crate::baselines::PdGains;
use crate::dynamics::ModelPair;
use crate::error::{Error, Result};
use crate::kinematics::{inertia_is_physical, LinkInertia, SpacecraftModel};
use crate::ntsmc::disturbance::DisturbanceConfig;
use crate::ntsmc::ControllerGains;
use crate::reference::{Reference, ScenarioConfig, ScenarioKind};

/// Mean torque-integral reduction reported for the attitude campaign in the
/// original study, percent.
pub const REFERENCE_TORQUE_REDUCTION: f64 = 62.78;
/// Mean end-effector convergence times reported for the uncertainty campaign, s.
pub const REFERENCE_EE_POSITION_TIME: f64 = 87.80;
pub const REFERENCE_EE_ATTITUDE_TIME: f64 = 100.63;

/// Everything a campaign needs besides its own [`McConfig`].
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: SpacecraftModel,
    pub gains: ControllerGains,
    pub euler_gains: ControllerGains,
    pub pd_gains: PdGains,
    pub scenario: ScenarioConfig,
    pub disturbance: DisturbanceConfig,
}

impl Setup {
    pub fn paper_default() -> Self {
        let model = SpacecraftModel::default();
        let n = model.dof();
        Self {
            gains: ControllerGains::paper_default(n),
            euler_gains: ControllerGains::euler_default(n),
            pd_gains: PdGains::default(),
            scenario: ScenarioConfig::default(),
            disturbance: DisturbanceConfig::default(),
            model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UncertaintyConfig {
    /// Relative half-width of the uniform base mass and principal-moment spread.
    pub base_spread: f64,
    /// Base products of inertia are drawn from `U(0, fraction · J_nominal)`.
    pub base_poi_fraction: f64,
    pub ee_mass: [f64; 2],
    pub ee_moi: [f64; 2],
    pub ee_poi: [f64; 2],
    pub max_resamples: usize,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        Self {
            base_spread: 0.05,
            base_poi_fraction: 0.10,
            ee_mass: [0.1, 100.1],
            ee_moi: [50.0, 150.0],
            ee_poi: [0.0, 10.0],
            max_resamples: 100,
        }
    }
}

impl UncertaintyConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(0.0..1.0).contains(&self.base_spread) {
            return Err(Error::invalid(format!("{prefix}.base_spread"), "must be in [0, 1)"));
        }
        if !(self.base_poi_fraction >= 0.0 && self.base_poi_fraction.is_finite()) {
            return Err(Error::invalid(format!("{prefix}.base_poi_fraction"), "must be non-negative"));
        }
        for (name, [lo, hi], min) in
            [("ee_mass", self.ee_mass, 0.0), ("ee_moi", self.ee_moi, 0.0), ("ee_poi", self.ee_poi, f64::NEG_INFINITY)]
        {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= min) {
                return Err(Error::invalid(format!("{prefix}.{name}"), "need finite lo <= hi within the physical range"));
            }
        }
        if self.ee_mass[0] <= 0.0 {
            return Err(Error::invalid(format!("{prefix}.ee_mass"), "end-effector mass must stay positive"));
        }
        if self.max_resamples == 0 {
            return Err(Error::invalid(format!("{prefix}.max_resamples"), "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub runs: usize,
    pub seed: u64,
    /// Per-axis bound of the xyz Euler misalignment, rad.
    pub misalignment_bound: f64,
    pub dt: f64,
    pub attitude_horizon: f64,
    pub uncertainty_horizon: f64,
    /// Reference used by the attitude campaign.
    pub attitude_scenario: ScenarioKind,
    /// Actuator envelope of the attitude campaign.
    pub attitude_limits: ActuatorLimits,
    /// Actuator envelope of the uncertainty campaign.
    pub uncertainty_limits: ActuatorLimits,
    pub uncertainty: UncertaintyConfig,
    /// Row stride of the per-run telemetry files.
    pub telemetry_stride: usize,
    pub position_threshold: f64,
    pub attitude_threshold_deg: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            runs: 100,
            seed: 0,
            misalignment_bound: 0.8 * std::f64::consts::PI,
            dt: 1e-3,
            attitude_horizon: 150.0,
            uncertainty_horizon: 300.0,
            attitude_scenario: ScenarioKind::Hold,
            attitude_limits: ActuatorLimits::unlimited(),
            uncertainty_limits: ActuatorLimits::default(),
            uncertainty: UncertaintyConfig::default(),
            telemetry_stride: 100,
            position_threshold: 1e-3,
            attitude_threshold_deg: 0.01,
        }
    }
}

impl McConfig {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid(format!("{prefix}.runs"), "must be at least 1"));
        }
        if !(self.misalignment_bound >= 0.0 && self.misalignment_bound.is_finite()) {
            return Err(Error::invalid(format!("{prefix}.misalignment_bound"), "must be non-negative"));
        }
        for (name, v) in [
            ("dt", self.dt),
            ("attitude_horizon", self.attitude_horizon),
            ("uncertainty_horizon", self.uncertainty_horizon),
            ("position_threshold", self.position_threshold),
            ("attitude_threshold_deg", self.attitude_threshold_deg),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{prefix}.{name}"), "must be positive"));
            }
        }
        if self.telemetry_stride == 0 {
            return Err(Error::invalid(format!("{prefix}.telemetry_stride"), "must be at least 1"));
        }
        self.attitude_limits.validate(&format!("{prefix}.attitude_limits"))?;
        self.uncertainty_limits.validate(&format!("{prefix}.uncertainty_limits"))?;
        self.uncertainty.validate(&format!("{prefix}.uncertainty"))
    }

    pub fn attitude_episode(&self) -> EpisodeConfig {
        EpisodeConfig { dt: self.dt, horizon: self.attitude_horizon, limits: self.attitude_limits, ..EpisodeConfig::default() }
    }

    pub fn uncertainty_episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            dt: self.dt,
            horizon: self.uncertainty_horizon,
            limits: self.uncertainty_limits,
            ..EpisodeConfig::default()
        }
    }
}

/// Per-run generator, independent of scheduling.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ run as u64)
}

/// Outcome digest of one controller in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerRun {
    #[serde(flatten)]
    pub status: EpisodeStatus,
    pub torque_integral: f64,
    pub energy: f64,
    pub peak_u_pre: f64,
    pub mean_axis_distance: Option<f64>,
    pub traversed_rotation: f64,
    pub final_attitude_error: f64,
    /// Time after which the base attitude error stays below the threshold.
    pub attitude_convergence_time: Option<f64>,
}

impl ControllerRun {
    fn from_outcome(o: &EpisodeOutcome, attitude_threshold: f64) -> Self {
        Self {
            status: o.status.clone(),
            torque_integral: o.torque_integral(),
            energy: o.energy(),
            peak_u_pre: o.peak_u_pre(),
            mean_axis_distance: mean_axis_distance(&o.telemetry),
            traversed_rotation: o.traversed_rotation,
            final_attitude_error: o.final_record().map_or(f64::NAN, |r| r.attitude_error_norm),
            attitude_convergence_time: convergence_time(&o.telemetry, attitude_threshold, |r| r.attitude_error_norm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttitudeRun {
    pub run: usize,
    pub misalignment_xyz: [f64; 3],
    /// Shortest rotation angle of the initial misalignment, rad.
    pub initial_angle: f64,
    pub proposed: Option<ControllerRun>,
    pub euler: Option<ControllerRun>,
    /// `100 (1 - T_proposed / T_euler)` when both runs completed.
    pub torque_reduction_percent: Option<f64>,
    pub error: Option<String>,
}

impl AttitudeRun {
    /// The proposed run completed and spent less torque than a completed
    /// baseline, or the baseline failed to complete.
    pub fn proposed_lower_torque(&self) -> bool {
        match (&self.proposed, &self.euler) {
            (Some(p), Some(e)) if p.status.is_completed() => {
                !e.status.is_completed() || p.torque_integral < e.torque_integral
            }
            _ => false,
        }
    }

    pub fn proposed_closer_to_geodesic(&self) -> bool {
        match (&self.proposed, &self.euler) {
            (Some(p), Some(e)) if p.status.is_completed() => match (p.mean_axis_distance, e.mean_axis_distance) {
                (Some(a), Some(b)) => a < b,
                (Some(_), None) => !e.status.is_completed(),
                _ => false,
            },
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttitudeSummary {
    pub campaign: String,
    pub runs: usize,
    pub seed: u64,
    pub proposed_completed: usize,
    pub euler_completed: usize,
    pub euler_singular: usize,
    pub fraction_lower_torque: f64,
    pub fraction_closer_axis: f64,
    pub torque_reduction_percent: Option<Statistics>,
    pub reference_torque_reduction_percent: f64,
    pub proposed_torque_integral: Option<Statistics>,
    pub euler_torque_integral: Option<Statistics>,
    pub proposed_axis_distance: Option<Statistics>,
    pub euler_axis_distance: Option<Statistics>,
    pub records: Vec<AttitudeRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledParameters {
    pub base_mass: f64,
    pub base_inertia: [[f64; 3]; 3],
    pub ee_mass: f64,
    pub ee_inertia: [[f64; 3]; 3],
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyRun {
    pub run: usize,
    pub parameters: SampledParameters,
    pub result: Option<ControllerRun>,
    pub ee_position_time: Option<f64>,
    pub ee_attitude_time: Option<f64>,
    pub final_ee_position_error: f64,
    pub final_ee_attitude_error_deg: f64,
    pub error: Option<String>,
}

impl UncertaintyRun {
    pub fn converged(&self) -> bool {
        self.ee_position_time.is_some() && self.ee_attitude_time.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySummary {
    pub campaign: String,
    pub runs: usize,
    pub seed: u64,
    pub converged: usize,
    pub ee_position_time: Option<Statistics>,
    pub ee_attitude_time: Option<Statistics>,
    pub reference_ee_position_time: f64,
    pub reference_ee_attitude_time: f64,
    pub records: Vec<UncertaintyRun>,
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))?;
    Ok(pool.install(f))
}

fn telemetry_path(dir: &Path, run: usize, tag: &str) -> PathBuf {
    dir.join(format!("run_{run:04}_{tag}.csv"))
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Draws the misalignment triplet of one attitude run.
pub fn sample_misalignment(mc: &McConfig, run: usize) -> Vector3<f64> {
    let mut rng = run_rng(mc.seed, run);
    let b = mc.misalignment_bound;
    Vector3::from_fn(|_, _| uniform(&mut rng, -b, b))
}

fn attitude_run(
    setup: &Setup,
    mc: &McConfig,
    reference: &Reference,
    run: usize,
    telemetry_dir: Option<&Path>,
) -> Result<AttitudeRun> {
    let misalignment = sample_misalignment(mc, run);
    let mut scenario = setup.scenario.clone();
    scenario.misalignment_xyz = misalignment.into();
    let initial = reference.initial_state(&scenario);
    let n = setup.model.dof();
    let pair = ModelPair::exact(setup.model.clone());
    let disturbance = setup.disturbance.build(n, run as u64);
    let config = mc.attitude_episode();
    let threshold = mc.attitude_threshold_deg.to_radians();
    let q_be0 = crate::attitude::error_quaternion(&initial.q_b, &reference.sample(0.0).q_bd);
    let mut record = AttitudeRun {
        run,
        misalignment_xyz: misalignment.into(),
        initial_angle: q_be0.angle(),
        proposed: None,
        euler: None,
        torque_reduction_percent: None,
        error: None,
    };
    for (tag, controller) in
        [("proposed", Controller::Ntsmc(setup.gains.clone())), ("euler", Controller::Euler(setup.euler_gains.clone()))]
    {
        let outcome = match run_episode(&pair, &controller, reference, &initial, &disturbance, &config) {
            Ok(o) => o,
            Err(e) => {
                record.error = Some(format!("{tag}: {e}"));
                continue;
            }
        };
        if let Some(dir) = telemetry_dir {
            write_telemetry_strided(&outcome.telemetry, mc.telemetry_stride, &telemetry_path(dir, run, tag))?;
        }
        let digest = ControllerRun::from_outcome(&outcome, threshold);
        if tag == "proposed" {
            record.proposed = Some(digest);
        } else {
            record.euler = Some(digest);
        }
    }
    if let (Some(p), Some(e)) = (&record.proposed, &record.euler) {
        if p.status.is_completed() && e.status.is_completed() && e.torque_integral > 0.0 {
            record.torque_reduction_percent = Some(100.0 * (1.0 - p.torque_integral / e.torque_integral));
        }
    }
    Ok(record)
}

fn collect_stats(values: impl Iterator<Item = Option<f64>>) -> Option<Statistics> {
    let v: Vec<f64> = values.flatten().collect();
    Statistics::from_samples(&v)
}

/// Large-misalignment regulation: both attitude controllers from identical
/// initial states.
pub fn mc_attitude(setup: &Setup, mc: &McConfig, jobs: usize, telemetry_dir: Option<&Path>) -> Result<AttitudeSummary> {
    mc.validate("mc")?;
    let mut scenario = setup.scenario.clone();
    scenario.kind = mc.attitude_scenario;
    let reference = Reference::build(&scenario, &setup.model)?;
    let setup = Setup { scenario, ..setup.clone() };
    let records = in_pool(jobs, || {
        (0..mc.runs)
            .into_par_iter()
            .map(|i| attitude_run(&setup, mc, &reference, i, telemetry_dir))
            .collect::<Result<Vec<_>>>()
    })??;
    let count = |f: &dyn Fn(&AttitudeRun) -> bool| records.iter().filter(|r| f(r)).count();
    let runs = records.len();
    Ok(AttitudeSummary {
        campaign: "attitude".into(),
        runs,
        seed: mc.seed,
        proposed_completed: count(&|r| r.proposed.as_ref().is_some_and(|p| p.status.is_completed())),
        euler_completed: count(&|r| r.euler.as_ref().is_some_and(|p| p.status.is_completed())),
        euler_singular: count(&|r| r.euler.as_ref().is_some_and(|p| matches!(p.status, EpisodeStatus::Singular { .. }))),
        fraction_lower_torque: count(&|r| r.proposed_lower_torque()) as f64 / runs as f64,
        fraction_closer_axis: count(&|r| r.proposed_closer_to_geodesic()) as f64 / runs as f64,
        torque_reduction_percent: collect_stats(records.iter().map(|r| r.torque_reduction_percent)),
        reference_torque_reduction_percent: REFERENCE_TORQUE_REDUCTION,
        proposed_torque_integral: collect_stats(records.iter().map(|r| r.proposed.as_ref().map(|p| p.torque_integral))),
        euler_torque_integral: collect_stats(records.iter().map(|r| r.euler.as_ref().map(|p| p.torque_integral))),
        proposed_axis_distance: collect_stats(records.iter().map(|r| r.proposed.as_ref().and_then(|p| p.mean_axis_distance))),
        euler_axis_distance: collect_stats(records.iter().map(|r| r.euler.as_ref().and_then(|p| p.mean_axis_distance))),
        records,
    })
}

fn to_rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
}

/// Inertia tensor from principal-axis moments and products `[xy, xz, yz]`
/// (products enter with a negative sign).
fn inertia_from(moments: &Vector3<f64>, products: &Vector3<f64>) -> Matrix3<f64> {
    let (xy, xz, yz) = (products.x, products.y, products.z);
    Matrix3::new(moments.x, -xy, -xz, -xy, moments.y, -yz, -xz, -yz, moments.z)
}

fn positive_definite(m: &Matrix3<f64>) -> bool {
    m.symmetric_eigenvalues().min() > 0.0
}

/// Draws a truth model around `nominal`. The base tensor must be positive
/// definite; the end-effector tensor must also satisfy the triangle
/// inequality. Fails after `max_resamples` rejected draws.
pub fn sample_truth_model(
    nominal: &SpacecraftModel,
    cfg: &UncertaintyConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(SpacecraftModel, SampledParameters)> {
    let j0 = nominal.base_inertia_body.diagonal();
    let s = cfg.base_spread;
    for attempt in 0..cfg.max_resamples {
        let base_mass = nominal.base_mass * uniform(rng, 1.0 - s, 1.0 + s);
        let moments = j0.map(|j| j * uniform(rng, 1.0 - s, 1.0 + s));
        let cap = |a: usize, b: usize| cfg.base_poi_fraction * j0[a].min(j0[b]);
        let products = Vector3::new(uniform(rng, 0.0, cap(0, 1)), uniform(rng, 0.0, cap(0, 2)), uniform(rng, 0.0, cap(1, 2)));
        let base_inertia = inertia_from(&moments, &products);
        let ee_mass = uniform(rng, cfg.ee_mass[0], cfg.ee_mass[1]);
        let ee_moments = Vector3::from_fn(|_, _| uniform(rng, cfg.ee_moi[0], cfg.ee_moi[1]));
        let ee_products = Vector3::from_fn(|_, _| uniform(rng, cfg.ee_poi[0], cfg.ee_poi[1]));
        let ee_inertia = inertia_from(&ee_moments, &ee_products);
        if !positive_definite(&base_inertia) || !inertia_is_physical(&ee_inertia) {
            continue;
        }
        let mut truth = nominal.clone();
        truth.base_mass = base_mass;
        truth.base_inertia_body = base_inertia;
        truth.end_effector = LinkInertia { mass: ee_mass, inertia_body: ee_inertia, com_offset: Vector3::zeros() };
        let params = SampledParameters {
            base_mass,
            base_inertia: to_rows(&base_inertia),
            ee_mass,
            ee_inertia: to_rows(&ee_inertia),
            resamples: attempt,
        };
        return Ok((truth, params));
    }
    Err(Error::invalid(
        "mc.uncertainty",
        format!("no physically consistent inertia within {} draws", cfg.max_resamples),
    ))
}

fn uncertainty_run(
    setup: &Setup,
    mc: &McConfig,
    reference: &Reference,
    run: usize,
    telemetry_dir: Option<&Path>,
) -> Result<UncertaintyRun> {
    let mut rng = run_rng(mc.seed, run);
    let (truth, parameters) = sample_truth_model(&setup.model, &mc.uncertainty, &mut rng)?;
    let pair = ModelPair::new(truth, setup.model.clone())?;
    let initial = reference.initial_state(&setup.scenario);
    let disturbance = setup.disturbance.build(setup.model.dof(), run as u64);
    let config = mc.uncertainty_episode();
    let threshold = mc.attitude_threshold_deg.to_radians();
    let mut record = UncertaintyRun {
        run,
        parameters,
        result: None,
        ee_position_time: None,
        ee_attitude_time: None,
        final_ee_position_error: f64::NAN,
        final_ee_attitude_error_deg: f64::NAN,
        error: None,
    };
    let controller = Controller::Ntsmc(setup.gains.clone());
    match run_episode(&pair, &controller, reference, &initial, &disturbance, &config) {
        Ok(o) => {
            if let Some(dir) = telemetry_dir {
                write_telemetry_strided(&o.telemetry, mc.telemetry_stride, &telemetry_path(dir, run, "proposed"))?;
            }
            if o.status.is_completed() {
                record.ee_position_time =
                    convergence_time(&o.telemetry, mc.position_threshold, |r| r.ee_position_error_norm);
                record.ee_attitude_time = convergence_time(&o.telemetry, threshold, |r| r.ee_attitude_error_norm);
            }
            if let Some(last) = o.final_record() {
                record.final_ee_position_error = last.ee_position_error_norm;
                record.final_ee_attitude_error_deg = last.ee_attitude_error_norm.to_degrees();
            }
            record.result = Some(ControllerRun::from_outcome(&o, threshold));
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    Ok(record)
}

/// Tracking of the configured scenario with randomized base and end-effector
/// inertia; the controller keeps the nominal model.
pub fn mc_uncertainty(
    setup: &Setup,
    mc: &McConfig,
    jobs: usize,
    telemetry_dir: Option<&Path>,
) -> Result<UncertaintySummary> {
    mc.validate("mc")?;
    let reference = Reference::build(&setup.scenario, &setup.model)?;
    let records = in_pool(jobs, || {
        (0..mc.runs)
            .into_par_iter()
            .map(|i| uncertainty_run(setup, mc, &reference, i, telemetry_dir))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(UncertaintySummary {
        campaign: "uncertainty".into(),
        runs: records.len(),
        seed: mc.seed,
        converged: records.iter().filter(|r| r.converged()).count(),
        ee_position_time: collect_stats(records.iter().map(|r| r.ee_position_time)),
        ee_attitude_time: collect_stats(records.iter().map(|r| r.ee_attitude_time)),
        reference_ee_position_time: REFERENCE_EE_POSITION_TIME,
        reference_ee_attitude_time: REFERENCE_EE_ATTITUDE_TIME,
        records,
    })
}
