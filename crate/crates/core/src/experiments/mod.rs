//! Closed-loop episodes, Monte-Carlo campaigns and their metrics.
//!
//! One episode step: sample the reference, evaluate the controller on the
//! nominal model, saturate, add the disturbance and integrate the truth model
//! with the command held over the step.

pub mod campaign;
pub mod metrics;
pub mod telemetry;

use serde::{Deserialize, Serialize};

use crate::actuation::{saturate, ActuatorLimits};
use crate::attitude::{error_quaternion, geodesic_axis, instantaneous_axis_distance};
use crate::baselines::{euler_ntsmc_control_with_terms, pd_control_with_terms, PdGains};
use crate::dynamics::{dynamics_terms, step_with_disturbance, GeneralizedForce, ModelPair, SystemState};
use crate::error::{Error, Result};
use crate::kinematics::end_effector_pose;
use crate::ntsmc::disturbance::Disturbance;
use crate::ntsmc::{adaptive_update, control_with_terms, AdaptiveState, ControllerGains, SlidingDiagnostics, TrackingError};
use crate::reference::Reference;

pub use campaign::{mc_attitude, mc_uncertainty, McConfig, Setup, UncertaintyConfig};
pub use metrics::{convergence_time, energy_metric, mean_axis_distance, torque_integral, Statistics};

pub use telemetry::{read_telemetry, write_telemetry, TelemetryRecord, TELEMETRY_HEADER};

/// Angular rate below which the instantaneous rotation axis is not sampled.
pub const AXIS_RATE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Ntsmc,
    Pd,
    Euler,
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ntsmc" => Ok(Self::Ntsmc),
            "pd" => Ok(Self::Pd),
            "euler" => Ok(Self::Euler),
            other => Err(Error::invalid("controller", format!("unknown controller '{other}' (ntsmc, pd, euler)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    Ntsmc(ControllerGains),
    Pd(PdGains),
    Euler(ControllerGains),
}

impl Controller {
    pub fn kind(&self) -> ControllerKind {
        match self {
            Controller::Ntsmc(_) => ControllerKind::Ntsmc,
            Controller::Pd(_) => ControllerKind::Pd,
            Controller::Euler(_) => ControllerKind::Euler,
        }
    }

    fn initial_adaptive(&self, n: usize) -> AdaptiveState {
        match self {
            Controller::Ntsmc(g) | Controller::Euler(g) => AdaptiveState::from_gains(g),
            Controller::Pd(_) => AdaptiveState::new(n, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub dt: f64,
    pub horizon: f64,
    pub limits: ActuatorLimits,
    /// Velocity norm beyond which the run is declared divergent.
    pub divergence_speed: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { dt: 1e-3, horizon: 60.0, limits: ActuatorLimits::default(), divergence_speed: 1e3 }
    }
}

impl EpisodeConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("{prefix}.dt"), "must be positive"));
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return Err(Error::invalid(format!("{prefix}.horizon"), "must be at least one step"));
        }
        if !(self.divergence_speed > 0.0) {
            return Err(Error::invalid(format!("{prefix}.divergence_speed"), "must be positive"));
        }
        self.limits.validate(&format!("{prefix}.limits"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EpisodeStatus {
    Completed,
    Diverged { t: f64, reason: String },
    /// The Euler-angle controller hit its kinematic singularity.
    Singular { t: f64 },
}

impl EpisodeStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, EpisodeStatus::Completed)
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub controller: ControllerKind,
    pub telemetry: Vec<TelemetryRecord>,
    pub status: EpisodeStatus,
    pub final_state: SystemState,
    pub final_adaptive: AdaptiveState,
    /// `∫ ‖ω_be‖ dt`, rad.
    pub traversed_rotation: f64,
    /// Whether every `K̂_δ` entry was nondecreasing at every step.
    pub k_delta_monotone: bool,
    /// Number of disturbance samples that were checked against their bound.
    pub disturbance_checks: usize,
}

impl EpisodeOutcome {
    pub fn energy(&self) -> f64 {
        energy_metric(&self.telemetry)
    }

    pub fn torque_integral(&self) -> f64 {
        torque_integral(&self.telemetry)
    }

    pub fn peak_u_pre(&self) -> f64 {
        metrics::peak(&self.telemetry, |r| r.u_pre_sat_norm)
    }

    pub fn final_record(&self) -> Option<&TelemetryRecord> {
        self.telemetry.last()
    }
}

fn axis_distance(err: &TrackingError) -> f64 {
    if err.omega_be.norm() < AXIS_RATE_FLOOR {
        return f64::NAN;
    }
    match geodesic_axis(&err.q_be) {
        Ok(axis) => instantaneous_axis_distance(&err.omega_be, &axis).unwrap_or(f64::NAN),
        Err(_) => f64::NAN,
    }
}

struct Command {
    u: GeneralizedForce,
    diag: Option<SlidingDiagnostics>,
}

fn evaluate(
    controller: &Controller,
    pair: &ModelPair,
    state: &SystemState,
    sample: &crate::reference::ReferenceSample,
    adaptive: &AdaptiveState,
) -> Result<Command> {
    let (m0, c0) = dynamics_terms(&pair.nominal, state)?;
    Ok(match controller {
        Controller::Ntsmc(g) => {
            let (u, d) = control_with_terms(&m0, &c0, state, sample, g, adaptive)?;
            Command { u, diag: Some(d) }
        }
        Controller::Euler(g) => {
            let (u, d) = euler_ntsmc_control_with_terms(&m0, &c0, state, sample, g, adaptive)?;
            Command { u, diag: Some(d) }
        }
        Controller::Pd(g) => Command { u: pd_control_with_terms(&m0, &c0, state, sample, g)?, diag: None },
    })
}

fn with_time(e: Error, t: f64) -> Error {
    match e {
        Error::NonFinite { what, .. } => Error::NonFinite { what, t },
        other => other,
    }
}

/// Runs one closed-loop episode from `initial` over `config.horizon`.
///
/// Configuration and dimension errors, and disturbance-bound violations, are
/// returned as `Err`. Numerical divergence and the Euler-angle singularity end
/// the episode early with the telemetry recorded so far.
pub fn run_episode(
    pair: &ModelPair,
    controller: &Controller,
    reference: &Reference,
    initial: &SystemState,
    disturbance: &Disturbance,
    config: &EpisodeConfig,
) -> Result<EpisodeOutcome> {
    config.validate("episode")?;
    let n = pair.truth.dof();
    if pair.nominal.dof() != n || reference.dof() != n || initial.dof() != n {
        return Err(Error::Dimension { what: "episode joint count", expected: n, got: initial.dof() });
    }
    if disturbance.gamma1.len() != 6 + n {
        return Err(Error::Dimension { what: "disturbance channels", expected: 6 + n, got: disturbance.gamma1.len() });
    }
    if let Controller::Ntsmc(g) | Controller::Euler(g) = controller {
        g.validate("gains")?;
        if g.dof() != n {
            return Err(Error::Dimension { what: "controller gains", expected: n, got: g.dof() });
        }
    }
    if let Controller::Pd(g) = controller {
        g.validate("pd_gains", n)?;
    }

    let steps = config.steps();
    let dt = config.dt;
    let mut state = initial.clone();
    let mut adaptive = controller.initial_adaptive(n);
    let mut telemetry = Vec::with_capacity(steps + 1);
    let mut status = EpisodeStatus::Completed;
    let mut traversed = 0.0;
    let mut prev_rate: Option<f64> = None;
    let mut monotone = true;
    let mut checks = 0;

    for k in 0..=steps {
        let t = k as f64 * dt;
        let sample = reference.sample(t);
        let err = TrackingError::new(&state, &sample);
        let rate = err.omega_be.norm();
        if let Some(r0) = prev_rate {
            traversed += 0.5 * dt * (r0 + rate);
        }
        prev_rate = Some(rate);

        let cmd = match evaluate(controller, pair, &state, &sample, &adaptive) {
            Ok(c) => c,
            Err(Error::EulerSingularity { .. }) => {
                status = EpisodeStatus::Singular { t };
                break;
            }
            Err(e @ (Error::NonFinite { .. } | Error::SingularMass | Error::Attitude(_))) => {
                status = EpisodeStatus::Diverged { t, reason: with_time(e, t).to_string() };
                break;
            }
            Err(e) => return Err(e),
        };
        let applied = saturate(&cmd.u, &config.limits);

        let (ee_p, ee_q) = end_effector_pose(&pair.truth, &state)?;
        let (ee_pd, ee_qd) = end_effector_pose(&pair.nominal, &sample.to_state())?;
        let diag = cmd.diag.as_ref();
        telemetry.push(TelemetryRecord {
            t,
            position_error_norm: (state.p_b - sample.p_bd).norm(),
            attitude_error_norm: err.q_be.angle(),
            joint_error_norm: (&state.q - &sample.q_d).norm(),
            ee_position_error_norm: (ee_p - ee_pd).norm(),
            ee_attitude_error_norm: error_quaternion(&ee_q, &ee_qd).angle(),
            s_norm: diag.map_or(0.0, |d| d.s.norm()),
            delta_s_norm: diag.map_or(0.0, |d| d.delta_s.norm()),
            u_pre_sat_norm: cmd.u.norm(),
            u_act_norm: applied.norm(),
            torque_norm: applied.tau_b.norm(),
            k_delta_trace: adaptive.trace(),
            axis_distance: axis_distance(&err),
        });
        if k == steps {
            break;
        }

        let xdot_sq = state.velocity().norm_squared();
        if let Some(d) = diag {
            let next = adaptive_update(&adaptive, d, xdot_sq, controller_gains(controller), dt);
            monotone &= next.k_delta_hat.iter().zip(adaptive.k_delta_hat.iter()).all(|(a, b)| a >= b);
            adaptive = next;
        }
        let delta = disturbance.sample(t, xdot_sq)?;
        if delta.is_some() {
            checks += 1;
        }
        match step_with_disturbance(&pair.truth, &state, &applied, delta.as_ref(), dt) {
            Ok(next) if next.is_finite() && next.velocity().norm() <= config.divergence_speed => state = next,
            Ok(_) => {
                status = EpisodeStatus::Diverged { t: t + dt, reason: "state left the admissible range".into() };
                break;
            }
            Err(e @ (Error::NonFinite { .. } | Error::SingularMass)) => {
                status = EpisodeStatus::Diverged { t: t + dt, reason: with_time(e, t + dt).to_string() };
                break;
            }
            Err(e) => return Err(e),
        }
    }

    Ok(EpisodeOutcome {
        controller: controller.kind(),
        telemetry,
        status,
        final_state: state,
        final_adaptive: adaptive,
        traversed_rotation: traversed,
        k_delta_monotone: monotone,
        disturbance_checks: checks,
    })
}

fn controller_gains(c: &Controller) -> &ControllerGains {
    match c {
        Controller::Ntsmc(g) | Controller::Euler(g) => g,
        Controller::Pd(_) => unreachable!("PD has no sliding diagnostics"),
    }
}
