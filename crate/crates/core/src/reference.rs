//! Reference trajectories for the base pose and the joint angles.
//!
//! The diagonal scenario moves the base along the (1,1,1) diagonal with the arm
//! held, then holds the base and moves the end effector along the same
//! diagonal. Both segments use quintic rest-to-rest time scaling. The end
//! effector segment is solved in joint space by damped least squares on a grid
//! of the path parameter and interpolated with a natural cubic spline.

use nalgebra::{DVector, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::attitude::{error_quaternion, hamilton, sgn_plus_scalar, UnitQuaternion};
use crate::dynamics::SystemState;
use crate::error::{Error, Result};
use crate::kinematics::{end_effector_jacobian, ChainState, SpacecraftModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSample {
    pub p_bd: Vector3<f64>,
    pub v_bd: Vector3<f64>,
    pub a_bd: Vector3<f64>,
    pub q_bd: UnitQuaternion,
    pub omega_bd: Vector3<f64>,
    pub omegadot_bd: Vector3<f64>,
    pub q_d: DVector<f64>,
    pub qdot_d: DVector<f64>,
    pub qddot_d: DVector<f64>,
}

impl ReferenceSample {
    /// Desired state (pose and velocity).
    pub fn to_state(&self) -> SystemState {
        SystemState {
            p_b: self.p_bd,
            q_b: self.q_bd,
            q: self.q_d.clone(),
            v_b: self.v_bd,
            omega_b: self.omega_bd,
            qdot: self.qdot_d.clone(),
        }
    }

    /// `[a_bd, ω̇_bd, q̈_d]`.
    pub fn acceleration(&self) -> DVector<f64> {
        let n = self.q_d.len();
        let mut a = DVector::zeros(6 + n);
        a.fixed_rows_mut::<3>(0).copy_from(&self.a_bd);
        a.fixed_rows_mut::<3>(3).copy_from(&self.omegadot_bd);
        a.rows_mut(6, n).copy_from(&self.qddot_d);
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Regulation to the initial pose.
    Hold,
    /// Base diagonal followed by end-effector diagonal.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub base_position: [f64; 3],
    /// xyz Euler angles of the desired base attitude, rad.
    pub base_attitude_xyz: [f64; 3],
    /// Initial joint configuration; must be away from arm singularities.
    pub initial_joints: Vec<f64>,
    pub base_displacement: f64,
    pub ee_displacement: f64,
    pub base_duration: f64,
    pub ee_duration: f64,
    pub ik_waypoints: usize,
    /// xyz Euler misalignment of the initial base attitude w.r.t. the reference, rad.
    pub misalignment_xyz: [f64; 3],
    /// Initial base position offset w.r.t. the reference, m.
    pub position_offset: [f64; 3],
    /// Initial joint offsets w.r.t. the reference, rad.
    pub joint_offset: Vec<f64>,
}

pub const DEFAULT_INITIAL_JOINTS: [f64; 7] = [0.0, 0.6, 0.0, -1.4, 0.0, 0.9, 0.0];

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::Diagonal,
            base_position: [0.0; 3],
            base_attitude_xyz: [0.0; 3],
            initial_joints: DEFAULT_INITIAL_JOINTS.to_vec(),
            base_displacement: 0.5,
            ee_displacement: 0.3,
            base_duration: 27.0,
            ee_duration: 30.0,
            ik_waypoints: 301,
            misalignment_xyz: [0.0; 3],
            position_offset: [0.0; 3],
            joint_offset: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self, prefix: &str, n: usize) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if self.initial_joints.len() != n {
            return Err(Error::invalid(
                format!("{prefix}.initial_joints"),
                format!("expected {n} entries, got {}", self.initial_joints.len()),
            ));
        }
        if !self.joint_offset.is_empty() && self.joint_offset.len() != n {
            return Err(Error::invalid(format!("{prefix}.joint_offset"), format!("expected 0 or {n} entries")));
        }
        for (name, v) in [
            ("base_position", &self.base_position[..]),
            ("base_attitude_xyz", &self.base_attitude_xyz[..]),
            ("initial_joints", &self.initial_joints[..]),
            ("misalignment_xyz", &self.misalignment_xyz[..]),
            ("position_offset", &self.position_offset[..]),
            ("joint_offset", &self.joint_offset[..]),
        ] {
            if !finite(v) {
                return Err(Error::invalid(format!("{prefix}.{name}"), "non-finite entry"));
            }
        }
        for (name, v) in [("base_duration", self.base_duration), ("ee_duration", self.ee_duration)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{prefix}.{name}"), "must be positive"));
            }
        }
        for (name, v) in [("base_displacement", self.base_displacement), ("ee_displacement", self.ee_displacement)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{prefix}.{name}"), "must be finite"));
            }
        }
        if self.ik_waypoints < 3 {
            return Err(Error::invalid(format!("{prefix}.ik_waypoints"), "need at least 3 waypoints"));
        }
        Ok(())
    }

    /// End of the moving part of the reference.
    pub fn motion_end(&self) -> f64 {
        match self.kind {
            ScenarioKind::Hold => 0.0,
            ScenarioKind::Diagonal => self.base_duration + self.ee_duration,
        }
    }
}

/// Quintic rest-to-rest time scaling: `σ, σ̇, σ̈` at `t ∈ [0, T]`, clamped outside.
pub fn quintic(t: f64, duration: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if t >= duration {
        return (1.0, 0.0, 0.0);
    }
    let s = t / duration;
    let s2 = s * s;
    let s3 = s2 * s;
    let pos = s3 * (10.0 - 15.0 * s + 6.0 * s2);
    let vel = 30.0 * s2 * (1.0 - s) * (1.0 - s) / duration;
    let acc = 60.0 * s * (1.0 - 3.0 * s + 2.0 * s2) / (duration * duration);
    (pos, vel, acc)
}

/// Natural cubic spline on a uniform grid over `[0, 1]`, vector valued.
#[derive(Debug, Clone)]
struct UniformSpline {
    values: Vec<DVector<f64>>,
    second: Vec<DVector<f64>>,
}

impl UniformSpline {
    fn new(values: Vec<DVector<f64>>) -> Self {
        let n = values.len();
        let h = 1.0 / (n - 1) as f64;
        let dim = values[0].len();
        let mut second = vec![DVector::zeros(dim); n];
        // Thomas algorithm on  m_{i-1} + 4 m_i + m_{i+1} = 6 (y_{i-1} - 2y_i + y_{i+1}) / h²
        let interior = n - 2;
        if interior > 0 {
            let mut c = vec![0.0; interior];
            let mut d = vec![DVector::zeros(dim); interior];
            for i in 0..interior {
                let rhs = (&values[i] - &values[i + 1] * 2.0 + &values[i + 2]) * (6.0 / (h * h));
                if i == 0 {
                    c[0] = 0.25;
                    d[0] = rhs / 4.0;
                } else {
                    let denom = 4.0 - c[i - 1];
                    c[i] = 1.0 / denom;
                    d[i] = (rhs - &d[i - 1]) / denom;
                }
            }
            second[interior] = d[interior - 1].clone();
            for i in (0..interior - 1).rev() {
                second[i + 1] = &d[i] - &second[i + 2] * c[i];
            }
        }
        Self { values, second }
    }

    /// Value and first two derivatives at `x ∈ [0, 1]`.
    fn eval(&self, x: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let n = self.values.len();
        let h = 1.0 / (n - 1) as f64;
        let x = x.clamp(0.0, 1.0);
        let i = ((x / h).floor() as usize).min(n - 2);
        let a = ((i + 1) as f64 * h - x) / h;
        let b = 1.0 - a;
        let (y0, y1) = (&self.values[i], &self.values[i + 1]);
        let (m0, m1) = (&self.second[i], &self.second[i + 1]);
        let val = y0 * a + y1 * b + (m0 * (a * a * a - a) + m1 * (b * b * b - b)) * (h * h / 6.0);
        let der = (y1 - y0) / h + (m1 * (3.0 * b * b - 1.0) - m0 * (3.0 * a * a - 1.0)) * (h / 6.0);
        let sec = m0 * a + m1 * b;
        (val, der, sec)
    }
}

/// Damped-least-squares pose IK with the base frozen. Returns the joint
/// vector reaching `target` from `seed`.
pub fn solve_pose_ik(
    model: &SpacecraftModel,
    base: &SystemState,
    target_pos: &Vector3<f64>,
    target_att: &UnitQuaternion,
    seed: &DVector<f64>,
) -> Result<DVector<f64>> {
    let mut q = seed.clone();
    let lambda2 = 1e-6;
    for _ in 0..200 {
        let chain = ChainState::new(model, &base.p_b, &base.q_b, q.as_slice())?;
        let n = chain.dof();
        let pos = chain.origins[n];
        let att = UnitQuaternion::from_rotation_matrix(&chain.rotations[n]);
        let qe = error_quaternion(target_att, &att);
        let rot_err = qe.eps * (2.0 * sgn_plus_scalar(qe.eta));
        let err = Vector6::new(
            target_pos.x - pos.x,
            target_pos.y - pos.y,
            target_pos.z - pos.z,
            rot_err.x,
            rot_err.y,
            rot_err.z,
        );
        if err.norm() < 1e-12 {
            return Ok(q);
        }
        let (jv, jw) = end_effector_jacobian(&chain);
        let mut j = nalgebra::DMatrix::zeros(6, n);
        j.rows_mut(0, 3).copy_from(&jv);
        j.rows_mut(3, 3).copy_from(&jw);
        let jjt: Matrix6<f64> = Matrix6::from_iterator((&j * j.transpose()).iter().copied()) + Matrix6::identity() * lambda2;
        let y = jjt.cholesky().ok_or_else(|| Error::Planning("singular IK system".into()))?.solve(&err);
        q += j.transpose() * DVector::from_column_slice(y.as_slice());
    }
    Err(Error::Planning(format!("pose IK did not converge toward {target_pos:?}")))
}

#[derive(Debug, Clone)]
pub struct Reference {
    p0: Vector3<f64>,
    q_bd: UnitQuaternion,
    q0: DVector<f64>,
    base_step: Vector3<f64>,
    base_duration: f64,
    ee_duration: f64,
    joint_path: Option<UniformSpline>,
}

fn diagonal() -> Vector3<f64> {
    Vector3::new(1.0, 1.0, 1.0) / 3f64.sqrt()
}

impl Reference {
    /// Constant reference at the given pose.
    pub fn hold(p: Vector3<f64>, q_b: UnitQuaternion, joints: DVector<f64>) -> Self {
        Self {
            p0: p,
            q_bd: q_b,
            q0: joints,
            base_step: Vector3::zeros(),
            base_duration: 1.0,
            ee_duration: 1.0,
            joint_path: None,
        }
    }

    pub fn build(scenario: &ScenarioConfig, model: &SpacecraftModel) -> Result<Self> {
        scenario.validate("scenario", model.dof())?;
        let p0 = Vector3::from(scenario.base_position);
        let q_bd = UnitQuaternion::from_euler_xyz(&Vector3::from(scenario.base_attitude_xyz));
        let q0 = DVector::from_vec(scenario.initial_joints.clone());
        let mut r = Self::hold(p0, q_bd, q0.clone());
        if scenario.kind == ScenarioKind::Hold {
            return Ok(r);
        }
        r.base_step = diagonal() * scenario.base_displacement;
        r.base_duration = scenario.base_duration;
        r.ee_duration = scenario.ee_duration;
        if model.dof() == 0 {
            return Ok(r);
        }
        let mut base = SystemState::rest(model.dof());
        base.p_b = p0 + r.base_step;
        base.q_b = q_bd;
        let chain = ChainState::new(model, &base.p_b, &base.q_b, q0.as_slice())?;
        let n = model.dof();
        let ee0 = chain.origins[n];
        let att = UnitQuaternion::from_rotation_matrix(&chain.rotations[n]);
        let count = scenario.ik_waypoints;
        let mut waypoints = Vec::with_capacity(count);
        let mut q = q0.clone();
        for i in 0..count {
            let sigma = i as f64 / (count - 1) as f64;
            let target = ee0 + diagonal() * (scenario.ee_displacement * sigma);
            q = solve_pose_ik(model, &base, &target, &att, &q)?;
            waypoints.push(q.clone());
        }
        let max_jump = waypoints.windows(2).map(|w| (&w[1] - &w[0]).amax()).fold(0.0, f64::max);
        if max_jump > 0.05 {
            return Err(Error::Planning(format!(
                "joint path is discontinuous (step {max_jump:.3} rad between waypoints)"
            )));
        }
        r.joint_path = Some(UniformSpline::new(waypoints));
        Ok(r)
    }

    pub fn dof(&self) -> usize {
        self.q0.len()
    }

    pub fn duration(&self) -> f64 {
        if self.base_step == Vector3::zeros() && self.joint_path.is_none() {
            0.0
        } else {
            self.base_duration + self.ee_duration
        }
    }

    pub fn sample(&self, t: f64) -> ReferenceSample {
        let n = self.dof();
        let (s, sd, sdd) = quintic(t, self.base_duration);
        let mut out = ReferenceSample {
            p_bd: self.p0 + self.base_step * s,
            v_bd: self.base_step * sd,
            a_bd: self.base_step * sdd,
            q_bd: self.q_bd,
            omega_bd: Vector3::zeros(),
            omegadot_bd: Vector3::zeros(),
            q_d: self.q0.clone(),
            qdot_d: DVector::zeros(n),
            qddot_d: DVector::zeros(n),
        };
        if let Some(path) = &self.joint_path {
            if t > self.base_duration {
                let (s, sd, sdd) = quintic(t - self.base_duration, self.ee_duration);
                let (val, der, sec) = path.eval(s);
                out.qdot_d = &der * sd;
                out.qddot_d = sec * (sd * sd) + der * sdd;
                out.q_d = val;
            }
        }
        out
    }

    /// Initial state on the reference at `t = 0`, with the base attitude
    /// pre-rotated by the xyz Euler triplet so that `q_be(0) = q(euler)`.
    pub fn apply_misalignment(&self, euler_xyz: &Vector3<f64>) -> SystemState {
        let mut s = self.sample(0.0).to_state();
        s.q_b = hamilton(&UnitQuaternion::from_euler_xyz(euler_xyz), &s.q_b);
        s
    }

    /// Initial state with every offset of the scenario applied.
    pub fn initial_state(&self, scenario: &ScenarioConfig) -> SystemState {
        let mut s = self.apply_misalignment(&Vector3::from(scenario.misalignment_xyz));
        s.p_b += Vector3::from(scenario.position_offset);
        if !scenario.joint_offset.is_empty() {
            s.q += DVector::from_column_slice(&scenario.joint_offset);
        }
        s
    }
}
