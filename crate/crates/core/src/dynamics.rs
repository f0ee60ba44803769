//! Generalized inertia, Coriolis/centrifugal terms and time integration of the
//! free-flying system in the tangent coordinates `ẋ = [v_b, ω_b, q̇]`.
//!
//! `ω_b` is expressed in the inertial frame and `q̇_b = ½ (0, ω_b) ⊗ q_b`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::attitude::{g_matrix, skew, UnitQuaternion};
use crate::error::{Error, Result};
use crate::kinematics::{ChainState, LinkInertia, SpacecraftModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub p_b: Vector3<f64>,
    pub q_b: UnitQuaternion,
    pub q: DVector<f64>,
    pub v_b: Vector3<f64>,
    pub omega_b: Vector3<f64>,
    pub qdot: DVector<f64>,
}

impl SystemState {
    /// Base at the origin with identity attitude, arm at `q = 0`, at rest.
    pub fn rest(n: usize) -> Self {
        Self {
            p_b: Vector3::zeros(),
            q_b: UnitQuaternion::identity(),
            q: DVector::zeros(n),
            v_b: Vector3::zeros(),
            omega_b: Vector3::zeros(),
            qdot: DVector::zeros(n),
        }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    /// `ẋ = [v_b, ω_b, q̇]`.
    pub fn velocity(&self) -> DVector<f64> {
        let n = self.dof();
        let mut x = DVector::zeros(6 + n);
        x.fixed_rows_mut::<3>(0).copy_from(&self.v_b);
        x.fixed_rows_mut::<3>(3).copy_from(&self.omega_b);
        x.rows_mut(6, n).copy_from(&self.qdot);
        x
    }

    pub fn set_velocity(&mut self, xdot: &DVector<f64>) {
        let n = self.dof();
        self.v_b = xdot.fixed_rows::<3>(0).into_owned();
        self.omega_b = xdot.fixed_rows::<3>(3).into_owned();
        self.qdot.copy_from(&xdot.rows(6, n));
    }

    pub fn is_finite(&self) -> bool {
        self.p_b.iter().all(|x| x.is_finite())
            && self.q_b.as_vector4().iter().all(|x| x.is_finite())
            && self.q.iter().all(|x| x.is_finite())
            && self.v_b.iter().all(|x| x.is_finite())
            && self.omega_b.iter().all(|x| x.is_finite())
            && self.qdot.iter().all(|x| x.is_finite())
    }

    fn check_dims(&self, model: &SpacecraftModel) -> Result<()> {
        let n = model.dof();
        if self.q.len() != n {
            return Err(Error::Dimension { what: "joint vector", expected: n, got: self.q.len() });
        }
        if self.qdot.len() != n {
            return Err(Error::Dimension { what: "joint rate vector", expected: n, got: self.qdot.len() });
        }
        Ok(())
    }
}

/// `F = [f_b, τ_b, τ]`: base force and torque at the base CoM (inertial axes)
/// and joint torques.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedForce {
    pub f_b: Vector3<f64>,
    pub tau_b: Vector3<f64>,
    pub tau_joints: DVector<f64>,
}

impl GeneralizedForce {
    pub fn zeros(n: usize) -> Self {
        Self { f_b: Vector3::zeros(), tau_b: Vector3::zeros(), tau_joints: DVector::zeros(n) }
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        if v.len() < 6 {
            return Err(Error::Dimension { what: "generalized force", expected: 6, got: v.len() });
        }
        Ok(Self {
            f_b: v.fixed_rows::<3>(0).into_owned(),
            tau_b: v.fixed_rows::<3>(3).into_owned(),
            tau_joints: v.rows(6, v.len() - 6).into_owned(),
        })
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.tau_joints.len();
        let mut v = DVector::zeros(6 + n);
        v.fixed_rows_mut::<3>(0).copy_from(&self.f_b);
        v.fixed_rows_mut::<3>(3).copy_from(&self.tau_b);
        v.rows_mut(6, n).copy_from(&self.tau_joints);
        v
    }

    pub fn dof(&self) -> usize {
        self.tau_joints.len()
    }

    pub fn norm(&self) -> f64 {
        (self.f_b.norm_squared() + self.tau_b.norm_squared() + self.tau_joints.norm_squared()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

/// The plant (`truth`) and the controller's internal model (`nominal`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPair {
    pub truth: SpacecraftModel,
    pub nominal: SpacecraftModel,
}

impl ModelPair {
    pub fn new(truth: SpacecraftModel, nominal: SpacecraftModel) -> Result<Self> {
        if truth.dof() != nominal.dof() {
            return Err(Error::Dimension { what: "nominal model joints", expected: truth.dof(), got: nominal.dof() });
        }
        Ok(Self { truth, nominal })
    }

    pub fn exact(model: SpacecraftModel) -> Self {
        Self { nominal: model.clone(), truth: model }
    }
}

/// Inertial-frame geometry and mass data of every body for one configuration.
struct Bodies {
    chain: ChainState,
    links: Vec<LinkInertia>,
    /// Link CoMs, inertial.
    com: Vec<Vector3<f64>>,
    /// Link inertias about the CoM, inertial axes.
    inertia: Vec<Matrix3<f64>>,
    base_inertia: Matrix3<f64>,
}

impl Bodies {
    fn new(model: &SpacecraftModel, state: &SystemState) -> Result<Self> {
        state.check_dims(model)?;
        let chain = ChainState::from_state(model, state)?;
        let links = model.rigid_links();
        let mut com = Vec::with_capacity(links.len());
        let mut inertia = Vec::with_capacity(links.len());
        for (j, l) in links.iter().enumerate() {
            let r = &chain.rotations[j + 1];
            com.push(chain.point_on_link(j + 1, &l.com_offset));
            inertia.push(r * l.inertia_body * r.transpose());
        }
        let rb = &chain.base_rotation;
        let base_inertia = rb * model.base_inertia_body * rb.transpose();
        Ok(Self { chain, links, com, inertia, base_inertia })
    }

    fn mass_matrix(&self, base_mass: f64) -> DMatrix<f64> {
        let n = self.links.len();
        let mut m = DMatrix::zeros(6 + n, 6 + n);
        let mut m_tot = base_mass;
        let mut m_tr = Matrix3::zeros();
        let mut m_r = self.base_inertia;
        let mut jv = vec![Vector3::zeros(); n];
        let mut jw = vec![Vector3::zeros(); n];
        for j in 0..n {
            let mass = self.links[j].mass;
            let c = self.com[j];
            let i_j = &self.inertia[j];
            let p = c - self.chain.base_position;
            let px = skew(&p);
            m_tot += mass;
            m_tr -= px * mass;
            m_r += i_j - px * px * mass;
            for k in 0..=j {
                let z = self.chain.joint_axis(k + 1);
                jv[k] = z.cross(&(c - self.chain.origins[k]));
                jw[k] = z;
            }
            let mut iw = Vec::with_capacity(j + 1);
            for k in 0..=j {
                let mv = jv[k] * mass;
                let iwk = i_j * jw[k];
                // translation/joint and rotation/joint coupling
                let tm = mv;
                let rm = px * mv + iwk;
                for r in 0..3 {
                    m[(r, 6 + k)] += tm[r];
                    m[(3 + r, 6 + k)] += rm[r];
                }
                iw.push(iwk);
            }
            for a in 0..=j {
                for b in 0..=a {
                    let v = mass * jv[a].dot(&jv[b]) + jw[a].dot(&iw[b]);
                    m[(6 + a, 6 + b)] += v;
                }
            }
        }
        for r in 0..3 {
            m[(r, r)] = m_tot;
            for c in 0..3 {
                m[(r, 3 + c)] = m_tr[(r, c)];
                m[(3 + r, 3 + c)] = m_r[(r, c)];
            }
        }
        // fill the symmetric halves
        for r in 0..6 + n {
            for c in (r + 1)..6 + n {
                if r < 6 && c < 6 {
                    if r < 3 && c >= 3 {
                        m[(c, r)] = m[(r, c)];
                    }
                } else if r < 6 {
                    m[(c, r)] = m[(r, c)];
                } else {
                    m[(r, c)] = m[(c, r)];
                }
            }
        }
        m
    }

    /// Velocity-product terms from the bias (zero-acceleration) motion of every
    /// body, projected on the tangent coordinates.
    fn coriolis(&self, state: &SystemState) -> DVector<f64> {
        let n = self.links.len();
        let mut c = DVector::zeros(6 + n);
        let wb = state.omega_b;
        let pb = self.chain.base_position;
        let tau_base = wb.cross(&(self.base_inertia * wb));
        let mut rot = tau_base;
        let mut trans = Vector3::zeros();

        let mut omega = wb;
        let mut alpha = Vector3::zeros();
        let r0 = self.chain.origins[0] - pb;
        let mut acc_o = wb.cross(&wb.cross(&r0));
        // per-link wrench (force at CoM, torque) kept for the joint rows
        let mut force = Vec::with_capacity(n);
        let mut torque = Vec::with_capacity(n);
        for j in 0..n {
            let z = self.chain.joint_axis(j + 1);
            let qd = state.qdot[j];
            alpha += omega.cross(&z) * qd;
            omega += z * qd;
            let delta = self.chain.origins[j + 1] - self.chain.origins[j];
            acc_o += alpha.cross(&delta) + omega.cross(&omega.cross(&delta));
            let r = self.com[j] - self.chain.origins[j + 1];
            let acc_c = acc_o + alpha.cross(&r) + omega.cross(&omega.cross(&r));
            let f = acc_c * self.links[j].mass;
            let i_j = &self.inertia[j];
            let t = i_j * alpha + omega.cross(&(i_j * omega));
            trans += f;
            rot += (self.com[j] - pb).cross(&f) + t;
            force.push(f);
            torque.push(t);
        }
        // joint rows: Σ_{j ≥ k} J_v,jkᵀ f_j + J_w,jkᵀ τ_j
        for k in 0..n {
            let z = self.chain.joint_axis(k + 1);
            let o = self.chain.origins[k];
            let mut acc = 0.0;
            for j in k..n {
                acc += z.cross(&(self.com[j] - o)).dot(&force[j]) + z.dot(&torque[j]);
            }
            c[6 + k] = acc;
        }
        c.fixed_rows_mut::<3>(0).copy_from(&trans);
        c.fixed_rows_mut::<3>(3).copy_from(&rot);
        c
    }
}

/// Generalized inertia matrix `M(x̃)`, `(6+n)×(6+n)`.
pub fn mass_matrix(model: &SpacecraftModel, state: &SystemState) -> Result<DMatrix<f64>> {
    Ok(Bodies::new(model, state)?.mass_matrix(model.base_mass))
}

/// `H(q_b) = blockdiag(E, 2 G(q_b), E)`, mapping `d/dt [p_b, q_b, q]` to `ẋ`.
pub fn h_matrix(q_b: &UnitQuaternion, n: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(6 + n, 7 + n);
    for i in 0..3 {
        h[(i, i)] = 1.0;
    }
    let g = g_matrix(q_b) * 2.0;
    h.view_mut((3, 3), (3, 4)).copy_from(&g);
    for i in 0..n {
        h[(6 + i, 7 + i)] = 1.0;
    }
    h
}

/// Coriolis and centrifugal vector `C(ẋ, x̃)`.
pub fn coriolis_vector(model: &SpacecraftModel, state: &SystemState) -> Result<DVector<f64>> {
    Ok(Bodies::new(model, state)?.coriolis(state))
}

/// `M` and `C` sharing one kinematic pass.
pub fn dynamics_terms(model: &SpacecraftModel, state: &SystemState) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let bodies = Bodies::new(model, state)?;
    Ok((bodies.mass_matrix(model.base_mass), bodies.coriolis(state)))
}

/// Configuration displaced by `h` along the tangent direction `dir = [v, ω, q̇]`.
fn displaced(state: &SystemState, dir: &DVector<f64>, h: f64) -> SystemState {
    let n = state.dof();
    let mut s = state.clone();
    s.p_b += dir.fixed_rows::<3>(0) * h;
    let w: Vector3<f64> = dir.fixed_rows::<3>(3) * h;
    let angle = w.norm();
    if angle > 0.0 {
        let dq = UnitQuaternion::from_axis_angle(&(w / angle), angle);
        s.q_b = crate::attitude::hamilton(&dq, &state.q_b);
    }
    s.q += dir.rows(6, n) * h;
    s
}

/// `C` from the Lagrangian `K = ½ ẋᵀ M ẋ` by finite differences: `Ṁẋ − ∂K/∂x̃`
/// with the extra `−ω_b × (Mẋ)_rot` term of the non-holonomic attitude rates.
///
/// Much slower than [`coriolis_vector`]; kept as an independent check.
pub fn coriolis_vector_lagrangian(model: &SpacecraftModel, state: &SystemState) -> Result<DVector<f64>> {
    let n = model.dof();
    let xdot = state.velocity();
    let scale = 1.0 + state.q.amax().max(state.p_b.amax());
    let h = 1e-6 * scale;
    let m = mass_matrix(model, state)?;
    let mp = mass_matrix(model, &displaced(state, &xdot, h))?;
    let mm = mass_matrix(model, &displaced(state, &xdot, -h))?;
    let mdot_x = (mp - mm) * &xdot / (2.0 * h);
    let mut grad = DVector::zeros(6 + n);
    let kin = |s: &SystemState| -> Result<f64> { Ok(0.5 * xdot.dot(&(mass_matrix(model, s)? * &xdot))) };
    for i in 0..6 + n {
        let mut e = DVector::zeros(6 + n);
        e[i] = 1.0;
        grad[i] = (kin(&displaced(state, &e, h))? - kin(&displaced(state, &e, -h))?) / (2.0 * h);
    }
    let mut c = mdot_x - grad;
    let p_rot: Vector3<f64> = (m * &xdot).fixed_rows::<3>(3).into_owned();
    let corr = state.omega_b.cross(&p_rot);
    for r in 0..3 {
        c[3 + r] -= corr[r];
    }
    Ok(c)
}

fn solve_spd(m: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let chol = m.cholesky().ok_or(Error::SingularMass)?;
    Ok(chol.solve(&rhs))
}

/// `ẍ = M⁻¹(F − C)`.
pub fn forward_dynamics(model: &SpacecraftModel, state: &SystemState, force: &GeneralizedForce) -> Result<DVector<f64>> {
    if force.dof() != model.dof() {
        return Err(Error::Dimension { what: "joint torque vector", expected: model.dof(), got: force.dof() });
    }
    let (m, c) = dynamics_terms(model, state)?;
    solve_spd(m, force.to_vector() - c)
}

pub fn kinetic_energy(model: &SpacecraftModel, state: &SystemState) -> Result<f64> {
    let m = mass_matrix(model, state)?;
    let x = state.velocity();
    Ok(0.5 * x.dot(&(m * &x)))
}

/// Total linear momentum `m_tot v_com`.
pub fn linear_momentum(model: &SpacecraftModel, state: &SystemState) -> Result<Vector3<f64>> {
    let m = mass_matrix(model, state)?;
    Ok((m * state.velocity()).fixed_rows::<3>(0).into_owned())
}

struct Rate {
    p: Vector3<f64>,
    quat: Vector4<f64>,
    q: DVector<f64>,
    acc: DVector<f64>,
}

fn rate(
    model: &SpacecraftModel,
    s: &SystemState,
    force: &DVector<f64>,
    extra_acc: Option<&DVector<f64>>,
) -> Result<Rate> {
    let (m, c) = dynamics_terms(model, s)?;
    let mut acc = solve_spd(m, force - c)?;
    if let Some(d) = extra_acc {
        acc += d;
    }
    Ok(Rate { p: s.v_b, quat: s.q_b.derivative(&s.omega_b), q: s.qdot.clone(), acc })
}

fn advance(s: &SystemState, k: &Rate, h: f64) -> SystemState {
    let n = s.dof();
    let mut out = s.clone();
    out.p_b += k.p * h;
    out.q_b = UnitQuaternion::from_vector4(&(s.q_b.as_vector4() + k.quat * h));
    out.q += &k.q * h;
    out.v_b += k.acc.fixed_rows::<3>(0) * h;
    out.omega_b += k.acc.fixed_rows::<3>(3) * h;
    out.qdot += k.acc.rows(6, n) * h;
    out
}

/// One RK4 step with `force` held constant.
pub fn step(model: &SpacecraftModel, state: &SystemState, force: &GeneralizedForce, dt: f64) -> Result<SystemState> {
    step_with_disturbance(model, state, force, None, dt)
}

/// One RK4 step; `extra_acc` is an additive generalized acceleration held
/// constant over the step.
pub fn step_with_disturbance(
    model: &SpacecraftModel,
    state: &SystemState,
    force: &GeneralizedForce,
    extra_acc: Option<&DVector<f64>>,
    dt: f64,
) -> Result<SystemState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    state.check_dims(model)?;
    if force.dof() != model.dof() {
        return Err(Error::Dimension { what: "joint torque vector", expected: model.dof(), got: force.dof() });
    }
    let f = force.to_vector();
    let k1 = rate(model, state, &f, extra_acc)?;
    let k2 = rate(model, &advance(state, &k1, 0.5 * dt), &f, extra_acc)?;
    let k3 = rate(model, &advance(state, &k2, 0.5 * dt), &f, extra_acc)?;
    let k4 = rate(model, &advance(state, &k3, dt), &f, extra_acc)?;
    let n = state.dof();
    let w = dt / 6.0;
    let mut out = state.clone();
    out.p_b += (k1.p + k2.p * 2.0 + k3.p * 2.0 + k4.p) * w;
    out.q_b = UnitQuaternion::from_vector4(
        &(state.q_b.as_vector4() + (k1.quat + k2.quat * 2.0 + k3.quat * 2.0 + k4.quat) * w),
    );
    out.q += (&k1.q + &k2.q * 2.0 + &k3.q * 2.0 + &k4.q) * w;
    let acc = (&k1.acc + &k2.acc * 2.0 + &k3.acc * 2.0 + &k4.acc) * w;
    out.v_b += acc.fixed_rows::<3>(0);
    out.omega_b += acc.fixed_rows::<3>(3);
    out.qdot += acc.rows(6, n);
    if !out.is_finite() {
        return Err(Error::NonFinite { what: "state", t: f64::NAN });
    }
    Ok(out)
}
