//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DVector, Matrix3, Vector3};
use orbital_arm::attitude::UnitQuaternion;
use orbital_arm::dynamics::SystemState;
use orbital_arm::kinematics::{ChainState, SpacecraftModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> SystemState {
    let mut s = SystemState::rest(n);
    s.p_b = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
    s.q_b = UnitQuaternion::new_normalize(
        rng.random_range(-1.0..1.0),
        Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
    );
    s.q = DVector::from_fn(n, |_, _| rng.random_range(-3.1..3.1));
    s.v_b = Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5));
    s.omega_b = Vector3::from_fn(|_, _| rng.random_range(-0.2..0.2));
    s.qdot = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
    s
}

/// Inertial linear and angular velocity of every body (base first), built
/// from the frame origins and joint axes by rigid-body velocity propagation.
pub fn body_velocities(model: &SpacecraftModel, s: &SystemState) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let chain = ChainState::from_state(model, s).unwrap();
    let mut out = vec![(s.v_b, s.omega_b)];
    let links = model.rigid_links();
    for (j, l) in links.iter().enumerate() {
        let com = chain.origins[j + 1] + chain.rotations[j + 1] * l.com_offset;
        let mut v = s.v_b + s.omega_b.cross(&(com - s.p_b));
        let mut w = s.omega_b;
        for k in 0..=j {
            let z = chain.rotations[k].column(2).into_owned();
            v += z.cross(&(com - chain.origins[k])) * s.qdot[k];
            w += z * s.qdot[k];
        }
        out.push((v, w));
    }
    out
}

/// `(m, I_inertial, CoM)` of every body, base first.
pub fn body_inertias(model: &SpacecraftModel, s: &SystemState) -> Vec<(f64, Matrix3<f64>, Vector3<f64>)> {
    let chain = ChainState::from_state(model, s).unwrap();
    let rb = s.q_b.to_rotation_matrix();
    let mut out = vec![(model.base_mass, rb * model.base_inertia_body * rb.transpose(), s.p_b)];
    for (j, l) in model.rigid_links().iter().enumerate() {
        let r = chain.rotations[j + 1];
        out.push((l.mass, r * l.inertia_body * r.transpose(), chain.origins[j + 1] + r * l.com_offset));
    }
    out
}

pub fn kinetic_energy_oracle(model: &SpacecraftModel, s: &SystemState) -> f64 {
    body_inertias(model, s)
        .iter()
        .zip(body_velocities(model, s))
        .map(|((m, i, _), (v, w))| 0.5 * m * v.norm_squared() + 0.5 * w.dot(&(i * w)))
        .sum()
}

/// Total linear and angular momentum about the inertial origin.
pub fn momentum_oracle(model: &SpacecraftModel, s: &SystemState) -> (Vector3<f64>, Vector3<f64>) {
    let mut p = Vector3::zeros();
    let mut h = Vector3::zeros();
    for ((m, i, c), (v, w)) in body_inertias(model, s).iter().zip(body_velocities(model, s)) {
        p += v * *m;
        h += c.cross(&(v * *m)) + i * w;
    }
    (p, h)
}

/// Torque-free rigid body: body-frame Euler equations `I ω̇ = -ω × I ω`,
/// integrated with RK4 at `dt`. Returns body rates at every multiple of
/// `sample` seconds up to `horizon`.
pub fn euler_free_spin(inertia: &Matrix3<f64>, omega_body: Vector3<f64>, horizon: f64, dt: f64, sample: f64) -> Vec<Vector3<f64>> {
    let inv = inertia.try_inverse().unwrap();
    let f = |w: &Vector3<f64>| -(inv * w.cross(&(inertia * w)));
    let mut w = omega_body;
    let per = (sample / dt).round() as usize;
    let steps = (horizon / dt).round() as usize;
    let mut out = vec![w];
    for k in 1..=steps {
        let k1 = f(&w);
        let k2 = f(&(w + k1 * (0.5 * dt)));
        let k3 = f(&(w + k2 * (0.5 * dt)));
        let k4 = f(&(w + k3 * dt));
        w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if k % per == 0 {
            out.push(w);
        }
    }
    out
}

/// Angular velocity from a rotation derivative: `vee(Ṙ Rᵀ)`.
pub fn vee_of_rate(r_dot: &Matrix3<f64>, r: &Matrix3<f64>) -> Vector3<f64> {
    let w = r_dot * r.transpose();
    Vector3::new(0.5 * (w[(2, 1)] - w[(1, 2)]), 0.5 * (w[(0, 2)] - w[(2, 0)]), 0.5 * (w[(1, 0)] - w[(0, 1)]))
}

/// Largest deviation between the analytic fixed-base Jacobians (link CoMs and
/// end-effector frame) and central finite differences of forward kinematics.
pub fn jacobian_fd_error(model: &SpacecraftModel, s: &SystemState, h: f64) -> f64 {
    use orbital_arm::kinematics::{end_effector_jacobian, jacobians};
    let n = model.dof();
    let (jv, jw) = jacobians(model, s).unwrap();
    let (ev, ew) = end_effector_jacobian(&ChainState::from_state(model, s).unwrap());
    let chain0 = ChainState::from_state(model, s).unwrap();
    let com = |c: &ChainState, j: usize| c.origins[j + 1] + c.rotations[j + 1] * model.links[j].inertia.com_offset;
    let mut worst = 0.0_f64;
    for k in 0..n {
        let mut sp = s.clone();
        let mut sm = s.clone();
        sp.q[k] += h;
        sm.q[k] -= h;
        let cp = ChainState::from_state(model, &sp).unwrap();
        let cm = ChainState::from_state(model, &sm).unwrap();
        for j in 0..n {
            let v = (com(&cp, j) - com(&cm, j)) / (2.0 * h);
            let w = vee_of_rate(&((cp.rotations[j + 1] - cm.rotations[j + 1]) / (2.0 * h)), &chain0.rotations[j + 1]);
            worst = worst.max((v - jv[j].column(k)).amax()).max((w - jw[j].column(k)).amax());
        }
        let v = (cp.origins[n] - cm.origins[n]) / (2.0 * h);
        let w = vee_of_rate(&((cp.rotations[n] - cm.rotations[n]) / (2.0 * h)), &chain0.rotations[n]);
        worst = worst.max((v - ev.column(k)).amax()).max((w - ew.column(k)).amax());
    }
    worst
}
