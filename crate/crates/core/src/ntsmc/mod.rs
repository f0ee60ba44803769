//! Adaptive non-singular terminal sliding-mode controller with a
//! quaternion attitude surface.
//!
//! Channel ordering everywhere is the one of `ẍ`: translation (3), rotation
//! (3), joints (n). The translational/joint surface `s1` lives in
//! `[translation; joints]` and the attitude surface `s2` in rotation; `P`
//! interleaves them.

pub mod disturbance;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::attitude::{
    abs_pow, abs_pow_scalar, epsilon_dot, error_quaternion, sgn_plus_scalar, signed_pow, vec_pow,
    UnitQuaternion,
};
use crate::dynamics::{dynamics_terms, GeneralizedForce, SystemState};
use crate::error::{Error, Result};
use crate::kinematics::SpacecraftModel;
use crate::reference::ReferenceSample;

/// `ξ` below this norm drops the `K1 ξ/‖ξ‖²` term for the step.
pub const XI_GUARD: f64 = 1e-9;

/// Entries of the `K2` row of the published parameter table.
pub const TABLE_K2: [f64; 14] = [0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.2, 0.2, 0.6, 0.6, 0.6, 0.6];

/// A diagonal gain given either as one value for every channel or as entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Diagonal {
    Uniform(f64),
    Entries(Vec<f64>),
}

impl Diagonal {
    /// Entries for `len` channels. Lists longer than `len` are truncated and
    /// shorter ones are padded with their last entry.
    pub fn resolve(&self, len: usize) -> DVector<f64> {
        match self {
            Diagonal::Uniform(v) => DVector::from_element(len, *v),
            Diagonal::Entries(e) if e.is_empty() => DVector::zeros(len),
            Diagonal::Entries(e) => DVector::from_fn(len, |i, _| e[i.min(e.len() - 1)]),
        }
    }
}

/// Serializable gain set; see [`ControllerGains`] for the resolved form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsConfig {
    pub p: u32,
    pub q: u32,
    pub p1: u32,
    pub q1: u32,
    pub p2: u32,
    pub q2: u32,
    pub gamma1: Diagonal,
    pub gamma2: f64,
    pub k1: Diagonal,
    pub k2: Diagonal,
    pub boundary_layer: f64,
    pub k_delta0: f64,
    pub adaptation_rate: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self {
            p: 9,
            q: 11,
            p1: 5,
            q1: 9,
            p2: 7,
            q2: 9,
            gamma1: Diagonal::Uniform(0.1),
            gamma2: 0.1,
            k1: Diagonal::Uniform(1e-2),
            k2: Diagonal::Entries(TABLE_K2.to_vec()),
            boundary_layer: 1e-3,
            k_delta0: 1e-4,
            adaptation_rate: 1e-3,
        }
    }
}

impl GainsConfig {
    pub fn euler_default() -> Self {
        Self { k1: Diagonal::Uniform(1e-3), ..Self::default() }
    }

    pub fn resolve(&self, n: usize) -> ControllerGains {
        ControllerGains {
            p: self.p,
            q: self.q,
            p1: self.p1,
            q1: self.q1,
            p2: self.p2,
            q2: self.q2,
            gamma1: self.gamma1.resolve(3 + n),
            gamma2: self.gamma2,
            k1: self.k1.resolve(6 + n),
            k2: self.k2.resolve(6 + n),
            boundary_layer: self.boundary_layer,
            k_delta0: self.k_delta0,
            adaptation_rate: self.adaptation_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub p: u32,
    pub q: u32,
    pub p1: u32,
    pub q1: u32,
    pub p2: u32,
    pub q2: u32,
    /// Diagonal of `Γ1`, `3+n` entries.
    pub gamma1: DVector<f64>,
    /// `Γ2 = γ2 E`.
    pub gamma2: f64,
    /// Diagonal of `K1`, `6+n` entries.
    pub k1: DVector<f64>,
    /// Diagonal of `K2`, `6+n` entries.
    pub k2: DVector<f64>,
    /// `Φ`.
    pub boundary_layer: f64,
    /// `K̂_δ(0)`.
    pub k_delta0: f64,
    /// `φ`.
    pub adaptation_rate: f64,
}

impl ControllerGains {
    pub fn paper_default(n: usize) -> Self {
        GainsConfig::default().resolve(n)
    }

    /// Parameter row of the Euler-angle comparison controller: identical
    /// exponents, `K2`, boundary layer and adaptation, with `k1 = 1e-3`.
    pub fn euler_default(n: usize) -> Self {
        GainsConfig::euler_default().resolve(n)
    }

    pub fn dof(&self) -> usize {
        self.gamma1.len().saturating_sub(3)
    }

    /// `q/p`.
    pub fn ratio(&self) -> f64 {
        self.q as f64 / self.p as f64
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let odd = |v: u32| v % 2 == 1;
        let bad = |field: &str, why: &str| Err(Error::invalid(format!("{prefix}.{field}"), why));
        if !(odd(self.p) && odd(self.q)) {
            return bad("p", "p and q must be positive odd integers");
        }
        let r = self.ratio();
        if !(r > 1.0 && r < 2.0) {
            return bad("q", &format!("q/p = {}/{} must lie in (1, 2)", self.q, self.p));
        }
        if self.p1 == 0 || self.q1 == 0 {
            return bad("p1", "p1 and q1 must be positive");
        }
        let r1 = self.q1 as f64 / self.p1 as f64;
        if !(r1 > 1.0 && r1 < 2.0) {
            return bad("q1", &format!("q1/p1 = {}/{} must lie in (1, 2)", self.q1, self.p1));
        }
        if !(odd(self.p2) && odd(self.q2)) {
            return bad("p2", "p2 and q2 must be positive odd integers");
        }
        if self.p2 >= self.q2 {
            return bad("q2", "p2 < q2 is required");
        }
        for (name, v) in [("gamma1", &self.gamma1), ("k1", &self.k1), ("k2", &self.k2)] {
            if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return bad(name, "diagonal entries must be positive");
            }
        }
        for (name, v) in [
            ("gamma2", self.gamma2),
            ("boundary_layer", self.boundary_layer),
            ("adaptation_rate", self.adaptation_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name, "must be positive");
            }
        }
        if !(self.k_delta0 >= 0.0 && self.k_delta0.is_finite()) {
            return bad("k_delta0", "must be non-negative");
        }
        Ok(())
    }

    pub(crate) fn check_dof(&self, n: usize) -> Result<()> {
        if self.gamma1.len() != 3 + n || self.k1.len() != 6 + n || self.k2.len() != 6 + n {
            return Err(Error::Dimension { what: "controller gains", expected: 6 + n, got: self.k1.len() });
        }
        Ok(())
    }
}

/// Running estimate `K̂_δ` of the disturbance-bound gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveState {
    pub k_delta_hat: DVector<f64>,
}

impl AdaptiveState {
    pub fn new(n: usize, initial: f64) -> Self {
        Self { k_delta_hat: DVector::from_element(6 + n, initial) }
    }

    pub fn from_gains(gains: &ControllerGains) -> Self {
        Self::new(gains.dof(), gains.k_delta0)
    }

    pub fn trace(&self) -> f64 {
        self.k_delta_hat.sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlidingDiagnostics {
    pub s1: DVector<f64>,
    pub s2: Vector3<f64>,
    pub s: DVector<f64>,
    pub delta_s: DVector<f64>,
    /// `P [Γ1⁻¹|ė|^{q/p-1}; Γ2⁻¹|ω_be|^{q/p-1}]`, the non-negative scaling of `ξ`.
    pub weights: DVector<f64>,
    pub xi: DVector<f64>,
}

/// Tracking errors w.r.t. a reference sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingError {
    /// `[p_b - p_bd; q - q_d]`.
    pub e: DVector<f64>,
    /// `[v_b - v_bd; q̇ - q̇_d]`.
    pub edot: DVector<f64>,
    pub q_be: UnitQuaternion,
    pub omega_be: Vector3<f64>,
}

impl TrackingError {
    pub fn new(state: &SystemState, reference: &ReferenceSample) -> Self {
        let n = state.dof();
        let mut e = DVector::zeros(3 + n);
        let mut edot = DVector::zeros(3 + n);
        e.fixed_rows_mut::<3>(0).copy_from(&(state.p_b - reference.p_bd));
        e.rows_mut(3, n).copy_from(&(&state.q - &reference.q_d));
        edot.fixed_rows_mut::<3>(0).copy_from(&(state.v_b - reference.v_bd));
        edot.rows_mut(3, n).copy_from(&(&state.qdot - &reference.qdot_d));
        Self {
            e,
            edot,
            q_be: error_quaternion(&state.q_b, &reference.q_bd),
            omega_be: state.omega_b - reference.omega_bd,
        }
    }
}

/// `s1 = Γ1⁻¹ ė^{q/p} + e`.
pub fn surface_s1(e: &DVector<f64>, edot: &DVector<f64>, gains: &ControllerGains) -> DVector<f64> {
    let r = gains.ratio();
    DVector::from_fn(e.len(), |i, _| signed_pow(edot[i], r) / gains.gamma1[i] + e[i])
}

/// `s2 = Γ2⁻¹ ω_be^{q/p} + sgn₊(η_be) ε_be`.
pub fn surface_s2(q_be: &UnitQuaternion, omega_be: &Vector3<f64>, gains: &ControllerGains) -> Vector3<f64> {
    let r = gains.ratio();
    omega_be.map(|w| signed_pow(w, r) / gains.gamma2) + signed_attitude_error(q_be)
}

/// `P [s1; s2]` with `s1 = [translation; joints]`.
pub fn assemble_s(s1: &DVector<f64>, s2: &Vector3<f64>) -> DVector<f64> {
    let n = s1.len() - 3;
    let mut s = DVector::zeros(6 + n);
    s.fixed_rows_mut::<3>(0).copy_from(&s1.fixed_rows::<3>(0));
    s.fixed_rows_mut::<3>(3).copy_from(s2);
    s.rows_mut(6, n).copy_from(&s1.rows(3, n));
    s
}

/// Inverse of [`assemble_s`].
pub fn split_s(s: &DVector<f64>) -> (DVector<f64>, Vector3<f64>) {
    let n = s.len() - 6;
    let mut s1 = DVector::zeros(3 + n);
    s1.fixed_rows_mut::<3>(0).copy_from(&s.fixed_rows::<3>(0));
    s1.rows_mut(3, n).copy_from(&s.rows(6, n));
    (s1, s.fixed_rows::<3>(3).into_owned())
}

/// The permutation `P` as a matrix.
pub fn permutation(n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(6 + n, 6 + n);
    for i in 0..3 {
        p[(i, i)] = 1.0;
        p[(3 + i, 3 + n + i)] = 1.0;
    }
    for j in 0..n {
        p[(6 + j, 3 + j)] = 1.0;
    }
    p
}

/// `sat(x)` clamped to `[-1, 1]`.
pub fn sat(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// `Δs = s - Φ sat(s/Φ)`.
pub fn boundary_layer(s: &DVector<f64>, phi: f64) -> DVector<f64> {
    // written without the division so the inside of the layer is exactly zero
    s.map(|v| if v.abs() <= phi { 0.0 } else { v - phi.copysign(v) })
}

/// Evaluates the sliding variables for the given tracking error.
pub fn diagnostics(err: &TrackingError, gains: &ControllerGains) -> Result<SlidingDiagnostics> {
    let r = gains.ratio();
    let s1 = surface_s1(&err.e, &err.edot, gains);
    let s2 = surface_s2(&err.q_be, &err.omega_be, gains);
    let s = assemble_s(&s1, &s2);
    let delta_s = boundary_layer(&s, gains.boundary_layer);
    let w1 = abs_pow(&err.edot, r - 1.0)?.component_div(&gains.gamma1);
    let w2 = abs_pow(&err.omega_be, r - 1.0)? / gains.gamma2;
    let weights = assemble_s(&w1, &w2);
    let xi = weights.component_mul(&delta_s);
    Ok(SlidingDiagnostics { s1, s2, s, delta_s, weights, xi })
}

/// Commanded generalized acceleration excluding the reference feed-forward:
/// the surface-keeping term `u2` and the reaching/robust term `u3`, both
/// before multiplication by `M0`.
pub fn corrective_acceleration(
    err: &TrackingError,
    diag: &SlidingDiagnostics,
    xdot_norm_sq: f64,
    gains: &ControllerGains,
    adaptive: &AdaptiveState,
) -> Result<DVector<f64>> {
    let r = gains.ratio();
    let phi = gains.boundary_layer;
    let scale = gains.p as f64 / gains.q as f64;
    gains.check_dof(err.e.len() - 3)?;
    // u2: keeps ṡ = 0 along the nominal dynamics
    let a1 = vec_pow(&err.edot, 2.0 - r)?.component_mul(&gains.gamma1);
    let eps_dot = epsilon_dot(&err.q_be, &err.omega_be);
    let sg = sgn_plus_scalar(err.q_be.eta);
    let a2 = Vector3::from_fn(|i, _| {
        let w = err.omega_be[i];
        let ratio = abs_pow_scalar(w, r - 1.0) / abs_pow_scalar(w, 2.0 * r - 2.0).max(phi);
        sg * gains.gamma2 * ratio * eps_dot[i]
    });
    Ok(reaching_acceleration(diag, xdot_norm_sq, gains, adaptive)? - assemble_s(&a1, &a2) * scale)
}

/// The `u3` part before multiplication by `M0`: adaptive switching on
/// `sat(s/Φ)`, the `K1 ξ/‖ξ‖²` reaching term and the `K2 Δs^{p2/q2}` term.
pub fn reaching_acceleration(
    diag: &SlidingDiagnostics,
    xdot_norm_sq: f64,
    gains: &ControllerGains,
    adaptive: &AdaptiveState,
) -> Result<DVector<f64>> {
    let phi = gains.boundary_layer;
    let boost = 1.0 + xdot_norm_sq;
    let mut acc = -diag.s.map(|v| sat(v / phi)).component_mul(&adaptive.k_delta_hat) * boost;
    let xi_norm = diag.xi.norm();
    if xi_norm >= XI_GUARD {
        let ds_norm = diag.delta_s.norm();
        let mag = ds_norm.powf(2.0 * gains.p1 as f64 / gains.q1 as f64) / (xi_norm * xi_norm);
        acc -= diag.xi.component_mul(&gains.k1) * mag;
    }
    let ds_pow = vec_pow(&diag.delta_s, gains.p2 as f64 / gains.q2 as f64)?;
    acc -= ds_pow.component_mul(&gains.k2);
    Ok(acc)
}

/// Full control law given precomputed nominal `M0` and `C0`.
pub fn control_with_terms(
    m0: &DMatrix<f64>,
    c0: &DVector<f64>,
    state: &SystemState,
    reference: &ReferenceSample,
    gains: &ControllerGains,
    adaptive: &AdaptiveState,
) -> Result<(GeneralizedForce, SlidingDiagnostics)> {
    gains.check_dof(state.dof())?;
    let err = TrackingError::new(state, reference);
    let diag = diagnostics(&err, gains)?;
    let xdot = state.velocity();
    let acc = reference.acceleration() + corrective_acceleration(&err, &diag, xdot.norm_squared(), gains, adaptive)?;
    let u = m0 * acc + c0;
    if !u.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite { what: "control output", t: f64::NAN });
    }
    Ok((GeneralizedForce::from_vector(&u)?, diag))
}

/// `u_c = u1 + u2 + u3` evaluated on the nominal model.
pub fn control(
    nominal: &SpacecraftModel,
    state: &SystemState,
    reference: &ReferenceSample,
    gains: &ControllerGains,
    adaptive: &AdaptiveState,
) -> Result<(GeneralizedForce, SlidingDiagnostics)> {
    let (m0, c0) = dynamics_terms(nominal, state)?;
    control_with_terms(&m0, &c0, state, reference, gains, adaptive)
}

/// Explicit Euler step of the adaptive law. Entries never decrease.
pub fn adaptive_update(
    adaptive: &AdaptiveState,
    diag: &SlidingDiagnostics,
    xdot_norm_sq: f64,
    gains: &ControllerGains,
    dt: f64,
) -> AdaptiveState {
    let rate = diag.weights.component_mul(&diag.delta_s.abs()) * (gains.adaptation_rate * (1.0 + xdot_norm_sq) * dt);
    AdaptiveState { k_delta_hat: &adaptive.k_delta_hat + rate }
}

/// Time for one channel of `ė = -Γ^{p/q} e^{p/q}` to reach zero from `e`.
pub fn settling_time_s1(e_at_reach: f64, gamma: f64, p: u32, q: u32) -> f64 {
    let a = p as f64 / q as f64;
    e_at_reach.abs().powf(1.0 - a) / (gamma.powf(a) * (1.0 - a))
}

/// Upper bound on the time for `‖Δs‖` to reach zero from `‖Δs(0)‖`, using the
/// smallest `K1` entry.
///
/// From `V̇ ≤ -(q/p) K1 2^{p1/q1} V^{p1/q1}` with `V = ‖Δs‖²/2`, the finite-time
/// lemma gives `V(0)^{1-p1/q1} / (λ (1 - p1/q1))`, i.e. an exponent of
/// `2(q1-p1)/q1` on `‖Δs(0)‖/√2`.
pub fn reach_time_bound(delta_s0_norm: f64, gains: &ControllerGains) -> f64 {
    let (p1, q1) = (gains.p1 as f64, gains.q1 as f64);
    let k1 = gains.k1.min();
    let lambda = gains.ratio() * k1 * 2f64.powf(p1 / q1);
    let v0 = 0.5 * delta_s0_norm * delta_s0_norm;
    v0.powf(1.0 - p1 / q1) / (lambda * (1.0 - p1 / q1))
}

/// Attitude error on the surface `s2 = 0` (constant desired attitude):
/// `ω_be = -(Γ2 sgn₊(η) ε)^{p/q}`, integrated with RK4 until the error angle
/// drops below `angle_tol`. Returns the elapsed time.
pub fn attitude_sliding_time(q_be0: &UnitQuaternion, gains: &ControllerGains, angle_tol: f64, dt: f64) -> f64 {
    let a = 1.0 / gains.ratio();
    let field = |q: &nalgebra::Vector4<f64>| {
        let u = UnitQuaternion::from_vector4(q);
        let w = (u.eps * (-gains.gamma2 * sgn_plus_scalar(u.eta))).map(|x| signed_pow(x, a));
        u.derivative(&w)
    };
    let mut q = q_be0.as_vector4();
    let mut t = 0.0;
    while UnitQuaternion::from_vector4(&q).angle() > angle_tol && t < 1e6 {
        let k1 = field(&q);
        let k2 = field(&(q + k1 * (0.5 * dt)));
        let k3 = field(&(q + k2 * (0.5 * dt)));
        let k4 = field(&(q + k3 * dt));
        q += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        q /= q.norm();
        t += dt;
    }
    t
}

/// `sgn₊(η_be) ε_be`, the attitude error used by the surfaces and the PD law.
pub fn signed_attitude_error(q_be: &UnitQuaternion) -> Vector3<f64> {
    q_be.eps * sgn_plus_scalar(q_be.eta)
}
