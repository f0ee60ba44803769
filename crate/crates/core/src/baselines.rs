//! Comparison controllers: feedback-linearizing PD and an NTSMC whose
//! attitude surface is built on xyz Euler angles of the error rotation.
//!
//! The Euler-angle controller keeps the translational/joint surface and the
//! reaching law of [`crate::ntsmc`] and replaces `s2` by
//! `β⁻¹ Θ̇^{q/p} + ½ Θ`, where `Θ` are the xyz angles of `R(q_be)` and
//! `ω_be = W(Θ) Θ̇`. The half-angle weighting makes both attitude surfaces
//! coincide to first order at small errors.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::attitude::{abs_pow, euler_xyz_from_matrix, vec_pow};
use crate::dynamics::{dynamics_terms, GeneralizedForce, SystemState};
use crate::error::{Error, Result};
use crate::kinematics::SpacecraftModel;
use crate::ntsmc::{
    assemble_s, boundary_layer, reaching_acceleration, signed_attitude_error, surface_s1, AdaptiveState,
    ControllerGains, Diagonal, SlidingDiagnostics, TrackingError,
};
use crate::reference::ReferenceSample;

/// Pitch distance from ±π/2 treated as the Euler-angle singularity.
pub const EULER_SINGULARITY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdGains {
    pub kp_b: Diagonal,
    pub kv_b: Diagonal,
    pub kq_eps: Diagonal,
    pub kw_b: Diagonal,
    pub kq: Diagonal,
    pub kqdot: Diagonal,
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            kp_b: Diagonal::Uniform(0.5),
            kv_b: Diagonal::Uniform(0.25),
            kq_eps: Diagonal::Uniform(0.5),
            kw_b: Diagonal::Uniform(0.25),
            kq: Diagonal::Uniform(1.0),
            kqdot: Diagonal::Uniform(0.5),
        }
    }
}

impl PdGains {
    /// Stiffness and damping diagonals over `[translation, rotation, joints]`.
    pub fn resolve(&self, n: usize) -> (DVector<f64>, DVector<f64>) {
        let stack = |a: &Diagonal, b: &Diagonal, c: &Diagonal| {
            let mut v = DVector::zeros(6 + n);
            v.rows_mut(0, 3).copy_from(&a.resolve(3));
            v.rows_mut(3, 3).copy_from(&b.resolve(3));
            v.rows_mut(6, n).copy_from(&c.resolve(n));
            v
        };
        (stack(&self.kp_b, &self.kq_eps, &self.kq), stack(&self.kv_b, &self.kw_b, &self.kqdot))
    }

    pub fn validate(&self, prefix: &str, n: usize) -> Result<()> {
        let (kp, kv) = self.resolve(n);
        if kp.iter().chain(kv.iter()).any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::invalid(prefix, "PD gains must be positive"));
        }
        Ok(())
    }
}

/// `u = M0 (ẍ_d - Kv ė - Kp e) + C0` with the attitude error `sgn₊(η_be) ε_be`.
pub fn pd_control_with_terms(
    m0: &DMatrix<f64>,
    c0: &DVector<f64>,
    state: &SystemState,
    reference: &ReferenceSample,
    gains: &PdGains,
) -> Result<GeneralizedForce> {
    let n = state.dof();
    let err = TrackingError::new(state, reference);
    let pos = assemble_s(&err.e, &signed_attitude_error(&err.q_be));
    let vel = assemble_s(&err.edot, &err.omega_be);
    let (kp, kv) = gains.resolve(n);
    let acc = reference.acceleration() - kv.component_mul(&vel) - kp.component_mul(&pos);
    GeneralizedForce::from_vector(&(m0 * acc + c0))
}

pub fn pd_control(
    nominal: &SpacecraftModel,
    state: &SystemState,
    reference: &ReferenceSample,
    gains: &PdGains,
) -> Result<GeneralizedForce> {
    let (m0, c0) = dynamics_terms(nominal, state)?;
    pd_control_with_terms(&m0, &c0, state, reference, gains)
}

/// Maps xyz Euler-angle rates to the (inertial) angular velocity of
/// `R = Rx(φ) Ry(θ) Rz(ψ)`.
pub fn euler_rate_matrix(angles: &Vector3<f64>) -> Matrix3<f64> {
    let (sf, cf) = angles.x.sin_cos();
    let (st, ct) = angles.y.sin_cos();
    Matrix3::new(1.0, 0.0, st, 0.0, cf, -sf * ct, 0.0, sf, cf * ct)
}

/// Time derivative of [`euler_rate_matrix`].
pub fn euler_rate_matrix_dot(angles: &Vector3<f64>, rates: &Vector3<f64>) -> Matrix3<f64> {
    let (sf, cf) = angles.x.sin_cos();
    let (st, ct) = angles.y.sin_cos();
    let (df, dt) = (rates.x, rates.y);
    Matrix3::new(
        0.0,
        0.0,
        ct * dt,
        0.0,
        -sf * df,
        -cf * ct * df + sf * st * dt,
        0.0,
        cf * df,
        -sf * ct * df - cf * st * dt,
    )
}

/// Euler angles of the error rotation and their rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerError {
    pub angles: Vector3<f64>,
    pub rates: Vector3<f64>,
    pub w: Matrix3<f64>,
    pub w_dot: Matrix3<f64>,
}

impl EulerError {
    pub fn new(err: &TrackingError) -> Result<Self> {
        let angles = euler_xyz_from_matrix(&err.q_be.to_rotation_matrix());
        if (angles.y.abs() - std::f64::consts::FRAC_PI_2).abs() < EULER_SINGULARITY_TOL {
            return Err(Error::EulerSingularity { pitch: angles.y, tol: EULER_SINGULARITY_TOL });
        }
        let w = euler_rate_matrix(&angles);
        let rates = w.lu().solve(&err.omega_be).ok_or(Error::EulerSingularity {
            pitch: angles.y,
            tol: EULER_SINGULARITY_TOL,
        })?;
        Ok(Self { angles, rates, w, w_dot: euler_rate_matrix_dot(&angles, &rates) })
    }
}

/// Commanded generalized acceleration of the Euler-angle controller, excluding
/// the reference feed-forward.
pub fn euler_corrective_acceleration(
    err: &TrackingError,
    xdot_norm_sq: f64,
    gains: &ControllerGains,
    adaptive: &AdaptiveState,
) -> Result<(DVector<f64>, SlidingDiagnostics)> {
    gains.check_dof(err.e.len() - 3)?;
    let eu = EulerError::new(err)?;
    let r = gains.ratio();
    let beta = gains.gamma2;
    let s1 = surface_s1(&err.e, &err.edot, gains);
    let s2 = vec_pow(&eu.rates, r)? / beta + eu.angles * 0.5;
    let s = assemble_s(&s1, &s2);
    let delta_s = boundary_layer(&s, gains.boundary_layer);
    let w1 = abs_pow(&err.edot, r - 1.0)?.component_div(&gains.gamma1);
    let w2 = abs_pow(&eu.rates, r - 1.0)? / beta;
    let weights = assemble_s(&w1, &w2);
    let xi = weights.component_mul(&delta_s);
    let diag = SlidingDiagnostics { s1, s2, s, delta_s, weights, xi };

    let scale = gains.p as f64 / gains.q as f64;
    let a1 = vec_pow(&err.edot, 2.0 - r)?.component_mul(&gains.gamma1);
    let a2 = vec_pow(&eu.rates, 2.0 - r)? * (0.5 * beta);
    // acceleration in [ë; Θ̈] coordinates
    let mut acc = reaching_acceleration(&diag, xdot_norm_sq, gains, adaptive)? - assemble_s(&a1, &a2) * scale;
    let theta_dd: Vector3<f64> = acc.fixed_rows::<3>(3).into_owned();
    let omega_dot = eu.w * theta_dd + eu.w_dot * eu.rates;
    acc.fixed_rows_mut::<3>(3).copy_from(&omega_dot);
    Ok((acc, diag))
}

pub fn euler_ntsmc_control_with_terms(
    m0: &DMatrix<f64>,
    c0: &DVector<f64>,
    state: &SystemState,
    reference: &ReferenceSample,
    gains: &ControllerGains,
    adaptive: &AdaptiveState,
) -> Result<(GeneralizedForce, SlidingDiagnostics)> {
    let err = TrackingError::new(state, reference);
    let xdot = state.velocity();
    let (corr, diag) = euler_corrective_acceleration(&err, xdot.norm_squared(), gains, adaptive)?;
    let u = m0 * (reference.acceleration() + corr) + c0;
    if !u.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite { what: "Euler controller output", t: f64::NAN });
    }
    Ok((GeneralizedForce::from_vector(&u)?, diag))
}

pub fn euler_ntsmc_control(
    nominal: &SpacecraftModel,
    state: &SystemState,
    reference: &ReferenceSample,
    gains: &ControllerGains,
    adaptive: &AdaptiveState,
) -> Result<(GeneralizedForce, SlidingDiagnostics)> {
    let (m0, c0) = dynamics_terms(nominal, state)?;
    euler_ntsmc_control_with_terms(&m0, &c0, state, reference, gains, adaptive)
}
