//! Unit quaternions, the component-wise power functions used by the sliding
//! surfaces, and geodesic-rotation metrics.
//!
//! Quaternions are stored scalar-first: `q = (eta, eps)`. The Hamilton product
//! is used throughout and `R(q)` maps body-frame vectors into the inertial
//! frame, so `R(a ⊗ b) = R(a) R(b)`. Angular velocities handled here are
//! expressed in the inertial frame, which gives `q̇ = ½ (0, ω) ⊗ q` and
//! `ω = 2 G(q) q̇`.

use nalgebra::{allocator::Allocator, DefaultAllocator, Dim, Matrix3, Matrix3x4, OVector, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this norm of the vector part the rotation axis is undefined.
pub const AXIS_EPSILON: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttitudeError {
    #[error("rotation axis undefined: |eps| = {0:e} is below {AXIS_EPSILON:e}")]
    UndefinedAxis(f64),
    #[error("angular velocity too small to define an instantaneous axis: |w| = {0:e}")]
    UndefinedRate(f64),
    #[error("power {alpha} is not defined for a zero component")]
    PowerDomain { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion {
    pub eta: f64,
    pub eps: Vector3<f64>,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self { eta: 1.0, eps: Vector3::zeros() }
    }

    /// Builds a quaternion from raw components and normalizes it.
    pub fn new_normalize(eta: f64, eps: Vector3<f64>) -> Self {
        let n = (eta * eta + eps.norm_squared()).sqrt();
        Self { eta: eta / n, eps: eps / n }
    }

    pub fn from_vector4(v: &Vector4<f64>) -> Self {
        Self::new_normalize(v[0], Vector3::new(v[1], v[2], v[3]))
    }

    pub fn as_vector4(&self) -> Vector4<f64> {
        Vector4::new(self.eta, self.eps.x, self.eps.y, self.eps.z)
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::identity();
        }
        let half = 0.5 * angle;
        Self { eta: half.cos(), eps: axis / n * half.sin() }
    }

    /// Quaternion of `Rx(x) Ry(y) Rz(z)`.
    pub fn from_euler_xyz(angles: &Vector3<f64>) -> Self {
        let qx = Self::from_axis_angle(&Vector3::x(), angles.x);
        let qy = Self::from_axis_angle(&Vector3::y(), angles.y);
        let qz = Self::from_axis_angle(&Vector3::z(), angles.z);
        hamilton(&hamilton(&qx, &qy), &qz)
    }

    pub fn from_rotation_matrix(r: &Matrix3<f64>) -> Self {
        // Shepperd's method: pick the largest diagonal term for stability.
        let tr = r.trace();
        let (eta, x, y, z);
        if tr > r[(0, 0)] && tr > r[(1, 1)] && tr > r[(2, 2)] {
            let s = (1.0 + tr).sqrt() * 2.0;
            eta = 0.25 * s;
            x = (r[(2, 1)] - r[(1, 2)]) / s;
            y = (r[(0, 2)] - r[(2, 0)]) / s;
            z = (r[(1, 0)] - r[(0, 1)]) / s;
        } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
            let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
            eta = (r[(2, 1)] - r[(1, 2)]) / s;
            x = 0.25 * s;
            y = (r[(0, 1)] + r[(1, 0)]) / s;
            z = (r[(0, 2)] + r[(2, 0)]) / s;
        } else if r[(1, 1)] > r[(2, 2)] {
            let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
            eta = (r[(0, 2)] - r[(2, 0)]) / s;
            x = (r[(0, 1)] + r[(1, 0)]) / s;
            y = 0.25 * s;
            z = (r[(1, 2)] + r[(2, 1)]) / s;
        } else {
            let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
            eta = (r[(1, 0)] - r[(0, 1)]) / s;
            x = (r[(0, 2)] + r[(2, 0)]) / s;
            y = (r[(1, 2)] + r[(2, 1)]) / s;
            z = 0.25 * s;
        }
        Self::new_normalize(eta, Vector3::new(x, y, z))
    }

    pub fn conjugate(&self) -> Self {
        Self { eta: self.eta, eps: -self.eps }
    }

    pub fn negated(&self) -> Self {
        Self { eta: -self.eta, eps: -self.eps }
    }

    pub fn norm(&self) -> f64 {
        (self.eta * self.eta + self.eps.norm_squared()).sqrt()
    }

    pub fn normalized(&self) -> Self {
        Self::new_normalize(self.eta, self.eps)
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let e = self.eta;
        let v = self.eps;
        let vx = skew(&v);
        Matrix3::identity() * (e * e - v.norm_squared()) + v * v.transpose() * 2.0 + vx * (2.0 * e)
    }

    /// Rotates a vector by this quaternion (`R(q) v`).
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let t = self.eps.cross(v) * 2.0;
        v + t * self.eta + self.eps.cross(&t)
    }

    /// Rotation angle in `[0, π]`, taking the short way around.
    pub fn angle(&self) -> f64 {
        2.0 * self.eta.abs().min(1.0).acos()
    }

    /// Rotation angle in `[0, 2π)` of this particular representative.
    pub fn raw_angle(&self) -> f64 {
        2.0 * self.eps.norm().atan2(self.eta).rem_euclid(std::f64::consts::PI)
    }

    /// xyz Euler triplet such that `R = Rx(x) Ry(y) Rz(z)`; `y ∈ [-π/2, π/2]`.
    pub fn to_euler_xyz(&self) -> Vector3<f64> {
        euler_xyz_from_matrix(&self.to_rotation_matrix())
    }

    /// `q̇ = ½ (0, ω) ⊗ q` for an inertial angular velocity `ω`.
    pub fn derivative(&self, omega: &Vector3<f64>) -> Vector4<f64> {
        let deta = -0.5 * omega.dot(&self.eps);
        let deps = 0.5 * (omega * self.eta + omega.cross(&self.eps));
        Vector4::new(deta, deps.x, deps.y, deps.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    pub axis: Vector3<f64>,
    pub angle: f64,
}

impl AxisAngle {
    /// Axis-angle of the given representative, `angle ∈ [0, 2π)`.
    pub fn from_quaternion(q: &UnitQuaternion) -> Self {
        let n = q.eps.norm();
        if n <= 1e-12 {
            return Self { axis: Vector3::x(), angle: 0.0 };
        }
        let angle = 2.0 * n.atan2(q.eta);
        Self { axis: q.eps / n, angle }
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn euler_xyz_from_matrix(r: &Matrix3<f64>) -> Vector3<f64> {
    let sy = r[(0, 2)].clamp(-1.0, 1.0);
    let y = sy.asin();
    let x = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let z = (-r[(0, 1)]).atan2(r[(0, 0)]);
    Vector3::new(x, y, z)
}

pub fn hamilton(a: &UnitQuaternion, b: &UnitQuaternion) -> UnitQuaternion {
    let eta = a.eta * b.eta - a.eps.dot(&b.eps);
    let eps = b.eps * a.eta + a.eps * b.eta + a.eps.cross(&b.eps);
    let n2 = eta * eta + eps.norm_squared();
    if (n2 - 1.0).abs() > 1e-9 {
        UnitQuaternion::new_normalize(eta, eps)
    } else {
        UnitQuaternion { eta, eps }
    }
}

/// `q_be = q_b ⊗ q_bd⁻¹`, so that `R(q_be) = R(q_b) R(q_bd)ᵀ`.
pub fn error_quaternion(q_b: &UnitQuaternion, q_bd: &UnitQuaternion) -> UnitQuaternion {
    hamilton(q_b, &q_bd.conjugate())
}

/// `G(q) = [-ε  ηE + [ε]×]`, so that `ω = 2 G(q) q̇` and `G Gᵀ = E`.
pub fn g_matrix(q: &UnitQuaternion) -> Matrix3x4<f64> {
    let mut g = Matrix3x4::zeros();
    g.fixed_view_mut::<3, 1>(0, 0).copy_from(&(-q.eps));
    let block = Matrix3::identity() * q.eta + skew(&q.eps);
    g.fixed_view_mut::<3, 3>(0, 1).copy_from(&block);
    g
}

/// Time derivative of the vector part of the error quaternion,
/// `½ (η ω - [ε]× ω)`. Exact when the desired attitude is held constant.
pub fn epsilon_dot(q_be: &UnitQuaternion, omega_be: &Vector3<f64>) -> Vector3<f64> {
    0.5 * (omega_be * q_be.eta - q_be.eps.cross(omega_be))
}

/// `|x|^α sgn(x)`.
#[inline]
pub fn signed_pow(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(alpha).copysign(x)
    }
}

/// `|x|^α`, with `0^α = 0` for `α > 0`.
#[inline]
pub fn abs_pow_scalar(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(alpha)
    }
}

fn check_power_domain<D: Dim>(v: &OVector<f64, D>, alpha: f64) -> Result<(), AttitudeError>
where
    DefaultAllocator: Allocator<D>,
{
    if alpha <= 0.0 && v.iter().any(|x| *x == 0.0) {
        return Err(AttitudeError::PowerDomain { alpha });
    }
    Ok(())
}

/// Component-wise signed power `v^α = [|v_i|^α sgn(v_i)]`.
pub fn vec_pow<D: Dim>(v: &OVector<f64, D>, alpha: f64) -> Result<OVector<f64, D>, AttitudeError>
where
    DefaultAllocator: Allocator<D>,
{
    check_power_domain(v, alpha)?;
    Ok(v.map(|x| signed_pow(x, alpha)))
}

/// Component-wise magnitude power `[|v_i|^α]`.
pub fn abs_pow<D: Dim>(v: &OVector<f64, D>, alpha: f64) -> Result<OVector<f64, D>, AttitudeError>
where
    DefaultAllocator: Allocator<D>,
{
    check_power_domain(v, alpha)?;
    Ok(v.map(|x| abs_pow_scalar(x, alpha)))
}

/// -1 where `x < 0`, +1 otherwise (including zero).
#[inline]
pub fn sgn_plus_scalar(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn sgn_plus<D: Dim>(x: &OVector<f64, D>) -> OVector<f64, D>
where
    DefaultAllocator: Allocator<D>,
{
    x.map(sgn_plus_scalar)
}

/// Axis of the shortest rotation encoded by `q_be`.
pub fn geodesic_axis(q_be: &UnitQuaternion) -> Result<Vector3<f64>, AttitudeError> {
    let n = q_be.eps.norm();
    if n <= AXIS_EPSILON {
        return Err(AttitudeError::UndefinedAxis(n));
    }
    Ok(q_be.eps / n * sgn_plus_scalar(q_be.eta))
}

/// Distance between the instantaneous rotation axis `ω/|ω|` and a geodesic
/// axis, taking the sign of `ω` that minimizes it. Lies in `[0, √2]`.
pub fn instantaneous_axis_distance(
    omega_b: &Vector3<f64>,
    geo_axis: &Vector3<f64>,
) -> Result<f64, AttitudeError> {
    let n = omega_b.norm();
    if n <= AXIS_EPSILON {
        return Err(AttitudeError::UndefinedRate(n));
    }
    let w = omega_b / n;
    Ok((w - geo_axis).norm().min((w + geo_axis).norm()))
}
