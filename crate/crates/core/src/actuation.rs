//! Per-channel actuator saturation.

use serde::{Deserialize, Serialize};

use crate::dynamics::GeneralizedForce;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorLimits {
    /// Thruster force per base axis, N.
    pub base_force_max: f64,
    /// Aggregate reaction-wheel torque per base axis, N·m.
    pub base_torque_max: f64,
    /// Motor torque per joint, N·m.
    pub joint_torque_max: f64,
}

impl Default for ActuatorLimits {
    fn default() -> Self {
        // four 0.5 N·m wheels, 10 N thrusters, 10 N·m joint motors
        Self { base_force_max: 10.0, base_torque_max: 2.0, joint_torque_max: 10.0 }
    }
}

impl ActuatorLimits {
    /// Ideal actuators: `u_act = u_c`.
    pub fn unlimited() -> Self {
        Self { base_force_max: f64::INFINITY, base_torque_max: f64::INFINITY, joint_torque_max: f64::INFINITY }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [
            ("base_force_max", self.base_force_max),
            ("base_torque_max", self.base_torque_max),
            ("joint_torque_max", self.joint_torque_max),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("{prefix}.{name}"), "must be positive or inf"));
            }
        }
        Ok(())
    }
}

/// Component-wise clamp of the commanded generalized force.
pub fn saturate(u: &GeneralizedForce, limits: &ActuatorLimits) -> GeneralizedForce {
    let clamp = |x: f64, m: f64| x.clamp(-m, m);
    GeneralizedForce {
        f_b: u.f_b.map(|x| clamp(x, limits.base_force_max)),
        tau_b: u.tau_b.map(|x| clamp(x, limits.base_torque_max)),
        tau_joints: u.tau_joints.map(|x| clamp(x, limits.joint_torque_max)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DVector, Vector3};
    use proptest::prelude::*;

    #[test]
    fn inside_limits_is_unchanged() {
        let u = GeneralizedForce {
            f_b: Vector3::new(1.0, -2.0, 3.0),
            tau_b: Vector3::new(0.5, -1.5, 0.0),
            tau_joints: DVector::from_element(7, -9.0),
        };
        assert_eq!(saturate(&u, &ActuatorLimits::default()), u);
    }

    #[test]
    fn joint_torque_is_clamped_at_ten() {
        let mut u = GeneralizedForce::zeros(2);
        u.tau_joints[0] = 25.0;
        u.tau_joints[1] = -25.0;
        let s = saturate(&u, &ActuatorLimits::default());
        assert_eq!(s.tau_joints.as_slice(), &[10.0, -10.0]);
    }

    #[test]
    fn unlimited_is_identity() {
        let mut u = GeneralizedForce::zeros(1);
        u.tau_b.x = 1e9;
        assert_eq!(saturate(&u, &ActuatorLimits::unlimited()), u);
    }

    proptest! {
        #[test]
        fn clamp_is_bounded_and_idempotent(v in prop::collection::vec(-100.0f64..100.0, 13)) {
            let u = GeneralizedForce::from_vector(&DVector::from_vec(v)).unwrap();
            let l = ActuatorLimits::default();
            let s = saturate(&u, &l);
            prop_assert_eq!(saturate(&s, &l), s.clone());
            prop_assert!(s.f_b.amax() <= l.base_force_max);
            prop_assert!(s.tau_b.amax() <= l.base_torque_max);
            prop_assert!(s.tau_joints.amax() <= l.joint_torque_max);
            for (a, b) in u.to_vector().iter().zip(s.to_vector().iter()) {
                prop_assert!(a * b >= 0.0);
            }
        }
    }
}
