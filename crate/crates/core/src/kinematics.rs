//! Spacecraft model description and the DH kinematics of the arm.
//!
//! The arm uses the standard (distal) Denavit-Hartenberg convention: joint `j`
//! rotates about the z axis of frame `j-1`, and link `j` is rigidly attached to
//! frame `j`. Frame 0 is fixed to the satellite body at [`MountPose`].
//! Everything returned from this module is expressed in the inertial frame.

use nalgebra::{Dyn, Matrix3, Matrix4, OMatrix, Vector3, U3};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::attitude::UnitQuaternion;
use crate::dynamics::SystemState;
use crate::error::{Error, Result};

pub type Jacobian = OMatrix<f64, U3, Dyn>;

const ALUMINIUM_DENSITY: f64 = 2700.0;
const LINK_OUTER_RADIUS: f64 = 0.0635;
const LINK_THICKNESS: f64 = 0.0135;
const JOINT_MOTOR_MASS: f64 = 0.5;
const END_EFFECTOR_MASS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DhRow {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
}

impl DhRow {
    /// Homogeneous transform `Rz(θ) Tz(d) Tx(a) Rx(α)` split into rotation and translation.
    pub fn transform(&self, joint: f64) -> (Matrix3<f64>, Vector3<f64>) {
        let theta = joint + self.theta_offset;
        let (st, ct) = theta.sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        let r = Matrix3::new(ct, -st * ca, st * sa, st, ct * ca, -ct * sa, 0.0, sa, ca);
        (r, Vector3::new(self.a * ct, self.a * st, self.d))
    }

    /// Origin of the previous frame expressed in this link's frame. Does not
    /// depend on the joint angle.
    pub fn previous_origin_local(&self) -> Vector3<f64> {
        let (sa, ca) = self.alpha.sin_cos();
        // -Rx(α)ᵀ (a x̂ + d ẑ)
        -Vector3::new(self.a, sa * self.d, ca * self.d)
    }

    fn is_finite(&self) -> bool {
        self.a.is_finite() && self.alpha.is_finite() && self.d.is_finite() && self.theta_offset.is_finite()
    }
}

/// Mass properties of a rigid body, in its own link frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkInertia {
    pub mass: f64,
    /// About the body CoM, link-frame axes.
    pub inertia_body: Matrix3<f64>,
    /// CoM position in the link frame.
    pub com_offset: Vector3<f64>,
}

impl LinkInertia {
    pub fn point_mass(mass: f64, at: Vector3<f64>) -> Self {
        Self { mass, inertia_body: Matrix3::zeros(), com_offset: at }
    }

    /// Thin-walled tube between two points of the link frame.
    pub fn hollow_cylinder(from: Vector3<f64>, to: Vector3<f64>, outer: f64, thickness: f64, density: f64) -> Self {
        let axis = to - from;
        let length = axis.norm();
        let inner = outer - thickness;
        let r2 = outer * outer + inner * inner;
        let mass = density * std::f64::consts::PI * (outer * outer - inner * inner) * length;
        let axial = 0.5 * mass * r2;
        let transverse = mass * (3.0 * r2 + length * length) / 12.0;
        let u = if length > 0.0 { axis / length } else { Vector3::z() };
        let uu = u * u.transpose();
        let inertia = (Matrix3::identity() - uu) * transverse + uu * axial;
        Self { mass, inertia_body: inertia, com_offset: (from + to) * 0.5 }
    }

    /// Rigid union of two bodies sharing a frame.
    pub fn combine(&self, other: &LinkInertia) -> LinkInertia {
        let mass = self.mass + other.mass;
        if mass <= 0.0 {
            return *self;
        }
        let com = (self.com_offset * self.mass + other.com_offset * other.mass) / mass;
        let shift = |b: &LinkInertia| {
            let d = b.com_offset - com;
            b.inertia_body + (Matrix3::identity() * d.norm_squared() - d * d.transpose()) * b.mass
        };
        LinkInertia { mass, inertia_body: shift(self) + shift(other), com_offset: com }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub dh: DhRow,
    pub inertia: LinkInertia,
}

/// Pose of DH frame 0 in the satellite body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MountPose {
    pub rotation: UnitQuaternion,
    pub offset: Vector3<f64>,
}

impl Default for MountPose {
    fn default() -> Self {
        // top face of the 3.1 m tall bus
        Self { rotation: UnitQuaternion::identity(), offset: Vector3::new(0.0, 0.0, 1.55) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpacecraftModel {
    pub base_mass: f64,
    pub base_inertia_body: Matrix3<f64>,
    pub links: Vec<Link>,
    pub arm_mount_pose: MountPose,
    /// Payload rigidly attached to the last link frame (a point mass by default).
    pub end_effector: LinkInertia,
}

/// Pose of a frame in inertial coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// DH table of the seven-joint arm.
pub fn paper_dh_table() -> Vec<DhRow> {
    let d = [0.3, 0.16, 1.15, -0.16, 1.15, -0.16, 0.4];
    let alpha = [FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2, 0.0];
    d.iter().zip(alpha).map(|(&d, alpha)| DhRow { a: 0.0, alpha, d, theta_offset: 0.0 }).collect()
}

/// Default inertial model of a link: aluminium tube along the DH segment plus
/// the joint motor at the proximal joint.
pub fn default_link_inertia(dh: &DhRow) -> LinkInertia {
    let from = dh.previous_origin_local();
    let tube = LinkInertia::hollow_cylinder(from, Vector3::zeros(), LINK_OUTER_RADIUS, LINK_THICKNESS, ALUMINIUM_DENSITY);
    tube.combine(&LinkInertia::point_mass(JOINT_MOTOR_MASS, from))
}

impl Default for SpacecraftModel {
    fn default() -> Self {
        let links = paper_dh_table()
            .into_iter()
            .map(|dh| Link { dh, inertia: default_link_inertia(&dh) })
            .collect();
        Self {
            base_mass: 1900.0,
            base_inertia_body: Matrix3::from_diagonal(&Vector3::new(13500.0, 2000.0, 2000.0)),
            links,
            arm_mount_pose: MountPose::default(),
            end_effector: LinkInertia::point_mass(END_EFFECTOR_MASS, Vector3::zeros()),
        }
    }
}

fn check_inertia(path: &str, inertia: &Matrix3<f64>, strict: bool, triangle: bool) -> Result<()> {
    if !inertia.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid(path, "non-finite entries"));
    }
    if (inertia - inertia.transpose()).amax() > 1e-9 * (1.0 + inertia.amax()) {
        return Err(Error::invalid(path, "inertia matrix is not symmetric"));
    }
    let eig = inertia.symmetric_eigenvalues();
    let scale = 1e-12 * (1.0 + eig.amax());
    let min = eig.min();
    if (strict && min <= 0.0) || min < -scale {
        return Err(Error::invalid(path, format!("inertia is not positive definite (min eigenvalue {min:e})")));
    }
    if triangle {
        for i in 0..3 {
            let others = eig[(i + 1) % 3] + eig[(i + 2) % 3];
            if eig[i] > others + scale.max(1e-9 * others) {
                return Err(Error::invalid(path, "principal moments violate the triangle inequality"));
            }
        }
    }
    Ok(())
}

/// Physical consistency of an inertia tensor: symmetric, PSD, triangle inequality.
pub fn inertia_is_physical(inertia: &Matrix3<f64>) -> bool {
    check_inertia("", inertia, true, true).is_ok()
}

impl SpacecraftModel {
    /// A bare satellite without an arm.
    pub fn base_only(mass: f64, inertia: Matrix3<f64>) -> Self {
        Self {
            base_mass: mass,
            base_inertia_body: inertia,
            links: Vec::new(),
            arm_mount_pose: MountPose::default(),
            end_effector: LinkInertia::point_mass(0.0, Vector3::zeros()),
        }
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.base_mass + self.links.iter().map(|l| l.inertia.mass).sum::<f64>() + self.end_effector.mass
    }

    /// Per-link inertias with the end-effector payload merged into the last link.
    pub fn rigid_links(&self) -> Vec<LinkInertia> {
        let mut out: Vec<LinkInertia> = self.links.iter().map(|l| l.inertia).collect();
        if let Some(last) = out.last_mut() {
            *last = last.combine(&self.end_effector);
        }
        out
    }

    /// Checks the model and reports the first offending field.
    ///
    /// The base inertia is only required to be positive definite: the bus
    /// inertia table used by default does not satisfy the rigid-body triangle
    /// inequality (13500 > 2000 + 2000).
    pub fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.base_mass > 0.0 && self.base_mass.is_finite()) {
            return Err(Error::invalid(format!("{prefix}.base_mass"), "must be positive"));
        }
        check_inertia(&format!("{prefix}.base_inertia_body"), &self.base_inertia_body, true, false)?;
        for (i, link) in self.links.iter().enumerate() {
            let p = format!("{prefix}.links[{i}]");
            if !link.dh.is_finite() {
                return Err(Error::invalid(format!("{p}.dh"), "non-finite DH parameter"));
            }
            if !(link.inertia.mass > 0.0 && link.inertia.mass.is_finite()) {
                return Err(Error::invalid(format!("{p}.inertia.mass"), "must be positive"));
            }
            check_inertia(&format!("{p}.inertia.inertia_body"), &link.inertia.inertia_body, true, true)?;
            if !link.inertia.com_offset.iter().all(|x| x.is_finite()) {
                return Err(Error::invalid(format!("{p}.inertia.com_offset"), "non-finite"));
            }
        }
        let ee = &self.end_effector;
        if !(ee.mass >= 0.0 && ee.mass.is_finite()) {
            return Err(Error::invalid(format!("{prefix}.end_effector.mass"), "must be non-negative"));
        }
        if self.links.is_empty() && ee.mass > 0.0 {
            return Err(Error::invalid(format!("{prefix}.end_effector.mass"), "a payload needs at least one link"));
        }
        check_inertia(&format!("{prefix}.end_effector.inertia_body"), &ee.inertia_body, false, true)?;
        if (self.arm_mount_pose.rotation.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("{prefix}.arm_mount_pose.rotation"), "must be a unit quaternion"));
        }
        Ok(())
    }
}

/// Inertial poses of the base and every DH frame for one configuration.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub base_rotation: Matrix3<f64>,
    pub base_position: Vector3<f64>,
    /// Origins of frames 0..=n.
    pub origins: Vec<Vector3<f64>>,
    /// Orientations of frames 0..=n.
    pub rotations: Vec<Matrix3<f64>>,
}

impl ChainState {
    pub fn new(model: &SpacecraftModel, p_b: &Vector3<f64>, q_b: &UnitQuaternion, joints: &[f64]) -> Result<Self> {
        let n = model.dof();
        if joints.len() != n {
            return Err(Error::Dimension { what: "joint vector", expected: n, got: joints.len() });
        }
        let rb = q_b.to_rotation_matrix();
        let mut rot = rb * model.arm_mount_pose.rotation.to_rotation_matrix();
        let mut org = p_b + rb * model.arm_mount_pose.offset;
        let mut origins = Vec::with_capacity(n + 1);
        let mut rotations = Vec::with_capacity(n + 1);
        origins.push(org);
        rotations.push(rot);
        for (link, &qj) in model.links.iter().zip(joints) {
            let (r, t) = link.dh.transform(qj);
            org += rot * t;
            rot *= r;
            origins.push(org);
            rotations.push(rot);
        }
        Ok(Self { base_rotation: rb, base_position: *p_b, origins, rotations })
    }

    pub fn from_state(model: &SpacecraftModel, state: &SystemState) -> Result<Self> {
        Self::new(model, &state.p_b, &state.q_b, state.q.as_slice())
    }

    pub fn dof(&self) -> usize {
        self.origins.len() - 1
    }

    /// Inertial position of a point given in the frame of link `j` (1-based).
    pub fn point_on_link(&self, j: usize, local: &Vector3<f64>) -> Vector3<f64> {
        self.origins[j] + self.rotations[j] * local
    }

    /// Axis of joint `k` (1-based): z of frame `k-1`.
    pub fn joint_axis(&self, k: usize) -> Vector3<f64> {
        self.rotations[k - 1].column(2).into_owned()
    }

    /// Linear and angular velocity Jacobians (fixed base) of a point rigidly
    /// attached to link `j`.
    pub fn point_jacobian(&self, j: usize, point: &Vector3<f64>) -> (Jacobian, Jacobian) {
        let n = self.dof();
        let mut jv = Jacobian::zeros(n);
        let mut jw = Jacobian::zeros(n);
        for k in 1..=j {
            let z = self.joint_axis(k);
            jv.set_column(k - 1, &z.cross(&(point - self.origins[k - 1])));
            jw.set_column(k - 1, &z);
        }
        (jv, jw)
    }
}

/// Inertial poses of frames 1..=n.
pub fn forward_frames(model: &SpacecraftModel, state: &SystemState) -> Result<Vec<Pose>> {
    let chain = ChainState::from_state(model, state)?;
    Ok((1..=chain.dof())
        .map(|j| Pose { rotation: chain.rotations[j], translation: chain.origins[j] })
        .collect())
}

/// `p_bj`: CoM of each link minus the base CoM, inertial coordinates.
pub fn link_com_positions(model: &SpacecraftModel, state: &SystemState) -> Result<Vec<Vector3<f64>>> {
    let chain = ChainState::from_state(model, state)?;
    Ok(model
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| chain.point_on_link(i + 1, &l.inertia.com_offset) - state.p_b)
        .collect())
}

/// Per-link CoM linear and angular velocity Jacobians (fixed base).
pub fn jacobians(model: &SpacecraftModel, state: &SystemState) -> Result<(Vec<Jacobian>, Vec<Jacobian>)> {
    let chain = ChainState::from_state(model, state)?;
    let mut jv = Vec::with_capacity(model.dof());
    let mut jw = Vec::with_capacity(model.dof());
    for (i, l) in model.links.iter().enumerate() {
        let c = chain.point_on_link(i + 1, &l.inertia.com_offset);
        let (v, w) = chain.point_jacobian(i + 1, &c);
        jv.push(v);
        jw.push(w);
    }
    Ok((jv, jw))
}

/// End-effector pose: origin and orientation of the last DH frame (the base
/// frame when the arm has no links).
pub fn end_effector_pose(model: &SpacecraftModel, state: &SystemState) -> Result<(Vector3<f64>, UnitQuaternion)> {
    let chain = ChainState::from_state(model, state)?;
    let n = chain.dof();
    Ok((chain.origins[n], UnitQuaternion::from_rotation_matrix(&chain.rotations[n])))
}

/// 6×n geometric Jacobian of the end-effector frame with a fixed base.
pub fn end_effector_jacobian(chain: &ChainState) -> (Jacobian, Jacobian) {
    let n = chain.dof();
    let p = chain.origins[n];
    chain.point_jacobian(n, &p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dh_matrix(row: &DhRow, q: f64) -> Matrix4<f64> {
        // Rz(θ) Tz(d) Tx(a) Rx(α) as four separate homogeneous factors.
        let th = q + row.theta_offset;
        let rz = Matrix4::new(th.cos(), -th.sin(), 0.0, 0.0, th.sin(), th.cos(), 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let mut tz = Matrix4::identity();
        tz[(2, 3)] = row.d;
        let mut tx = Matrix4::identity();
        tx[(0, 3)] = row.a;
        let al = row.alpha;
        let rx = Matrix4::new(1.0, 0.0, 0.0, 0.0, 0.0, al.cos(), -al.sin(), 0.0, 0.0, al.sin(), al.cos(), 0.0, 0.0, 0.0, 0.0, 1.0);
        rz * tz * tx * rx
    }

    fn state_with(model: &SpacecraftModel, q: Vec<f64>) -> SystemState {
        let mut s = SystemState::rest(model.dof());
        s.q = nalgebra::DVector::from_vec(q);
        s
    }

    #[test]
    fn empty_chain() {
        let m = SpacecraftModel::base_only(1900.0, Matrix3::identity());
        assert!(forward_frames(&m, &SystemState::rest(0)).unwrap().is_empty());
    }

    #[test]
    fn dimension_mismatch() {
        let m = SpacecraftModel::default();
        assert!(matches!(forward_frames(&m, &SystemState::rest(3)), Err(Error::Dimension { .. })));
    }

    #[test]
    fn identity_chain_collapses() {
        let mut m = SpacecraftModel::default();
        for l in &mut m.links {
            l.dh = DhRow { a: 0.0, alpha: 0.0, d: 0.0, theta_offset: 0.0 };
        }
        let s = SystemState::rest(7);
        let base = ChainState::from_state(&m, &s).unwrap();
        for p in forward_frames(&m, &s).unwrap() {
            assert!((p.translation - base.origins[0]).norm() < 1e-15);
            assert!((p.rotation - base.rotations[0]).amax() < 1e-15);
        }
    }

    #[test]
    fn paper_arm_matches_homogeneous_product() {
        let m = SpacecraftModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let q: Vec<f64> = if trial == 0 { vec![0.0; 7] } else { (0..7).map(|_| rng.random_range(-3.0..3.0)).collect() };
            let s = state_with(&m, q.clone());
            let frames = forward_frames(&m, &s).unwrap();
            let mut t = Matrix4::identity();
            t[(2, 3)] = 1.55;
            for (j, row) in paper_dh_table().iter().enumerate() {
                t *= dh_matrix(row, q[j]);
                assert!((frames[j].to_homogeneous() - t).amax() < 1e-12);
            }
        }
        // stretched arm at q = 0: vertical stack of the d offsets above the mount
        let frames = forward_frames(&m, &state_with(&m, vec![0.0; 7])).unwrap();
        let ee = frames[6].translation;
        assert!((ee.z - (1.55 + 0.3 + 1.15 + 1.15 + 0.4)).abs() < 1e-12, "{ee}");
    }

    #[test]
    fn com_positions_rotate_and_translate_with_base() {
        let m = SpacecraftModel::default();
        let q = vec![0.3, -0.2, 0.5, 1.0, -0.4, 0.8, 0.1];
        let s0 = state_with(&m, q.clone());
        let p0 = link_com_positions(&m, &s0).unwrap();
        let frames = forward_frames(&m, &s0).unwrap();
        for (j, p) in p0.iter().enumerate() {
            let direct = frames[j].translation + frames[j].rotation * m.links[j].inertia.com_offset;
            assert!((p - direct).norm() < 1e-14);
        }
        let mut s1 = s0.clone();
        s1.q_b = UnitQuaternion::from_euler_xyz(&Vector3::new(0.4, -1.2, 2.0));
        let r = s1.q_b.to_rotation_matrix();
        let p1 = link_com_positions(&m, &s1).unwrap();
        for (a, b) in p0.iter().zip(&p1) {
            assert!((r * a - b).norm() < 1e-12);
        }
        let mut s2 = s0.clone();
        s2.p_b = Vector3::new(10.0, -3.0, 7.0);
        for (a, b) in p0.iter().zip(&link_com_positions(&m, &s2).unwrap()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn jacobian_columns_are_causal() {
        let m = SpacecraftModel::default();
        let s = state_with(&m, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
        let (jv, jw) = jacobians(&m, &s).unwrap();
        for j in 0..7 {
            for k in (j + 1)..7 {
                assert_eq!(jv[j].column(k).norm(), 0.0);
                assert_eq!(jw[j].column(k).norm(), 0.0);
            }
        }
    }

    #[test]
    fn single_link_lever_arm() {
        let dh = DhRow { a: 0.8, alpha: 0.0, d: 0.0, theta_offset: 0.0 };
        let mut m = SpacecraftModel::base_only(100.0, Matrix3::identity() * 10.0);
        m.links.push(Link { dh, inertia: LinkInertia::point_mass(1.0, Vector3::zeros()) });
        m.links[0].inertia.inertia_body = Matrix3::identity() * 1e-3;
        let s = state_with(&m, vec![0.7]);
        let (jv, _) = jacobians(&m, &s).unwrap();
        assert!((jv[0].column(0).norm() - 0.8).abs() < 1e-14);
    }

    #[test]
    fn jacobians_rotate_with_base() {
        let m = SpacecraftModel::default();
        let q = vec![0.3, -0.2, 0.5, 1.0, -0.4, 0.8, 0.1];
        let s0 = state_with(&m, q);
        let mut s1 = s0.clone();
        s1.q_b = UnitQuaternion::from_euler_xyz(&Vector3::new(-0.7, 0.3, 1.9));
        let r = s1.q_b.to_rotation_matrix();
        let (a, b) = jacobians(&m, &s0).unwrap();
        let (c, d) = jacobians(&m, &s1).unwrap();
        for j in 0..7 {
            assert!((r * &a[j] - &c[j]).amax() < 1e-10);
            assert!((r * &b[j] - &d[j]).amax() < 1e-10);
        }
    }

    #[test]
    fn default_links_are_physical() {
        let m = SpacecraftModel::default();
        m.validate("model").unwrap();
        // 0.5 kg motor + tube of 1.15 m
        let tube = 2700.0 * std::f64::consts::PI * (0.0635f64.powi(2) - 0.05f64.powi(2)) * 1.15;
        assert!((m.links[2].inertia.mass - (tube + 0.5)).abs() < 1e-12);
        assert!((m.total_mass() - (1900.0 + m.links.iter().map(|l| l.inertia.mass).sum::<f64>() + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn validation_reports_field_path() {
        let mut m = SpacecraftModel::default();
        m.links[2].inertia.mass = -1.0;
        let err = m.validate("model").unwrap_err().to_string();
        assert!(err.contains("model.links[2].inertia.mass"), "{err}");
        let mut m = SpacecraftModel::default();
        m.links[0].inertia.inertia_body = Matrix3::from_diagonal(&Vector3::new(10.0, 1.0, 1.0));
        assert!(m.validate("model").unwrap_err().to_string().contains("triangle"));
    }

    #[test]
    fn combine_matches_parallel_axis() {
        let a = LinkInertia::point_mass(2.0, Vector3::new(1.0, 0.0, 0.0));
        let b = LinkInertia::point_mass(2.0, Vector3::new(-1.0, 0.0, 0.0));
        let c = a.combine(&b);
        assert_eq!(c.mass, 4.0);
        assert!(c.com_offset.norm() < 1e-15);
        assert!((c.inertia_body - Matrix3::from_diagonal(&Vector3::new(0.0, 4.0, 4.0))).amax() < 1e-14);
    }
}
