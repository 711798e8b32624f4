use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Rigid-body pose: rotation followed by translation, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            translation: Vec3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn new(translation: Vec3, rotation: UnitQuaternion<f64>) -> Self {
        Self { translation, rotation }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(t, UnitQuaternion::identity())
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(Vec3::zeros(), rotation)
    }

    /// Fixed-axis XYZ roll-pitch-yaw (R = Rz(yaw) * Ry(pitch) * Rx(roll)).
    pub fn from_xyz_rpy(xyz: Vec3, roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(xyz, UnitQuaternion::from_euler_angles(roll, pitch, yaw))
    }

    /// `parent * child`: the child pose expressed in the parent's frame,
    /// mapped into the frame the parent is expressed in.
    pub fn compose(&self, child: &Pose) -> Pose {
        let q = self.rotation.quaternion() * child.rotation.quaternion();
        Pose {
            translation: self.translation + self.rotation * child.translation,
            rotation: renormalize(q),
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            translation: -(inv * self.translation),
            rotation: inv,
        }
    }

    pub fn transform_point(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse_transform_point(&self, x: &Vec3) -> Vec3 {
        self.rotation.inverse_transform_vector(&(x - self.translation))
    }

    pub fn inverse_transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.inverse_transform_vector(v)
    }

    /// Local axis `i` (0 = x, 1 = y, 2 = z) expressed in the parent frame.
    pub fn axis(&self, i: usize) -> Vec3 {
        let mut e = Vec3::zeros();
        e[i] = 1.0;
        self.rotation * e
    }
}

fn renormalize(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    // Skip the division when already exact so that compose with identity
    // reproduces the input bit-for-bit.
    let n2 = q.norm_squared();
    if n2 == 1.0 {
        UnitQuaternion::new_unchecked(q)
    } else {
        UnitQuaternion::new_normalize(q)
    }
}

/// Serializable pose: translation in meters plus quaternion `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub translation: [f64; 3],
    pub rotation_wxyz: [f64; 4],
}

impl From<&Pose> for PoseRecord {
    fn from(p: &Pose) -> Self {
        let q = p.rotation.quaternion();
        Self {
            translation: [p.translation.x, p.translation.y, p.translation.z],
            rotation_wxyz: [q.w, q.i, q.j, q.k],
        }
    }
}

impl From<&PoseRecord> for Pose {
    fn from(r: &PoseRecord) -> Self {
        let [w, i, j, k] = r.rotation_wxyz;
        Pose {
            translation: Vec3::new(r.translation[0], r.translation[1], r.translation[2]),
            rotation: UnitQuaternion::new_unchecked(Quaternion::new(w, i, j, k)),
        }
    }
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = PoseRecord::deserialize(d)?;
        Ok(Pose::from(&r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn sample() -> Pose {
        Pose::from_xyz_rpy(Vec3::new(0.1, -0.2, 0.3), 0.3, -0.4, 1.1)
    }

    #[test]
    fn identity_composition() {
        let p = sample();
        let a = Pose::identity().compose(&p);
        let b = p.compose(&Pose::identity());
        assert_eq!(b.translation, p.translation);
        assert_eq!(a.translation, p.translation);
        assert!(b.rotation.angle_to(&p.rotation) < 1e-12);
        assert!(a.rotation.angle_to(&p.rotation) < 1e-12);
    }

    #[test]
    fn translate_origin() {
        let p = Pose::from_translation(Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(p.transform_point(&Vec3::zeros()), Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(Pose::identity().transform_point(&Vec3::new(3.0, 4.0, 5.0)), Vec3::new(3.0, 4.0, 5.0));
    }

    #[test]
    fn yaw_quarter_turn() {
        let p = Pose::from_xyz_rpy(Vec3::zeros(), 0.0, 0.0, FRAC_PI_2);
        let x = p.transform_point(&Vec3::new(1.0, 0.0, 0.0));
        assert!((x - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn inverse_roundtrip_and_norm() {
        let mut p = sample();
        for _ in 0..1000 {
            p = p.compose(&sample());
        }
        assert!((p.rotation.quaternion().norm() - 1.0).abs() < 1e-9);
        let x = Vec3::new(0.3, 0.2, -0.7);
        let back = p.inverse().transform_point(&p.transform_point(&x));
        assert!((back - x).norm() < 1e-9);
        assert!((p.inverse_transform_point(&p.transform_point(&x)) - x).norm() < 1e-9);
    }
}
