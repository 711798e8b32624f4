//! Rigid-body poses, parametric object shapes and exact ray casting.
//!
//! The support plane is an infinite horizontal plane at `z = support_plane`
//! and takes part in ray casting like any object.

mod pose;
mod shape;

pub use pose::{Pose, PoseRecord, Vec3};
pub use shape::{Shape, ShapeKind, SurfaceHit};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: String,
    pub shape: Shape,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub support_plane: Option<f64>,
    pub plane_reflectance: f64,
    /// Ambient light level reported by every zone.
    pub ambient: f64,
}

impl Default for Scene {
    fn default() -> Self {
        Self {
            objects: Vec::new(),
            support_plane: None,
            plane_reflectance: 0.35,
            ambient: 1.5,
        }
    }
}

/// What a ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Object(usize),
    SupportPlane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vec3,
    direction: Vec3,
}

impl Ray {
    /// Normalizes `direction`; fails on a zero or non-finite vector.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Geometry("ray direction must be non-zero".into()));
        }
        let direction = if n == 1.0 { direction } else { direction / n };
        Ok(Self { origin, direction })
    }

    pub fn origin(&self) -> &Vec3 {
        &self.origin
    }

    pub fn direction(&self) -> &Vec3 {
        &self.direction
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }

    pub fn transformed(&self, pose: &Pose) -> Ray {
        Ray {
            origin: pose.transform_point(&self.origin),
            direction: pose.transform_vector(&self.direction),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub distance: f64,
    pub normal: Vec3,
    pub surface: Surface,
    pub reflectance: f64,
}

impl Scene {
    pub fn new(objects: Vec<SceneObject>, support_plane: Option<f64>) -> Result<Self> {
        let scene = Self {
            objects,
            support_plane,
            ..Self::default()
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.objects.iter().enumerate() {
            a.shape.validate()?;
            if self.objects[..i].iter().any(|b| b.id == a.id) {
                return Err(Error::Geometry(format!("duplicate object id `{}`", a.id)));
            }
        }
        Ok(())
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Every surface the ray enters within `max_range`, one entry per
    /// primitive plus the support plane, sorted by distance.
    pub fn ray_cast_all(&self, ray: &Ray, max_range: f64) -> Vec<Hit> {
        let mut hits = Vec::new();
        for (idx, obj) in self.objects.iter().enumerate() {
            let o = obj.pose.inverse_transform_point(ray.origin());
            let d = obj.pose.inverse_transform_vector(ray.direction());
            obj.shape.for_each_hit(&o, &d, &mut |h| {
                if h.distance <= max_range {
                    hits.push(Hit {
                        distance: h.distance,
                        normal: obj.pose.transform_vector(&h.normal),
                        surface: Surface::Object(idx),
                        reflectance: h.reflectance,
                    });
                }
            });
        }
        if let Some(h) = self.plane_hit(ray, max_range) {
            hits.push(h);
        }
        hits.sort_by(|a, b| a.distance.total_cmp(&b.distance));
        hits
    }

    /// Nearest intersection within `max_range`.
    pub fn ray_cast(&self, ray: &Ray, max_range: f64) -> Option<Hit> {
        let mut best = self.plane_hit(ray, max_range);
        for (idx, obj) in self.objects.iter().enumerate() {
            let o = obj.pose.inverse_transform_point(ray.origin());
            let d = obj.pose.inverse_transform_vector(ray.direction());
            if let Some(h) = obj.shape.intersect(&o, &d) {
                if h.distance <= max_range && best.is_none_or(|b| h.distance < b.distance) {
                    best = Some(Hit {
                        distance: h.distance,
                        normal: obj.pose.transform_vector(&h.normal),
                        surface: Surface::Object(idx),
                        reflectance: h.reflectance,
                    });
                }
            }
        }
        best
    }

    fn plane_hit(&self, ray: &Ray, max_range: f64) -> Option<Hit> {
        let z0 = self.support_plane?;
        let dz = ray.direction().z;
        if dz == 0.0 {
            return None;
        }
        let t = (z0 - ray.origin().z) / dz;
        if t < 0.0 || t > max_range {
            return None;
        }
        let nz = if ray.origin().z >= z0 { 1.0 } else { -1.0 };
        Some(Hit {
            distance: t,
            normal: Vec3::new(0.0, 0.0, nz),
            surface: Surface::SupportPlane,
            reflectance: self.plane_reflectance,
        })
    }

    /// Signed distance from a world point to the nearest object (the support
    /// plane excluded). `None` for a scene without objects.
    pub fn object_sdf(&self, p: &Vec3) -> Option<(usize, f64)> {
        self.objects
            .iter()
            .enumerate()
            .map(|(i, o)| (i, o.shape.sdf(&o.pose.inverse_transform_point(p))))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Same scene with every object moved by `pose` (the plane is dropped, as
    /// a rigid motion does not in general keep it horizontal).
    pub fn transformed_objects(&self, pose: &Pose) -> Scene {
        Scene {
            objects: self
                .objects
                .iter()
                .map(|o| SceneObject {
                    id: o.id.clone(),
                    shape: o.shape.clone(),
                    pose: pose.compose(&o.pose),
                })
                .collect(),
            support_plane: None,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(id: &str, shape: Shape, t: Vec3) -> SceneObject {
        SceneObject {
            id: id.into(),
            shape,
            pose: Pose::from_translation(t),
        }
    }

    #[test]
    fn sphere_on_axis() {
        let scene = Scene::new(
            vec![obj("s", Shape::sphere(0.25, 0.5, 0.1).unwrap(), Vec3::new(0.0, 0.0, 1.0))],
            None,
        )
        .unwrap();
        let ray = Ray::new(Vec3::zeros(), Vec3::z()).unwrap();
        let h = scene.ray_cast(&ray, 10.0).unwrap();
        assert_eq!(h.distance, 0.75);
        assert_eq!(h.surface, Surface::Object(0));
    }

    #[test]
    fn box_slab() {
        let scene = Scene::new(
            vec![obj("b", Shape::cuboid(Vec3::repeat(0.05), 0.5, 0.1).unwrap(), Vec3::new(0.0, 0.0, 0.2))],
            None,
        )
        .unwrap();
        let up = Ray::new(Vec3::zeros(), Vec3::z()).unwrap();
        let h = scene.ray_cast(&up, 10.0).unwrap();
        assert!((h.distance - 0.15).abs() < 1e-15);
        assert_eq!(h.normal, -Vec3::z());
        let down = Ray::new(Vec3::zeros(), -Vec3::z()).unwrap();
        assert!(scene.ray_cast(&down, 10.0).is_none());
    }

    #[test]
    fn max_range_cuts_off() {
        let scene = Scene::new(
            vec![obj("s", Shape::sphere(0.25, 0.5, 0.1).unwrap(), Vec3::new(0.0, 0.0, 1.0))],
            None,
        )
        .unwrap();
        let ray = Ray::new(Vec3::zeros(), Vec3::z()).unwrap();
        assert!(scene.ray_cast(&ray, 0.7).is_none());
    }

    #[test]
    fn plane_below_and_behind() {
        let mut scene = Scene::new(
            vec![obj("s", Shape::sphere(0.1, 0.5, 0.1).unwrap(), Vec3::new(0.0, 0.0, 0.3))],
            Some(0.0),
        )
        .unwrap();
        scene.plane_reflectance = 0.2;
        let ray = Ray::new(Vec3::new(0.0, 0.0, 1.0), -Vec3::z()).unwrap();
        let all = scene.ray_cast_all(&ray, 5.0);
        assert_eq!(all.len(), 2);
        assert!((all[0].distance - 0.6).abs() < 1e-12);
        assert_eq!(all[1].surface, Surface::SupportPlane);
        assert_eq!(all[1].distance, 1.0);
        assert_eq!(all[1].reflectance, 0.2);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let s = Shape::sphere(0.1, 0.5, 0.1).unwrap();
        assert!(Scene::new(vec![obj("a", s.clone(), Vec3::zeros()), obj("a", s, Vec3::x())], None).is_err());
    }

    #[test]
    fn zero_direction_rejected() {
        assert!(Ray::new(Vec3::zeros(), Vec3::zeros()).is_err());
        let r = Ray::new(Vec3::zeros(), Vec3::new(3.0, 4.0, 0.0)).unwrap();
        assert!((r.direction().norm() - 1.0).abs() < 1e-15);
    }
}
