use super::pose::{Pose, Vec3};
use crate::error::{Error, Result};

/// Primitive geometry, or a rigid union of placed children.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    Box { half_extents: Vec3 },
    /// Axis along local z.
    Cylinder { radius: f64, half_height: f64 },
    Sphere { radius: f64 },
    Composite(Vec<(Shape, Pose)>),
}

/// A rigid object. The local origin is the center of mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub kind: ShapeKind,
    pub reflectance: f64,
    /// kg; only the grasp oracle reads this.
    pub mass: f64,
}

/// Intersection in the frame the query ray was given in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub distance: f64,
    pub normal: Vec3,
    pub reflectance: f64,
}

impl Shape {
    pub fn new(kind: ShapeKind, reflectance: f64, mass: f64) -> Result<Self> {
        let s = Self { kind, reflectance, mass };
        s.validate()?;
        Ok(s)
    }

    pub fn sphere(radius: f64, reflectance: f64, mass: f64) -> Result<Self> {
        Self::new(ShapeKind::Sphere { radius }, reflectance, mass)
    }

    pub fn cuboid(half_extents: Vec3, reflectance: f64, mass: f64) -> Result<Self> {
        Self::new(ShapeKind::Box { half_extents }, reflectance, mass)
    }

    pub fn cylinder(radius: f64, half_height: f64, reflectance: f64, mass: f64) -> Result<Self> {
        Self::new(ShapeKind::Cylinder { radius, half_height }, reflectance, mass)
    }

    pub fn composite(children: Vec<(Shape, Pose)>, reflectance: f64, mass: f64) -> Result<Self> {
        Self::new(ShapeKind::Composite(children), reflectance, mass)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reflectance > 0.0 && self.reflectance <= 1.0) {
            return Err(Error::Geometry(format!("reflectance {} outside (0, 1]", self.reflectance)));
        }
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::Geometry(format!("mass {} must be positive", self.mass)));
        }
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Geometry(format!("{what} {v} must be positive")))
            }
        };
        match &self.kind {
            ShapeKind::Box { half_extents } => {
                for i in 0..3 {
                    positive(half_extents[i], "box half-extent")?;
                }
            }
            ShapeKind::Cylinder { radius, half_height } => {
                positive(*radius, "cylinder radius")?;
                positive(*half_height, "cylinder half-height")?;
            }
            ShapeKind::Sphere { radius } => positive(*radius, "sphere radius")?,
            ShapeKind::Composite(children) => {
                if children.is_empty() {
                    return Err(Error::Geometry("composite shape has no children".into()));
                }
                for (child, _) in children {
                    child.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Nearest non-negative intersection with a unit-direction ray in the
    /// shape's local frame.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<SurfaceHit> {
        let mut best: Option<SurfaceHit> = None;
        self.for_each_hit(origin, dir, &mut |h| {
            if best.is_none_or(|b| h.distance < b.distance) {
                best = Some(h);
            }
        });
        best
    }

    /// Calls `f` once per primitive that the ray enters, with that primitive's
    /// nearest non-negative root.
    pub fn for_each_hit(&self, origin: &Vec3, dir: &Vec3, f: &mut dyn FnMut(SurfaceHit)) {
        let hit = match &self.kind {
            ShapeKind::Sphere { radius } => ray_sphere(origin, dir, *radius),
            ShapeKind::Box { half_extents } => ray_box(origin, dir, half_extents),
            ShapeKind::Cylinder { radius, half_height } => ray_cylinder(origin, dir, *radius, *half_height),
            ShapeKind::Composite(children) => {
                for (child, pose) in children {
                    let o = pose.inverse_transform_point(origin);
                    let d = pose.inverse_transform_vector(dir);
                    child.for_each_hit(&o, &d, &mut |h| {
                        f(SurfaceHit {
                            distance: h.distance,
                            normal: pose.transform_vector(&h.normal),
                            reflectance: h.reflectance,
                        })
                    });
                }
                return;
            }
        };
        if let Some((distance, normal)) = hit {
            f(SurfaceHit {
                distance,
                normal,
                reflectance: self.reflectance,
            });
        }
    }

    /// Signed distance from a local-frame point to the surface (negative inside).
    pub fn sdf(&self, p: &Vec3) -> f64 {
        match &self.kind {
            ShapeKind::Sphere { radius } => p.norm() - radius,
            ShapeKind::Box { half_extents } => {
                let q = p.abs() - half_extents;
                let outside = q.sup(&Vec3::zeros()).norm();
                let inside = q.max().min(0.0);
                outside + inside
            }
            ShapeKind::Cylinder { radius, half_height } => {
                let dx = (p.x * p.x + p.y * p.y).sqrt() - radius;
                let dz = p.z.abs() - half_height;
                let inside = dx.max(dz).min(0.0);
                let outside = (dx.max(0.0).powi(2) + dz.max(0.0).powi(2)).sqrt();
                inside + outside
            }
            ShapeKind::Composite(children) => children
                .iter()
                .map(|(c, pose)| c.sdf(&pose.inverse_transform_point(p)))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Outward unit normal of the distance field at `p` (central differences).
    pub fn sdf_gradient(&self, p: &Vec3) -> Vec3 {
        const H: f64 = 1e-7;
        let mut g = Vec3::zeros();
        for i in 0..3 {
            let mut a = *p;
            let mut b = *p;
            a[i] += H;
            b[i] -= H;
            g[i] = (self.sdf(&a) - self.sdf(&b)) / (2.0 * H);
        }
        let n = g.norm();
        if n > 0.0 {
            g / n
        } else {
            Vec3::z()
        }
    }

    /// Support function: max over surface points `x` of `dir . x`, local frame.
    pub fn support(&self, dir: &Vec3) -> f64 {
        match &self.kind {
            ShapeKind::Sphere { radius } => radius * dir.norm(),
            ShapeKind::Box { half_extents } => dir.abs().dot(half_extents),
            ShapeKind::Cylinder { radius, half_height } => {
                radius * (dir.x * dir.x + dir.y * dir.y).sqrt() + half_height * dir.z.abs()
            }
            ShapeKind::Composite(children) => children
                .iter()
                .map(|(c, pose)| dir.dot(&pose.translation) + c.support(&pose.inverse_transform_vector(dir)))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Half of the extent along the vertical (local z) axis, measured from the
    /// origin downward. Used to rest objects on the support plane.
    pub fn depth_below_origin(&self) -> f64 {
        self.support(&-Vec3::z())
    }
}

fn smallest_nonneg(t0: f64, t1: f64) -> Option<f64> {
    let (a, b) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    if a >= 0.0 {
        Some(a)
    } else if b >= 0.0 {
        Some(b)
    } else {
        None
    }
}

fn ray_sphere(o: &Vec3, d: &Vec3, r: f64) -> Option<(f64, Vec3)> {
    let b = o.dot(d);
    let c = o.norm_squared() - r * r;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let t = smallest_nonneg(-b - s, -b + s)?;
    let p = o + d * t;
    Some((t, p / r))
}

fn ray_box(o: &Vec3, d: &Vec3, h: &Vec3) -> Option<(f64, Vec3)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut near_axis = 0usize;
    let mut near_sign = 0.0;
    let mut far_axis = 0usize;
    let mut far_sign = 0.0;
    for i in 0..3 {
        if d[i] == 0.0 {
            if o[i].abs() > h[i] {
                return None;
            }
            continue;
        }
        let t1 = (-h[i] - o[i]) / d[i];
        let t2 = (h[i] - o[i]) / d[i];
        // Entering through the face whose normal opposes the direction.
        let (enter, exit) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let entry_sign = -d[i].signum();
        if enter > t_near {
            t_near = enter;
            near_axis = i;
            near_sign = entry_sign;
        }
        if exit < t_far {
            t_far = exit;
            far_axis = i;
            far_sign = -entry_sign;
        }
    }
    if t_near > t_far || t_far < 0.0 {
        return None;
    }
    let mut n = Vec3::zeros();
    if t_near >= 0.0 {
        n[near_axis] = near_sign;
        Some((t_near, n))
    } else {
        n[far_axis] = far_sign;
        Some((t_far, n))
    }
}

fn ray_cylinder(o: &Vec3, d: &Vec3, r: f64, hh: f64) -> Option<(f64, Vec3)> {
    let mut best: Option<(f64, Vec3)> = None;
    let mut consider = |t: f64, n: Vec3| {
        if t >= 0.0 && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, n));
        }
    };
    let a = d.x * d.x + d.y * d.y;
    if a > 0.0 {
        let b = o.x * d.x + o.y * d.y;
        let c = o.x * o.x + o.y * o.y - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            for t in [(-b - s) / a, (-b + s) / a] {
                let z = o.z + t * d.z;
                if z.abs() <= hh {
                    let p = o + d * t;
                    consider(t, Vec3::new(p.x / r, p.y / r, 0.0));
                }
            }
        }
    }
    if d.z != 0.0 {
        for (zc, nz) in [(hh, 1.0), (-hh, -1.0)] {
            let t = (zc - o.z) / d.z;
            let p = o + d * t;
            if p.x * p.x + p.y * p.y <= r * r {
                consider(t, Vec3::new(0.0, 0.0, nz));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions() {
        assert!(Shape::sphere(0.0, 0.5, 0.1).is_err());
        assert!(Shape::sphere(0.1, 0.0, 0.1).is_err());
        assert!(Shape::sphere(0.1, 0.5, 0.0).is_err());
        assert!(Shape::cuboid(Vec3::new(0.1, -0.1, 0.1), 0.5, 0.1).is_err());
        assert!(Shape::composite(vec![], 0.5, 0.1).is_err());
    }

    #[test]
    fn sdf_signs() {
        let b = Shape::cuboid(Vec3::new(0.1, 0.2, 0.3), 0.5, 0.1).unwrap();
        assert!((b.sdf(&Vec3::new(0.3, 0.0, 0.0)) - 0.2).abs() < 1e-15);
        assert!((b.sdf(&Vec3::zeros()) + 0.1).abs() < 1e-15);
        let c = Shape::cylinder(0.05, 0.1, 0.5, 0.1).unwrap();
        assert!((c.sdf(&Vec3::new(0.0, 0.1, 0.0)) - 0.05).abs() < 1e-15);
        assert!((c.sdf(&Vec3::new(0.0, 0.0, 0.2)) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn cylinder_cap_and_side() {
        let c = Shape::cylinder(0.05, 0.1, 0.5, 0.1).unwrap();
        let side = c.intersect(&Vec3::new(-1.0, 0.0, 0.0), &Vec3::x()).unwrap();
        assert!((side.distance - 0.95).abs() < 1e-12);
        assert!((side.normal - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
        let cap = c.intersect(&Vec3::new(0.01, 0.0, 1.0), &-Vec3::z()).unwrap();
        assert!((cap.distance - 0.9).abs() < 1e-12);
        assert_eq!(cap.normal, Vec3::z());
    }

    #[test]
    fn ray_from_inside_exits() {
        let b = Shape::cuboid(Vec3::new(0.1, 0.1, 0.1), 0.5, 0.1).unwrap();
        let h = b.intersect(&Vec3::zeros(), &Vec3::x()).unwrap();
        assert!((h.distance - 0.1).abs() < 1e-15);
        assert_eq!(h.normal, Vec3::x());
    }

    #[test]
    fn support_of_composite() {
        let child = Shape::sphere(0.02, 0.5, 0.01).unwrap();
        let comp = Shape::composite(
            vec![
                (child.clone(), Pose::from_translation(Vec3::new(0.0, 0.0, 0.05))),
                (child, Pose::from_translation(Vec3::new(0.0, 0.0, -0.03))),
            ],
            0.5,
            0.1,
        )
        .unwrap();
        assert!((comp.support(&Vec3::z()) - 0.07).abs() < 1e-15);
        assert!((comp.depth_below_origin() - 0.05).abs() < 1e-15);
    }
}
