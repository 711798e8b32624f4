//! Object zoo files.
//!
//! Zoo files are TOML with one `[[object]]` table per object, in centimetres,
//! grams and degrees. Composite parts are placed relative to the object's
//! reference point; the loader recentres them on the volume-weighted centroid
//! so that the local origin is the center of mass.

use serde::{Deserialize, Serialize};

use crate::dataset::PoseRanges;
use crate::error::{Error, Result};
use crate::scene::{Pose, Shape, ShapeKind, Vec3};

const CM: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Box,
    Cylinder,
    Sphere,
    Composite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartRecord {
    pub shape: PrimitiveKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_cm: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_cm: Option<f64>,
    #[serde(default)]
    pub at_cm: [f64; 3],
    #[serde(default)]
    pub rpy_deg: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflectance: Option<f64>,
}

/// Pose ranges as written in a zoo file. Missing fields keep the value of
/// the ranges they override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangesRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_cm: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_cm: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_cm: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roll_deg: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_deg: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation_step_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_step_deg: Option<f64>,
}

impl RangesRecord {
    pub fn apply(&self, base: &PoseRanges) -> PoseRanges {
        let cm = |v: Option<[f64; 2]>, d: (f64, f64)| v.map_or(d, |[a, b]| (a * CM, b * CM));
        let deg = |v: Option<[f64; 2]>, d: (f64, f64)| v.map_or(d, |[a, b]| (a.to_radians(), b.to_radians()));
        PoseRanges {
            x: cm(self.x_cm, base.x),
            y: cm(self.y_cm, base.y),
            z: cm(self.z_cm, base.z),
            roll: deg(self.roll_deg, base.roll),
            pitch: deg(self.pitch_deg, base.pitch),
            yaw: self.yaw_deg.as_ref().map_or_else(|| base.yaw.clone(), |y| y.iter().map(|d| d.to_radians()).collect()),
            translation_step: self.translation_step_cm.map_or(base.translation_step, |s| s * CM),
            angle_step: self.angle_step_deg.map_or(base.angle_step, f64::to_radians),
        }
    }
}

/// One `[[object]]` table as written in a zoo file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub shape: PrimitiveKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_cm: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<PartRecord>,
    pub mass_g: f64,
    #[serde(default = "default_reflectance")]
    pub reflectance: f64,
    /// Height above the table of the nominal grasp center.
    pub grasp_height_cm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<f64>,
    /// Overrides of the zoo-wide ranges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranges: Option<RangesRecord>,
}

fn default_reflectance() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: String,
    pub shape: Shape,
    /// m above the support plane.
    pub grasp_height: f64,
    pub ranges: PoseRanges,
    pub ambient: Option<f64>,
    record: ObjectRecord,
}

impl ObjectSpec {
    /// The record this spec was built from.
    pub fn record(&self) -> &ObjectRecord {
        &self.record
    }

    pub fn from_record(record: ObjectRecord) -> Result<Self> {
        Self::from_record_with_ranges(record, &PoseRanges::default())
    }

    /// Like [`ObjectSpec::from_record`], with the record's ranges applied on
    /// top of `default_ranges`.
    pub fn from_record_with_ranges(record: ObjectRecord, default_ranges: &PoseRanges) -> Result<Self> {
        let ctx = |e: Error| Error::Config(format!("object `{}`: {e}", record.id));
        if record.id.is_empty() {
            return Err(Error::Config("object id must not be empty".into()));
        }
        if !(record.mass_g > 0.0) {
            return Err(ctx(Error::Config(format!("mass {} g must be positive", record.mass_g))));
        }
        let mass = record.mass_g / 1000.0;
        let shape = if record.shape == PrimitiveKind::Composite {
            if !(record.size_cm.is_none() && record.diameter_cm.is_none() && record.height_cm.is_none()) {
                return Err(ctx(Error::Config("composite objects take their size from `parts`".into())));
            }
            composite(&record.parts, record.reflectance, mass).map_err(ctx)?
        } else {
            if !record.parts.is_empty() {
                return Err(ctx(Error::Config("only composite objects may list parts".into())));
            }
            let (kind, _) = primitive(&record.shape, record.size_cm, record.diameter_cm, record.height_cm).map_err(ctx)?;
            Shape::new(kind, record.reflectance, mass).map_err(ctx)?
        };
        let ranges = record.ranges.as_ref().map_or_else(|| default_ranges.clone(), |r| r.apply(default_ranges));
        ranges.validate().map_err(ctx)?;
        let grasp_height = record.grasp_height_cm * CM;
        if !(grasp_height > 0.0) {
            return Err(ctx(Error::Config("grasp height must be above the table".into())));
        }
        Ok(Self {
            id: record.id.clone(),
            shape,
            grasp_height,
            ranges,
            ambient: record.ambient,
            record,
        })
    }
}

/// Returns the primitive and its volume.
fn primitive(kind: &PrimitiveKind, size: Option<[f64; 3]>, diameter: Option<f64>, height: Option<f64>) -> Result<(ShapeKind, f64)> {
    let need = |v: Option<f64>, what: &str| v.ok_or_else(|| Error::Config(format!("missing `{what}`")));
    match kind {
        PrimitiveKind::Box => {
            let s = size.ok_or_else(|| Error::Config("missing `size_cm`".into()))?;
            let h = Vec3::new(s[0], s[1], s[2]) * (0.5 * CM);
            Ok((ShapeKind::Box { half_extents: h }, 8.0 * h.x * h.y * h.z))
        }
        PrimitiveKind::Cylinder => {
            let r = need(diameter, "diameter_cm")? * 0.5 * CM;
            let hh = need(height, "height_cm")? * 0.5 * CM;
            Ok((ShapeKind::Cylinder { radius: r, half_height: hh }, std::f64::consts::PI * r * r * 2.0 * hh))
        }
        PrimitiveKind::Sphere => {
            let r = need(diameter, "diameter_cm")? * 0.5 * CM;
            Ok((ShapeKind::Sphere { radius: r }, 4.0 / 3.0 * std::f64::consts::PI * r.powi(3)))
        }
        PrimitiveKind::Composite => Err(Error::Config("nested composites are not supported".into())),
    }
}

fn composite(parts: &[PartRecord], reflectance: f64, mass: f64) -> Result<Shape> {
    if parts.is_empty() {
        return Err(Error::Config("composite object has no parts".into()));
    }
    let mut placed = Vec::with_capacity(parts.len());
    let mut centroid = Vec3::zeros();
    let mut volume = 0.0;
    for p in parts {
        let (kind, v) = primitive(&p.shape, p.size_cm, p.diameter_cm, p.height_cm)?;
        let at = Vec3::new(p.at_cm[0], p.at_cm[1], p.at_cm[2]) * CM;
        let [r, pi, y] = p.rpy_deg.map(f64::to_radians);
        let shape = Shape::new(kind, p.reflectance.unwrap_or(reflectance), mass)?;
        placed.push((shape, Pose::from_xyz_rpy(at, r, pi, y)));
        centroid += at * v;
        volume += v;
    }
    centroid /= volume;
    for (_, pose) in &mut placed {
        pose.translation -= centroid;
    }
    Shape::composite(placed, reflectance, mass)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ZooFile {
    /// Ranges for objects without their own.
    #[serde(default)]
    ranges: Option<RangesRecord>,
    #[serde(default)]
    object: Vec<ObjectRecord>,
}

/// Parse a zoo file; ids must be unique.
pub fn parse_zoo(text: &str) -> Result<Vec<ObjectSpec>> {
    let file: ZooFile = toml::from_str(text)?;
    let default_ranges = file.ranges.unwrap_or_default().apply(&PoseRanges::default());
    default_ranges.validate()?;
    let mut out: Vec<ObjectSpec> = Vec::with_capacity(file.object.len());
    for rec in file.object {
        if out.iter().any(|o| o.id == rec.id) {
            return Err(Error::Config(format!("duplicate object id `{}`", rec.id)));
        }
        out.push(ObjectSpec::from_record_with_ranges(rec, &default_ranges)?);
    }
    Ok(out)
}
