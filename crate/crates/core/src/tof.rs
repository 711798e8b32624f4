//! Multi-zone time-of-flight sensor simulation.
//!
//! One sensor reports an 8x8 grid of zones. Each zone carries up to four
//! targets (distance, standard deviation, reflectance, signal, status) plus
//! zone-level metadata (target count, SPAD count, quality, ambient light).
//! Distances are radial, measured along the zone ray.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Pose, Ray, Scene, Vec3};

pub const GRID: usize = 8;
pub const ZONES: usize = GRID * GRID;
pub const MAX_TARGETS: usize = 4;
/// Scalars per target slot: distance, std_dev, reflectance, signal, status.
pub const FIELDS_PER_TARGET: usize = 5;
pub const DEFAULT_SPAD_COUNT: u32 = 16;
/// Signal proxy = SIGNAL_SCALE * reflectance / distance^2.
const SIGNAL_SCALE: f64 = 0.1;
const MIN_SIGNAL_DISTANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorSide {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Valid,
    #[default]
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    /// Corner-to-corner field of view, radians.
    pub diagonal_fov: f64,
    pub max_range: f64,
    pub noise_sigma: f64,
    /// Rays per zone along each axis; 1 samples the zone center only.
    #[serde(default = "one")]
    pub supersample: u32,
    #[serde(default)]
    pub stream: u64,
}

fn one() -> u32 {
    1
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            diagonal_fov: std::f64::consts::FRAC_PI_2,
            max_range: 3.5,
            noise_sigma: 0.003,
            supersample: 1,
            stream: 0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.diagonal_fov > 0.0 && self.diagonal_fov < std::f64::consts::PI) {
            return Err(Error::Config(format!("diagonal_fov {} outside (0, pi)", self.diagonal_fov)));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::Config("max_range must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        if self.supersample == 0 {
            return Err(Error::Config("supersample must be at least 1".into()));
        }
        Ok(())
    }

    /// Per-axis tangent half-extent of the grid.
    pub fn axis_tangent(&self) -> f64 {
        (self.diagonal_fov / 2.0).tan() / std::f64::consts::SQRT_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetReading {
    pub distance_m: f64,
    pub std_dev_m: f64,
    pub reflectance: f64,
    pub signal: f64,
    #[serde(default = "valid")]
    pub status: Quality,
}

fn valid() -> Quality {
    Quality::Valid
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneReading {
    /// Fixed four slots; only the first `num_targets` are populated. An
    /// invalid zone keeps `max_range` in slot 0's distance.
    pub targets: [TargetReading; MAX_TARGETS],
    pub num_targets: u8,
    pub spad_count: u32,
    pub quality: Quality,
    pub ambient: f64,
}

impl ZoneReading {
    pub fn invalid(max_range: f64, ambient: f64) -> Self {
        let mut targets = [TargetReading::default(); MAX_TARGETS];
        targets[0].distance_m = max_range;
        targets[0].status = Quality::Invalid;
        Self {
            targets,
            num_targets: 0,
            spad_count: DEFAULT_SPAD_COUNT,
            quality: Quality::Invalid,
            ambient,
        }
    }

    pub fn populated(&self) -> &[TargetReading] {
        &self.targets[..self.num_targets as usize]
    }

    pub fn check(&self) -> Result<()> {
        if self.num_targets as usize > MAX_TARGETS {
            return Err(Error::Frame(format!("num_targets {} exceeds {MAX_TARGETS}", self.num_targets)));
        }
        if (self.quality == Quality::Invalid) != (self.num_targets == 0) {
            return Err(Error::Frame("quality must be invalid exactly when num_targets is 0".into()));
        }
        if self.populated().windows(2).any(|w| w[0].distance_m > w[1].distance_m) {
            return Err(Error::Frame("targets not sorted by distance".into()));
        }
        if self.spad_count == 0 {
            return Err(Error::Frame("spad_count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSensorFrame {
    pub sensor_id: SensorSide,
    /// Row-major, row 0 first.
    pub zones: Vec<ZoneReading>,
    pub timestamp: f64,
    pub max_range_m: f64,
}

impl RawSensorFrame {
    pub fn check(&self) -> Result<()> {
        if self.zones.len() != ZONES {
            return Err(Error::Frame(format!("zones: expected {ZONES} zones, got {}", self.zones.len())));
        }
        for (i, z) in self.zones.iter().enumerate() {
            z.check().map_err(|e| Error::Frame(format!("zones[{i}]: {e}")))?;
        }
        Ok(())
    }
}

/// Unit direction of zone `(row, col)` in the sensor frame (+z outward).
pub fn zone_direction(row: usize, col: usize, cfg: &SensorConfig) -> Vec3 {
    zone_direction_at(row as f64 + 0.5, col as f64 + 0.5, cfg)
}

/// Direction through fractional grid coordinates (`0.0..=8.0` per axis).
fn zone_direction_at(row: f64, col: f64, cfg: &SensorConfig) -> Vec3 {
    let t = cfg.axis_tangent();
    let u = (2.0 * col / GRID as f64 - 1.0) * t;
    let v = (2.0 * row / GRID as f64 - 1.0) * t;
    Vec3::new(u, v, 1.0).normalize()
}

/// Simulate one capture of a sensor mounted at `sensor_pose`.
pub fn capture_frame<R: Rng + ?Sized>(
    side: SensorSide,
    sensor_pose: &Pose,
    scene: &Scene,
    cfg: &SensorConfig,
    timestamp: f64,
    rng: &mut R,
) -> RawSensorFrame {
    let noise = (cfg.noise_sigma > 0.0).then(|| Normal::new(0.0, cfg.noise_sigma).expect("sigma is finite"));
    let origin = sensor_pose.translation;
    let mut zones = Vec::with_capacity(ZONES);
    for row in 0..GRID {
        for col in 0..GRID {
            let dir = sensor_pose.transform_vector(&zone_direction(row, col, cfg));
            let ray = Ray::new(origin, dir).expect("zone direction is a unit vector");
            let hits = scene.ray_cast_all(&ray, cfg.max_range);
            if hits.is_empty() {
                zones.push(ZoneReading::invalid(cfg.max_range, scene.ambient));
                continue;
            }
            let mut distances: Vec<f64> = hits.iter().take(MAX_TARGETS).map(|h| h.distance).collect();
            if cfg.supersample > 1 {
                if let Some(mean) = supersampled_range(sensor_pose, scene, cfg, row, col) {
                    distances[0] = mean;
                }
            }
            let mut targets = [TargetReading::default(); MAX_TARGETS];
            for (k, (hit, d)) in hits.iter().zip(distances).enumerate() {
                let d = match &noise {
                    Some(n) => (d + n.sample(rng)).max(0.0),
                    None => d,
                };
                let r = d.max(MIN_SIGNAL_DISTANCE);
                targets[k] = TargetReading {
                    distance_m: d,
                    std_dev_m: cfg.noise_sigma,
                    reflectance: hit.reflectance,
                    signal: (SIGNAL_SCALE * hit.reflectance / (r * r)).max(0.0),
                    status: Quality::Valid,
                };
            }
            let n = hits.len().min(MAX_TARGETS);
            targets[..n].sort_by(|a, b| a.distance_m.total_cmp(&b.distance_m));
            zones.push(ZoneReading {
                targets,
                num_targets: n as u8,
                spad_count: DEFAULT_SPAD_COUNT,
                quality: Quality::Valid,
                ambient: scene.ambient,
            });
        }
    }
    RawSensorFrame {
        sensor_id: side,
        zones,
        timestamp,
        max_range_m: cfg.max_range,
    }
}

fn supersampled_range(pose: &Pose, scene: &Scene, cfg: &SensorConfig, row: usize, col: usize) -> Option<f64> {
    let n = cfg.supersample as usize;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            let r = row as f64 + (i as f64 + 0.5) / n as f64;
            let c = col as f64 + (j as f64 + 0.5) / n as f64;
            let dir = pose.transform_vector(&zone_direction_at(r, c, cfg));
            let ray = Ray::new(pose.translation, dir).ok()?;
            if let Some(h) = scene.ray_cast(&ray, cfg.max_range) {
                sum += h.distance;
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

// ---------------------------------------------------------------------------
// Line-delimited record form.

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ZoneRecord {
    targets: Vec<TargetReading>,
    num_targets: u8,
    spad_count: u32,
    quality: Quality,
    ambient: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FrameRecord {
    sensor_id: SensorSide,
    #[serde(default)]
    timestamp: f64,
    #[serde(default = "default_max_range")]
    max_range_m: f64,
    zones: Vec<ZoneRecord>,
}

fn default_max_range() -> f64 {
    SensorConfig::default().max_range
}

impl Serialize for RawSensorFrame {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FrameRecord {
            sensor_id: self.sensor_id,
            timestamp: self.timestamp,
            max_range_m: self.max_range_m,
            zones: self
                .zones
                .iter()
                .map(|z| ZoneRecord {
                    targets: z.populated().to_vec(),
                    num_targets: z.num_targets,
                    spad_count: z.spad_count,
                    quality: z.quality,
                    ambient: z.ambient,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for RawSensorFrame {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = FrameRecord::deserialize(d)?;
        if rec.zones.len() != ZONES {
            return Err(D::Error::custom(format!("zones: expected {ZONES} zones, got {}", rec.zones.len())));
        }
        let mut zones = Vec::with_capacity(ZONES);
        for (i, z) in rec.zones.into_iter().enumerate() {
            if z.targets.len() != z.num_targets as usize || z.targets.len() > MAX_TARGETS {
                return Err(D::Error::custom(format!(
                    "zones[{i}].targets: {} entries but num_targets = {}",
                    z.targets.len(),
                    z.num_targets
                )));
            }
            let mut reading = ZoneReading::invalid(rec.max_range_m, z.ambient);
            if !z.targets.is_empty() {
                reading.targets = [TargetReading::default(); MAX_TARGETS];
                reading.targets[..z.targets.len()].copy_from_slice(&z.targets);
            }
            reading.num_targets = z.num_targets;
            reading.spad_count = z.spad_count;
            reading.quality = z.quality;
            reading.check().map_err(|e| D::Error::custom(format!("zones[{i}]: {e}")))?;
            zones.push(reading);
        }
        Ok(RawSensorFrame {
            sensor_id: rec.sensor_id,
            zones,
            timestamp: rec.timestamp,
            max_range_m: rec.max_range_m,
        })
    }
}
