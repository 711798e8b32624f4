//! Cleaning of raw sensor frames into fixed-layout feature vectors.
//!
//! Single-reading layout (1,028 values):
//! `joint_0..joint_3`, then for `left` and `right` each of the 64 zones in
//! row-major order with the fields of [`ZONE_FIELDS`]. Two-reading vectors
//! append the second frame pair's zone fields and then its joint angles.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::GraspTrial;
use crate::error::{Error, Result};
use crate::io::sha256_hex;
use crate::tof::{Quality, RawSensorFrame, FIELDS_PER_TARGET, MAX_TARGETS, ZONES};

pub const LAYOUT_VERSION: u32 = 1;
pub const ZONE_FIELDS: [&str; 8] = [
    "distance_m",
    "std_dev_m",
    "reflectance",
    "signal",
    "num_targets",
    "spad_count",
    "quality_flag",
    "ambient",
];
pub const FIELDS_PER_ZONE: usize = ZONE_FIELDS.len();
pub const JOINTS: usize = 4;
pub const FRAME_FEATURES: usize = ZONES * FIELDS_PER_ZONE;
pub const SINGLE_LEN: usize = JOINTS + 2 * FRAME_FEATURES;
pub const TWO_READING_LEN: usize = SINGLE_LEN + 2 * FRAME_FEATURES + JOINTS;
pub const DEFAULT_CAP: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadingMode {
    #[default]
    SingleReading,
    TwoReadings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointSource {
    #[default]
    PreClose,
    PostClose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub cap: f64,
    pub mode: ReadingMode,
    pub joint_source: JointSource,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CAP,
            mode: ReadingMode::SingleReading,
            joint_source: JointSource::PreClose,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cap > 0.0 && self.cap.is_finite()) {
            return Err(Error::Config(format!("distance cap {} must be positive", self.cap)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        match self.mode {
            ReadingMode::SingleReading => SINGLE_LEN,
            ReadingMode::TwoReadings => TWO_READING_LEN,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Column names in vector order.
    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..JOINTS).map(|j| format!("joint_{j}")).collect();
        let frames: &[&str] = match self.mode {
            ReadingMode::SingleReading => &["left", "right"],
            ReadingMode::TwoReadings => &["left", "right", "left2", "right2"],
        };
        for side in frames {
            for z in 0..ZONES {
                for f in ZONE_FIELDS {
                    out.push(format!("{side}_z{z:02}_{f}"));
                }
            }
        }
        if self.mode == ReadingMode::TwoReadings {
            out.extend((0..JOINTS).map(|j| format!("joint2_{j}")));
        }
        out
    }

    /// Identifies the layout and cleaning parameters; models record it so a
    /// vector built differently is rejected.
    pub fn layout_hash(&self) -> String {
        let descriptor = format!(
            "tofgrasp-features v{LAYOUT_VERSION}; cap={:e}; mode={:?}; joints={:?}; fields={}; columns={}",
            self.cap,
            self.mode,
            self.joint_source,
            ZONE_FIELDS.join(","),
            self.names().join(",")
        );
        sha256_hex(descriptor.as_bytes())
    }
}

/// A 64 x 8 zone table.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanFrame {
    pub values: Vec<f64>,
    /// Per-target scalars discarded (targets 2..4 of every zone).
    pub dropped: usize,
}

/// Keep only the nearest target of each zone and cap its distance.
pub fn reduce_frame(raw: &RawSensorFrame, cap: f64) -> Result<CleanFrame> {
    if raw.zones.len() != ZONES {
        return Err(Error::Frame(format!("zones: expected {ZONES} zones, got {}", raw.zones.len())));
    }
    let mut values = Vec::with_capacity(FRAME_FEATURES);
    for z in &raw.zones {
        let t = &z.targets[0];
        let valid = z.quality == Quality::Valid && z.num_targets > 0 && t.status == Quality::Valid;
        if valid {
            values.extend_from_slice(&[
                t.distance_m.min(cap),
                t.std_dev_m,
                t.reflectance,
                t.signal,
                z.num_targets as f64,
                z.spad_count as f64,
                1.0,
                z.ambient,
            ]);
        } else {
            values.extend_from_slice(&[cap, 0.0, 0.0, 0.0, 0.0, z.spad_count as f64, 0.0, z.ambient]);
        }
    }
    Ok(CleanFrame {
        values,
        dropped: ZONES * (MAX_TARGETS - 1) * FIELDS_PER_TARGET,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub dropped: usize,
    pub config: FeatureConfig,
}

/// Vector from explicit frames and joint angles.
pub fn featurize_frames(
    joints: &[f64; 4],
    left: &RawSensorFrame,
    right: &RawSensorFrame,
    second: Option<(&[f64; 4], &RawSensorFrame, &RawSensorFrame)>,
    cfg: &FeatureConfig,
) -> Result<FeatureVector> {
    cfg.validate()?;
    let mut values = Vec::with_capacity(cfg.len());
    values.extend_from_slice(joints);
    let mut dropped = 0;
    let mut push = |f: &RawSensorFrame, values: &mut Vec<f64>| -> Result<()> {
        let c = reduce_frame(f, cfg.cap)?;
        values.extend_from_slice(&c.values);
        dropped += c.dropped;
        Ok(())
    };
    push(left, &mut values)?;
    push(right, &mut values)?;
    if cfg.mode == ReadingMode::TwoReadings {
        let (j2, l2, r2) = second.ok_or_else(|| Error::Missing("two-reading mode needs the second frame pair".into()))?;
        push(l2, &mut values)?;
        push(r2, &mut values)?;
        values.extend_from_slice(j2);
    }
    debug_assert_eq!(values.len(), cfg.len());
    Ok(FeatureVector {
        values,
        dropped,
        config: *cfg,
    })
}

pub fn featurize(trial: &GraspTrial, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let joints = match cfg.joint_source {
        JointSource::PreClose => &trial.joint_angles,
        JointSource::PostClose => &trial.post_close_joint_angles,
    };
    let second = trial.second.as_ref().map(|s| (&s.joint_angles, &s.frame_left, &s.frame_right));
    featurize_frames(joints, &trial.frame_left, &trial.frame_right, second, cfg)
        .map_err(|e| match e {
            Error::Missing(m) => Error::Missing(format!("trial {}: {m}", trial.trial_id)),
            other => other,
        })
}

/// Row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub config: FeatureConfig,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub object_ids: Vec<String>,
    pub trial_ids: Vec<u64>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn featurize_all(trials: &[GraspTrial], cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    use rayon::prelude::*;
    let rows = trials
        .par_iter()
        .map(|t| featurize(t, cfg).map(|v| v.values))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix {
        config: *cfg,
        rows,
        labels: trials.iter().map(|t| t.label).collect(),
        object_ids: trials.iter().map(|t| t.object_id.clone()).collect(),
        trial_ids: trials.iter().map(|t| t.trial_id).collect(),
    })
}

/// Delimited export: header row, then `trial_id,object_id,label,<features>`.
pub fn write_csv<W: Write>(mut w: W, m: &FeatureMatrix, cfg: &FeatureConfig) -> Result<()> {
    write!(w, "trial_id,object_id,label")?;
    for n in cfg.names() {
        write!(w, ",{n}")?;
    }
    writeln!(w)?;
    for i in 0..m.len() {
        write!(w, "{},{},{}", m.trial_ids[i], m.object_ids[i], m.labels[i] as u8)?;
        for v in &m.rows[i] {
            write!(w, ",{v:.16e}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
