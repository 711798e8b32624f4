//! Labeled grasp trials: pose sampling, generation, balancing, splitting and
//! on-disk persistence.
//!
//! A trial set on disk is a directory holding `manifest.json` and
//! `trials.jsonl` (one trial per line).

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gripper::{execute_grasp, forward_kinematics, partially_closed, FailureReason, GripperConfig, GripperState, LiftMotion};
use crate::io;
use crate::rng::{stream, Domain};
use crate::scene::{Pose, Scene, SceneObject, Vec3};
use crate::tof::{capture_frame, RawSensorFrame, SensorConfig, SensorSide};
use crate::zoo::ObjectSpec;

pub const FORMAT_VERSION: u32 = 1;
/// Delay between the first and second reading in the two-reading protocol.
pub const SECOND_READING_DELAY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Validation,
    Test,
}

impl std::fmt::Display for Role {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Validation => "validation",
            Role::Test => "test",
        })
    }
}

impl std::str::FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "validation" | "val" => Ok(Role::Validation),
            "test" => Ok(Role::Test),
            other => Err(Error::Config(format!("unknown role `{other}`"))),
        }
    }
}

/// Gripper offset from an object's nominal grasp pose, SI units.
///
/// `x` moves along the approach axis, `y` along the closing axis and `z`
/// vertically. `roll` turns about the approach axis, `pitch` tilts the
/// approach (negative points it toward the table) and `yaw` is the object's
/// planar orientation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseOffset {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

/// Discrete grid of gripper offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRanges {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
    pub roll: (f64, f64),
    pub pitch: (f64, f64),
    pub yaw: Vec<f64>,
    pub translation_step: f64,
    pub angle_step: f64,
}

impl Default for PoseRanges {
    /// The box ranges: +-2 cm on every axis, roll +-35 deg, pitch -35..0 deg,
    /// yaw in {0, 15, 30, 45} deg, stepped at 1 cm / 5 deg.
    fn default() -> Self {
        let d = f64::to_radians;
        Self {
            x: (-0.02, 0.02),
            y: (-0.02, 0.02),
            z: (-0.02, 0.02),
            roll: (d(-35.0), d(35.0)),
            pitch: (d(-35.0), 0.0),
            yaw: vec![0.0, d(15.0), d(30.0), d(45.0)],
            translation_step: 0.01,
            angle_step: d(5.0),
        }
    }
}

fn axis_values((lo, hi): (f64, f64), step: f64) -> Vec<f64> {
    if hi - lo <= 1e-12 {
        return vec![lo];
    }
    let k = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=k).map(|i| (lo + i as f64 * step).min(hi)).collect()
}

impl PoseRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("x", self.x), ("y", self.y), ("z", self.z), ("roll", self.roll), ("pitch", self.pitch)] {
            if !(lo <= hi) {
                return Err(Error::Config(format!("pose range {name}: min {lo} > max {hi}")));
            }
        }
        if self.yaw.is_empty() {
            return Err(Error::Config("yaw set must not be empty".into()));
        }
        if !(self.translation_step > 0.0 && self.angle_step > 0.0) {
            return Err(Error::Config("grid steps must be positive".into()));
        }
        Ok(())
    }

    fn axes(&self) -> [Vec<f64>; 6] {
        [
            axis_values(self.x, self.translation_step),
            axis_values(self.y, self.translation_step),
            axis_values(self.z, self.translation_step),
            axis_values(self.roll, self.angle_step),
            axis_values(self.pitch, self.angle_step),
            self.yaw.clone(),
        ]
    }

    pub fn cardinality(&self) -> usize {
        self.axes().iter().map(Vec::len).product()
    }

    pub fn contains(&self, o: &PoseOffset) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        inside(o.x, self.x)
            && inside(o.y, self.y)
            && inside(o.z, self.z)
            && inside(o.roll, self.roll)
            && inside(o.pitch, self.pitch)
            && self.yaw.contains(&o.yaw)
    }

    fn decode(axes: &[Vec<f64>; 6], mut idx: usize) -> PoseOffset {
        let mut v = [0.0; 6];
        for (k, axis) in axes.iter().enumerate().rev() {
            v[k] = axis[idx % axis.len()];
            idx /= axis.len();
        }
        PoseOffset {
            x: v[0],
            y: v[1],
            z: v[2],
            roll: v[3],
            pitch: v[4],
            yaw: v[5],
        }
    }
}

/// Draw `n` distinct grid cells uniformly at random.
pub fn sample_poses<R: Rng + ?Sized>(ranges: &PoseRanges, n: usize, rng: &mut R) -> Result<Vec<PoseOffset>> {
    ranges.validate()?;
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let card = ranges.cardinality();
    if n > card {
        return Err(Error::GridExhausted {
            requested: n,
            available: card,
        });
    }
    let axes = ranges.axes();
    Ok(index::sample(rng, card, n).into_iter().map(|i| PoseRanges::decode(&axes, i)).collect())
}

/// Gripper rotation at a zero offset: approach along world `+x`, closing axis
/// along world `+y`, pad width along world `+z`.
fn nominal_rotation() -> UnitQuaternion<f64> {
    let m = Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

/// Scene and palm pose for one trial. The object rests on the plane `z = 0`
/// with its center of mass above the world origin.
pub fn place_trial(object: &ObjectSpec, offset: &PoseOffset, gripper: &GripperConfig) -> (Scene, Pose) {
    let yaw = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), offset.yaw);
    let object_pose = Pose::new(Vec3::new(0.0, 0.0, object.shape.depth_below_origin()), yaw);
    let mut scene = Scene {
        objects: vec![SceneObject {
            id: object.id.clone(),
            shape: object.shape.clone(),
            pose: object_pose,
        }],
        support_plane: Some(0.0),
        ..Scene::default()
    };
    scene.ambient = object.ambient.unwrap_or(scene.ambient);
    let tilt = UnitQuaternion::from_euler_angles(offset.roll, -offset.pitch, 0.0);
    let tcp = Pose::new(Vec3::new(offset.x, offset.y, object.grasp_height + offset.z), tilt * nominal_rotation());
    let palm = tcp.compose(&Pose::from_translation(-gripper.grasp_center_offset()));
    (scene, palm)
}

/// Frames and joint angles captured at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub joint_angles: [f64; 4],
    pub frame_left: RawSensorFrame,
    pub frame_right: RawSensorFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspTrial {
    pub trial_id: u64,
    pub object_id: String,
    pub offset: PoseOffset,
    /// Palm pose in the world frame.
    pub base_pose: Pose,
    /// Open-pose joint angles at the time of the primary reading.
    pub joint_angles: [f64; 4],
    /// Joint angles once the fingers stopped closing.
    pub post_close_joint_angles: [f64; 4],
    pub frame_left: RawSensorFrame,
    pub frame_right: RawSensorFrame,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<Reading>,
    pub label: bool,
    pub failure_reason: FailureReason,
}

impl GraspTrial {
    pub fn check(&self) -> Result<()> {
        if self.frame_left.sensor_id != SensorSide::Left || self.frame_right.sensor_id != SensorSide::Right {
            return Err(Error::Frame(format!("trial {}: frames must be (left, right)", self.trial_id)));
        }
        self.frame_left.check()?;
        self.frame_right.check()?;
        if self.label != (self.failure_reason == FailureReason::None) {
            return Err(Error::Config(format!("trial {}: label disagrees with failure reason", self.trial_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub object_id: String,
    pub role: Role,
    /// Trials requested at generation time.
    pub requested: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub generator_seed: u64,
    pub roster: Vec<RosterEntry>,
    /// Trials currently in the set, per object.
    pub counts: BTreeMap<String, usize>,
    pub translation_step: f64,
    pub angle_step: f64,
    pub second_reading: bool,
    pub config_hashes: BTreeMap<String, String>,
    /// Processing applied after generation, in order.
    #[serde(default)]
    pub history: Vec<String>,
}

impl Manifest {
    pub fn role_of(&self, object_id: &str) -> Option<Role> {
        self.roster.iter().find(|e| e.object_id == object_id).map(|e| e.role)
    }

    pub fn objects_with_role(&self, role: Role) -> Vec<String> {
        self.roster.iter().filter(|e| e.role == role).map(|e| e.object_id.clone()).collect()
    }
}

/// Reject rosters where an object appears more than once (and hence possibly
/// under two roles).
pub fn check_roster_disjoint(roster: &[RosterEntry]) -> Result<()> {
    let mut seen: BTreeMap<&str, Role> = BTreeMap::new();
    for e in roster {
        if let Some(prev) = seen.insert(&e.object_id, e.role) {
            return Err(Error::RosterOverlap(format!("`{}` listed as {prev} and {}", e.object_id, e.role)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub manifest: Manifest,
    pub trials: Vec<GraspTrial>,
}

impl TrialSet {
    pub fn validate(&self) -> Result<()> {
        check_roster_disjoint(&self.manifest.roster)?;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in &self.trials {
            if self.manifest.role_of(&t.object_id).is_none() {
                return Err(Error::Config(format!("trial {} uses `{}`, absent from the manifest", t.trial_id, t.object_id)));
            }
            *counts.entry(t.object_id.clone()).or_default() += 1;
        }
        if counts != self.manifest.counts {
            return Err(Error::Config("manifest counts disagree with the trial records".into()));
        }
        Ok(())
    }

    pub fn with_role(&self, role: Role) -> TrialSet {
        let keep: BTreeSet<String> = self.manifest.objects_with_role(role).into_iter().collect();
        let mut manifest = self.manifest.clone();
        manifest.roster.retain(|e| keep.contains(&e.object_id));
        manifest.history.push(format!("role:{role}"));
        self.derive(manifest, self.trials.iter().filter(|t| keep.contains(&t.object_id)).cloned().collect())
    }

    fn derive(&self, mut manifest: Manifest, trials: Vec<GraspTrial>) -> TrialSet {
        manifest.counts = count_by_object(&trials);
        TrialSet { manifest, trials }
    }

    pub fn success_rate(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        self.trials.iter().filter(|t| t.label).count() as f64 / self.trials.len() as f64
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.json"), io::to_pretty(&self.manifest)?)?;
        io::write_lines(BufWriter::new(File::create(dir.join("trials.jsonl"))?), &self.trials)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<TrialSet> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        let trials: Vec<GraspTrial> = io::read_lines(BufReader::new(File::open(dir.join("trials.jsonl"))?))?;
        let set = TrialSet { manifest, trials };
        set.validate()?;
        for t in &set.trials {
            t.check()?;
        }
        Ok(set)
    }
}

fn count_by_object(trials: &[GraspTrial]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in trials {
        *counts.entry(t.object_id.clone()).or_default() += 1;
    }
    counts
}

/// What the generator needs besides the object zoo.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub gripper: GripperConfig,
    pub sensor: SensorConfig,
    pub lift: LiftMotion,
    pub second_reading: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            gripper: GripperConfig::default(),
            sensor: SensorConfig::default(),
            lift: LiftMotion::default(),
            second_reading: true,
        }
    }
}

/// Run one trial: capture both sensors at the open pose, optionally again
/// partway through closing, then close and label.
pub fn run_trial(trial_id: u64, object: &ObjectSpec, offset: &PoseOffset, cfg: &GenerationConfig, seed: u64) -> GraspTrial {
    let mut rng = stream(seed, Domain::TrialNoise, trial_id);
    let (scene, palm) = place_trial(object, offset, &cfg.gripper);
    let state = GripperState::open(palm, &cfg.gripper);
    let (frame_left, frame_right) = capture_pair(&state, &scene, cfg, 0.0, &mut rng);
    let outcome = execute_grasp(&state, &scene, &cfg.gripper, &cfg.lift);
    let second = cfg.second_reading.then(|| {
        let joints = partially_closed(&state, &outcome, SECOND_READING_DELAY, &cfg.gripper);
        let moved = GripperState {
            base_pose: palm,
            joint_angles: joints,
        };
        let (l, r) = capture_pair(&moved, &scene, cfg, SECOND_READING_DELAY, &mut rng);
        Reading {
            joint_angles: joints,
            frame_left: l,
            frame_right: r,
        }
    });
    GraspTrial {
        trial_id,
        object_id: object.id.clone(),
        offset: *offset,
        base_pose: palm,
        joint_angles: state.joint_angles,
        post_close_joint_angles: outcome.final_joint_angles,
        frame_left,
        frame_right,
        second,
        label: outcome.success,
        failure_reason: outcome.failure_reason,
    }
}

pub fn capture_pair<R: Rng + ?Sized>(
    state: &GripperState,
    scene: &Scene,
    cfg: &GenerationConfig,
    timestamp: f64,
    rng: &mut R,
) -> (RawSensorFrame, RawSensorFrame) {
    let fk = forward_kinematics(state, &cfg.gripper);
    let l = capture_frame(SensorSide::Left, &fk.left.sensor, scene, &cfg.sensor, timestamp, rng);
    let r = capture_frame(SensorSide::Right, &fk.right.sensor, scene, &cfg.sensor, timestamp, rng);
    (l, r)
}

/// Generate the trials for a roster. Object `k` of the roster draws its poses
/// from stream `(seed, k)`; trial `i` draws its sensor noise from `(seed, i)`.
pub fn generate_trials(zoo: &[ObjectSpec], roster: &[RosterEntry], cfg: &GenerationConfig, seed: u64) -> Result<TrialSet> {
    check_roster_disjoint(roster)?;
    cfg.gripper.validate()?;
    cfg.sensor.validate()?;
    let mut jobs = Vec::new();
    let mut steps = None;
    for (k, entry) in roster.iter().enumerate() {
        if entry.requested == 0 {
            return Err(Error::Config(format!("`{}`: trial count must be at least 1", entry.object_id)));
        }
        let spec = zoo
            .iter()
            .find(|o| o.id == entry.object_id)
            .ok_or_else(|| Error::Config(format!("`{}` is not in the object zoo", entry.object_id)))?;
        let mut rng = stream(seed, Domain::PoseSampling, k as u64);
        for offset in sample_poses(&spec.ranges, entry.requested, &mut rng)? {
            jobs.push((spec, offset));
        }
        steps.get_or_insert((spec.ranges.translation_step, spec.ranges.angle_step));
    }
    let trials: Vec<GraspTrial> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, (spec, offset))| run_trial(i as u64, spec, offset, cfg, seed))
        .collect();

    let used: Vec<&ObjectSpec> = roster.iter().filter_map(|e| zoo.iter().find(|o| o.id == e.object_id)).collect();
    let mut config_hashes = BTreeMap::new();
    config_hashes.insert("zoo".to_string(), io::content_hash(&used.iter().map(|o| o.record()).collect::<Vec<_>>())?);
    config_hashes.insert("gripper".to_string(), io::content_hash(&cfg.gripper)?);
    config_hashes.insert("sensor".to_string(), io::content_hash(&cfg.sensor)?);
    config_hashes.insert("lift".to_string(), io::content_hash(&cfg.lift)?);
    let (translation_step, angle_step) = steps.unwrap_or((0.0, 0.0));
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        generator_seed: seed,
        roster: roster.to_vec(),
        counts: count_by_object(&trials),
        translation_step,
        angle_step,
        second_reading: cfg.second_reading,
        config_hashes,
        history: Vec::new(),
    };
    Ok(TrialSet { manifest, trials })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceEntry {
    pub object_id: String,
    pub successes: usize,
    pub failures: usize,
    /// Trials kept per class.
    pub kept_per_class: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RebalanceReport {
    pub objects: Vec<BalanceEntry>,
    /// Objects with a single label class; all their trials were dropped.
    pub excluded: Vec<String>,
}

/// Randomly drop majority-class trials until every object has equally many
/// successes and failures. Surviving trials keep their order.
pub fn rebalance(set: &TrialSet, seed: u64) -> (TrialSet, RebalanceReport) {
    let mut keep = vec![false; set.trials.len()];
    let mut report = RebalanceReport::default();
    for (k, entry) in set.manifest.roster.iter().enumerate() {
        let idx: Vec<usize> = (0..set.trials.len()).filter(|&i| set.trials[i].object_id == entry.object_id).collect();
        if idx.is_empty() {
            continue;
        }
        let (pos, neg): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| set.trials[i].label);
        let n = pos.len().min(neg.len());
        report.objects.push(BalanceEntry {
            object_id: entry.object_id.clone(),
            successes: pos.len(),
            failures: neg.len(),
            kept_per_class: n,
        });
        if n == 0 {
            report.excluded.push(entry.object_id.clone());
            continue;
        }
        let mut rng = stream(seed, Domain::Rebalance, k as u64);
        for class in [&pos, &neg] {
            for j in index::sample(&mut rng, class.len(), n) {
                keep[class[j]] = true;
            }
        }
    }
    let trials = set.trials.iter().zip(&keep).filter(|(_, k)| **k).map(|(t, _)| t.clone()).collect();
    let mut manifest = set.manifest.clone();
    manifest.history.push(format!("rebalance:seed={seed}"));
    (set.derive(manifest, trials), report)
}

/// Stratified split of the train-role trials into (train, seen-object
/// validation). Each (object, label) cell contributes `round(ratio * n)` trials
/// to the training side.
pub fn split(set: &TrialSet, ratio: f64, seed: u64) -> Result<(TrialSet, TrialSet)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} outside (0, 1)")));
    }
    let train_role = set.with_role(Role::Train);
    let mut to_train = vec![false; train_role.trials.len()];
    for (k, entry) in train_role.manifest.roster.iter().enumerate() {
        for (c, label) in [true, false].into_iter().enumerate() {
            let mut cell: Vec<usize> = (0..train_role.trials.len())
                .filter(|&i| train_role.trials[i].object_id == entry.object_id && train_role.trials[i].label == label)
                .collect();
            let n_train = (ratio * cell.len() as f64).round() as usize;
            let mut rng = stream(seed, Domain::Split, 2 * k as u64 + c as u64);
            cell.shuffle(&mut rng);
            for &i in &cell[..n_train] {
                to_train[i] = true;
            }
        }
    }
    let pick = |want: bool| -> Vec<GraspTrial> {
        train_role.trials.iter().zip(&to_train).filter(|(_, s)| **s == want).map(|(t, _)| t.clone()).collect()
    };
    let mut m_train = train_role.manifest.clone();
    m_train.history.push(format!("split:train:ratio={ratio}:seed={seed}"));
    let mut m_val = train_role.manifest.clone();
    m_val.history.push(format!("split:seen_validation:ratio={ratio}:seed={seed}"));
    Ok((train_role.derive(m_train, pick(true)), train_role.derive(m_val, pick(false))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn point_ranges() -> PoseRanges {
        PoseRanges {
            x: (0.01, 0.01),
            y: (0.0, 0.0),
            z: (-0.01, -0.01),
            roll: (0.1, 0.1),
            pitch: (0.0, 0.0),
            yaw: vec![0.2],
            translation_step: 0.01,
            angle_step: 0.1,
        }
    }

    #[test]
    fn collapsed_ranges_give_the_point() {
        let mut rng = stream(0, Domain::PoseSampling, 0);
        let p = sample_poses(&point_ranges(), 1, &mut rng).unwrap();
        assert_eq!(
            p,
            vec![PoseOffset {
                x: 0.01,
                y: 0.0,
                z: -0.01,
                roll: 0.1,
                pitch: 0.0,
                yaw: 0.2
            }]
        );
        assert!(matches!(
            sample_poses(&point_ranges(), 2, &mut rng),
            Err(Error::GridExhausted { requested: 2, available: 1 })
        ));
    }

    #[test]
    fn default_grid_respects_table_ranges() {
        let r = PoseRanges::default();
        assert_eq!(r.cardinality(), 5 * 5 * 5 * 15 * 8 * 4);
        let mut rng = stream(3, Domain::PoseSampling, 0);
        let d = f64::to_radians;
        for o in sample_poses(&r, 2000, &mut rng).unwrap() {
            assert!(o.x.abs() <= 0.02 && o.y.abs() <= 0.02 && o.z.abs() <= 0.02);
            assert!(o.roll >= d(-35.0) && o.roll <= d(35.0));
            assert!(o.pitch >= d(-35.0) && o.pitch <= 0.0);
            assert!([0.0, 15.0, 30.0, 45.0].iter().any(|y| (d(*y) - o.yaw).abs() < 1e-15));
            assert!(r.contains(&o));
        }
    }

    #[test]
    fn exhausting_the_grid_visits_every_cell_once() {
        let r = PoseRanges {
            x: (-0.01, 0.01),
            y: (0.0, 0.01),
            yaw: vec![0.0, 1.0],
            roll: (0.0, 0.0),
            pitch: (0.0, 0.0),
            ..PoseRanges::default()
        };
        let card = r.cardinality();
        assert_eq!(card, 3 * 2 * 5 * 2);
        let mut rng = stream(1, Domain::PoseSampling, 0);
        let all = sample_poses(&r, card, &mut rng).unwrap();
        let mut keys: Vec<String> = all.iter().map(|o| format!("{o:?}")).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), card);
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(sample_poses(&PoseRanges::default(), 0, &mut stream(0, Domain::PoseSampling, 0)).is_err());
    }

    #[test]
    fn overlapping_roster_rejected() {
        let roster = vec![
            RosterEntry {
                object_id: "a".into(),
                role: Role::Train,
                requested: 1,
            },
            RosterEntry {
                object_id: "a".into(),
                role: Role::Test,
                requested: 1,
            },
        ];
        assert!(matches!(check_roster_disjoint(&roster), Err(Error::RosterOverlap(_))));
    }
}
