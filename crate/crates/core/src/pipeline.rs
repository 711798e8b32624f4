//! Grasp execution loop with optional pre-contact stability filtering, and
//! paired experiments comparing it with plain top-candidate execution.

use std::time::Instant;

use rand::seq::IndexedRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{capture_pair, place_trial, sample_poses, GenerationConfig, PoseOffset};
use crate::error::{Error, Result};
use crate::features::{featurize_frames, ReadingMode};
use crate::forest::ForestModel;
use crate::gripper::{execute_grasp, GraspOutcome, GripperState};
use crate::rng::{stream, Domain};
use crate::scene::{Pose, Scene};
use crate::tof::RawSensorFrame;
use crate::zoo::ObjectSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspCandidate {
    /// Palm pose in the world frame.
    pub pose: Pose,
    pub planner_score: f64,
}

/// One scene and its ranked candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub episode_id: u64,
    pub object_id: String,
    pub scene: Scene,
    /// Sorted by descending planner score.
    pub candidates: Vec<GraspCandidate>,
    pub offsets: Vec<PoseOffset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exhaustion {
    /// Run the candidate with the highest predicted probability.
    #[default]
    ExecuteBestScored,
    /// End the episode without touching the object.
    Abstain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub episodes: usize,
    pub candidates: usize,
    /// Standard deviation of the planner-score noise.
    pub planner_noise: f64,
    pub exhaustion: Exhaustion,
    pub threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            episodes: 200,
            candidates: 5,
            planner_noise: 0.15,
            exhaustion: Exhaustion::ExecuteBestScored,
            threshold: 0.6,
        }
    }
}

/// Planner score of an offset: 1 at the nominal pose, falling linearly with
/// the normalised offset on each axis.
fn nominal_score(o: &PoseOffset, spec: &ObjectSpec) -> f64 {
    let r = &spec.ranges;
    let norm = |v: f64, (lo, hi): (f64, f64)| {
        let span = lo.abs().max(hi.abs());
        if span > 0.0 {
            v.abs() / span
        } else {
            0.0
        }
    };
    1.0 - (norm(o.x, r.x) + norm(o.y, r.y) + norm(o.z, r.z) + norm(o.roll, r.roll) + norm(o.pitch, r.pitch)) / 5.0
}

/// Synthetic episodes: each picks an object and a planar orientation, then
/// draws distinct jittered candidates from the object's offset grid.
pub fn generate_episodes(objects: &[ObjectSpec], cfg: &PipelineConfig, gen: &GenerationConfig, seed: u64) -> Result<Vec<Episode>> {
    if objects.is_empty() {
        return Err(Error::Config("no objects for pipeline episodes".into()));
    }
    if cfg.candidates == 0 {
        return Err(Error::Config("candidate count must be at least 1".into()));
    }
    (0..cfg.episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Domain::Episode, i);
            let spec = objects.choose(&mut rng).expect("non-empty");
            let yaw = *spec.ranges.yaw.choose(&mut rng).expect("yaw set validated");
            let mut ranges = spec.ranges.clone();
            ranges.yaw = vec![yaw];
            let offsets = sample_poses(&ranges, cfg.candidates, &mut rng)?;
            let noise = Normal::new(0.0, cfg.planner_noise.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
            let mut ranked: Vec<(GraspCandidate, PoseOffset)> = offsets
                .into_iter()
                .map(|o| {
                    let (_, palm) = place_trial(spec, &o, &gen.gripper);
                    let score = nominal_score(&o, spec) + if cfg.planner_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    (GraspCandidate { pose: palm, planner_score: score }, o)
                })
                .collect();
            ranked.sort_by(|a, b| b.0.planner_score.total_cmp(&a.0.planner_score));
            let (scene, _) = place_trial(spec, &ranked[0].1, &gen.gripper);
            Ok(Episode {
                episode_id: i,
                object_id: spec.id.clone(),
                scene,
                candidates: ranked.iter().map(|r| r.0).collect(),
                offsets: ranked.into_iter().map(|r| r.1).collect(),
            })
        })
        .collect()
}

/// What a predictor sees at one candidate before any contact.
pub struct Observation<'a> {
    pub state: &'a GripperState,
    pub left: &'a RawSensorFrame,
    pub right: &'a RawSensorFrame,
    pub scene: &'a Scene,
    pub config: &'a GenerationConfig,
}

pub trait Predictor: Sync {
    fn predict_proba(&self, obs: &Observation) -> Result<f64>;
}

impl Predictor for ForestModel {
    fn predict_proba(&self, obs: &Observation) -> Result<f64> {
        if self.feature_config.mode == ReadingMode::TwoReadings {
            return Err(Error::Config("the pipeline needs a single-reading model".into()));
        }
        let v = featurize_frames(&obs.state.joint_angles, obs.left, obs.right, None, &self.feature_config)?;
        ForestModel::predict_proba(self, &v)
    }
}

/// Scores 1 when a simulated grasp on a private copy of the scene would
/// succeed, else 0. Used to measure the ceiling of filtering.
pub struct PerfectPredictor;

impl Predictor for PerfectPredictor {
    fn predict_proba(&self, obs: &Observation) -> Result<f64> {
        let probe = obs.scene.clone();
        let out = execute_grasp(obs.state, &probe, &obs.config.gripper, &obs.config.lift);
        Ok(if out.success { 1.0 } else { 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub episode_id: u64,
    pub object_id: String,
    pub executed_candidate_index: Option<usize>,
    /// One entry per candidate visited, in visiting order.
    pub predicted: Vec<bool>,
    pub probabilities: Vec<f64>,
    /// Oracle result of the executed grasp.
    pub actual: Option<bool>,
    pub candidates_skipped: usize,
    /// A physical grasp attempt failed.
    pub disturbed_object: bool,
    /// Object contacts made before the executed grasp.
    pub contacts_before_execution: usize,
    /// Object contact events in the episode.
    pub contacts: usize,
    #[serde(skip)]
    pub latencies_ms: Vec<f64>,
}

impl PipelineOutcome {
    pub fn success(&self) -> bool {
        self.actual == Some(true)
    }
}

/// The only place a grasp touches the object.
struct Executor<'a> {
    episode: &'a Episode,
    gen: &'a GenerationConfig,
    contacts: usize,
}

impl Executor<'_> {
    fn execute(&mut self, k: usize) -> GraspOutcome {
        let state = GripperState::open(self.episode.candidates[k].pose, &self.gen.gripper);
        let out = execute_grasp(&state, &self.episode.scene, &self.gen.gripper, &self.gen.lift);
        if !out.contacts.is_empty() {
            self.contacts += 1;
        }
        out
    }
}

/// Execute the top-ranked candidate.
pub fn run_baseline(episode: &Episode, gen: &GenerationConfig) -> Result<PipelineOutcome> {
    if episode.candidates.is_empty() {
        return Err(Error::Config("episode has no candidates".into()));
    }
    let mut ex = Executor { episode, gen, contacts: 0 };
    let out = ex.execute(0);
    Ok(PipelineOutcome {
        episode_id: episode.episode_id,
        object_id: episode.object_id.clone(),
        executed_candidate_index: Some(0),
        predicted: Vec::new(),
        probabilities: Vec::new(),
        actual: Some(out.success),
        candidates_skipped: 0,
        disturbed_object: !out.success,
        contacts_before_execution: 0,
        contacts: ex.contacts,
        latencies_ms: Vec::new(),
    })
}

/// Visit candidates in rank order, sense and predict at each, and execute
/// the first predicted success. Sensor noise comes from stream
/// `(noise_seed, episode_id)`.
pub fn run_filtered(
    episode: &Episode,
    gen: &GenerationConfig,
    predictor: &dyn Predictor,
    threshold: f64,
    exhaustion: Exhaustion,
    noise_seed: u64,
) -> Result<PipelineOutcome> {
    if episode.candidates.is_empty() {
        return Err(Error::Config("episode has no candidates".into()));
    }
    let mut rng = stream(noise_seed, Domain::TrialNoise, episode.episode_id);
    let mut probabilities = Vec::new();
    let mut predicted = Vec::new();
    let mut latencies_ms = Vec::new();
    let mut chosen = None;
    for (k, c) in episode.candidates.iter().enumerate() {
        let state = GripperState::open(c.pose, &gen.gripper);
        let (left, right) = capture_pair(&state, &episode.scene, gen, 0.0, &mut rng);
        let obs = Observation {
            state: &state,
            left: &left,
            right: &right,
            scene: &episode.scene,
            config: gen,
        };
        let t0 = Instant::now();
        let p = predictor.predict_proba(&obs)?;
        latencies_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        probabilities.push(p);
        predicted.push(p >= threshold);
        if p >= threshold {
            chosen = Some(k);
            break;
        }
    }
    let visited = probabilities.len();
    if chosen.is_none() && exhaustion == Exhaustion::ExecuteBestScored {
        let mut best = 0;
        for k in 1..visited {
            if probabilities[k] > probabilities[best] {
                best = k;
            }
        }
        chosen = Some(best);
    }
    let mut ex = Executor { episode, gen, contacts: 0 };
    let actual = chosen.map(|k| ex.execute(k).success);
    Ok(PipelineOutcome {
        episode_id: episode.episode_id,
        object_id: episode.object_id.clone(),
        executed_candidate_index: chosen,
        predicted,
        probabilities,
        actual,
        candidates_skipped: chosen.unwrap_or(visited),
        disturbed_object: actual == Some(false),
        contacts_before_execution: 0,
        contacts: ex.contacts,
        latencies_ms,
    })
}

/// Whether any candidate of the episode succeeds under the oracle.
pub fn has_feasible_candidate(episode: &Episode, gen: &GenerationConfig) -> bool {
    episode.candidates.iter().any(|c| {
        let state = GripperState::open(c.pose, &gen.gripper);
        execute_grasp(&state, &episode.scene, &gen.gripper, &gen.lift).success
    })
}

pub enum Mode<'a> {
    Baseline,
    Filtered {
        predictor: &'a dyn Predictor,
        threshold: f64,
        exhaustion: Exhaustion,
    },
}

pub struct ModeSpec<'a> {
    pub name: String,
    pub mode: Mode<'a>,
}

/// Deterministic summary of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub name: String,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub disturbances: usize,
    pub executed_failures: usize,
    pub abstentions: usize,
    pub mean_contacts: f64,
    pub mean_candidates_visited: f64,
}

/// Wall-clock prediction timing; not reproducible across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub name: String,
    pub predictions: usize,
    pub mean_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub episodes: usize,
    pub feasible_episodes: usize,
    pub feasible_fraction: f64,
    pub modes: Vec<ModeSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub latency: Vec<LatencySummary>,
    #[serde(skip)]
    pub outcomes: Vec<Vec<PipelineOutcome>>,
}

pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Run every mode on the same episodes.
pub fn compare(episodes: &[Episode], modes: &[ModeSpec], gen: &GenerationConfig, noise_seed: u64) -> Result<ComparisonReport> {
    let feasible = episodes.par_iter().filter(|e| has_feasible_candidate(e, gen)).count();
    let mut summaries = Vec::new();
    let mut latency = Vec::new();
    let mut all = Vec::new();
    for spec in modes {
        let outcomes: Vec<PipelineOutcome> = episodes
            .par_iter()
            .map(|e| match &spec.mode {
                Mode::Baseline => run_baseline(e, gen),
                Mode::Filtered { predictor, threshold, exhaustion } => run_filtered(e, gen, *predictor, *threshold, *exhaustion, noise_seed),
            })
            .collect::<Result<_>>()?;
        let n = outcomes.len().max(1) as f64;
        let successes = outcomes.iter().filter(|o| o.success()).count();
        let executed_failures = outcomes.iter().filter(|o| o.actual == Some(false)).count();
        summaries.push(ModeSummary {
            name: spec.name.clone(),
            episodes: outcomes.len(),
            successes,
            success_rate: successes as f64 / n,
            disturbances: outcomes.iter().filter(|o| o.disturbed_object).count(),
            executed_failures,
            abstentions: outcomes.iter().filter(|o| o.executed_candidate_index.is_none()).count(),
            mean_contacts: outcomes.iter().map(|o| o.contacts as f64).sum::<f64>() / n,
            mean_candidates_visited: outcomes.iter().map(|o| o.predicted.len().max(1) as f64).sum::<f64>() / n,
        });
        let lat: Vec<f64> = outcomes.iter().flat_map(|o| o.latencies_ms.iter().copied()).collect();
        if !lat.is_empty() {
            latency.push(LatencySummary {
                name: spec.name.clone(),
                predictions: lat.len(),
                mean_ms: lat.iter().sum::<f64>() / lat.len() as f64,
                p99_ms: percentile(&lat, 0.99),
                max_ms: lat.iter().copied().fold(0.0, f64::max),
            });
        }
        all.push(outcomes);
    }
    Ok(ComparisonReport {
        episodes: episodes.len(),
        feasible_episodes: feasible,
        feasible_fraction: feasible as f64 / episodes.len().max(1) as f64,
        modes: summaries,
        latency,
        outcomes: all,
    })
}

/// Per-episode table: one row per (mode, episode).
pub fn write_outcomes_csv<W: std::io::Write>(mut w: W, report: &ComparisonReport) -> Result<()> {
    writeln!(w, "mode,episode_id,object_id,executed_candidate_index,candidates_visited,candidates_skipped,success,disturbed_object,contacts,max_probability")?;
    for (summary, outcomes) in report.modes.iter().zip(&report.outcomes) {
        for o in outcomes {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                summary.name,
                o.episode_id,
                o.object_id,
                o.executed_candidate_index.map_or(String::new(), |k| k.to_string()),
                o.predicted.len(),
                o.candidates_skipped,
                o.success(),
                o.disturbed_object,
                o.contacts,
                o.probabilities.iter().copied().reduce(f64::max).map_or(String::new(), |p| format!("{p:.6}"))
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Scores a fixed probability per visit, for exercising the control flow.
pub struct ScriptedPredictor(pub Vec<f64>, pub std::sync::atomic::AtomicUsize);

impl ScriptedPredictor {
    pub fn new(probabilities: Vec<f64>) -> Self {
        Self(probabilities, std::sync::atomic::AtomicUsize::new(0))
    }
}

impl Predictor for ScriptedPredictor {
    fn predict_proba(&self, _: &Observation) -> Result<f64> {
        let i = self.1.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        Ok(self.0[i.min(self.0.len() - 1)])
    }
}
