#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use tofgrasp::dataset::{generate_trials, TrialSet};
use tofgrasp::presets::{parse_preset, ExperimentPreset};
use tofgrasp::serve::ServeRequest;

/// Four objects, small grid and few episodes.
pub const TINY_PRESET: &str = r#"
name = "tiny"
second_reading = false

[seeds]
generate = 11
rebalance = 1
split = 2
train = 3
pipeline = 4

[grid]
n_trees = [5, 10]
min_samples_split = [5]
max_depth = [8]

[pipeline]
episodes = 12

[[roster]]
object = "cylinder"
role = "train"
trials = 40

[[roster]]
object = "box"
role = "train"
trials = 40

[[roster]]
object = "sugar_box"
role = "validation"
trials = 30

[[roster]]
object = "mug"
role = "test"
trials = 30
"#;

pub fn tiny_preset() -> ExperimentPreset {
    parse_preset(TINY_PRESET, None).expect("tiny preset parses")
}

pub fn tiny_preset_with(extra: &str) -> ExperimentPreset {
    parse_preset(&TINY_PRESET.replace("second_reading = false", extra), None).expect("tiny preset parses")
}

pub fn write_tiny_preset(dir: &Path) -> PathBuf {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, TINY_PRESET).expect("preset written");
    p
}

pub fn tiny_trials() -> &'static TrialSet {
    static SET: OnceLock<TrialSet> = OnceLock::new();
    SET.get_or_init(|| {
        let p = tiny_preset();
        generate_trials(&p.zoo, &p.roster, &p.generation, p.seeds.generate).expect("tiny trials")
    })
}

pub fn request(set: &TrialSet, i: usize) -> ServeRequest {
    let t = &set.trials[i];
    ServeRequest {
        request_id: Some(t.trial_id.into()),
        joint_angles: t.joint_angles,
        frames: [t.frame_left.clone(), t.frame_right.clone()],
        threshold: None,
        second: None,
    }
}
