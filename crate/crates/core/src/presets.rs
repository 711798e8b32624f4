//! Experiment presets: object roster with roles and counts, seeds, and the
//! generation, feature, grid and pipeline settings.
//!
//! Preset files are TOML. `[gripper]`, `[sensor]`, `[lift]`, `[features]` and
//! `[pipeline]` tables override individual fields of the defaults. The
//! gripper table is in centimetres and degrees (see [`GripperFile`]); the
//! others are in SI units and radians.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::{check_roster_disjoint, GenerationConfig, Role, RosterEntry};
use crate::error::{Error, Result};
use crate::evalsel::GridSpec;
use crate::features::FeatureConfig;
use crate::forest::FeaturesPerSplit;
use crate::gripper::GripperFile;
use crate::pipeline::PipelineConfig;
use crate::zoo::{parse_zoo, ObjectSpec};

pub const BUILTIN_ZOO: &str = include_str!("../presets/zoo.toml");
const BUILTIN_PRESETS: [(&str, &str); 2] = [
    ("desk", include_str!("../presets/desk.toml")),
    ("paper_scale", include_str!("../presets/paper_scale.toml")),
];

pub fn preset_names() -> Vec<&'static str> {
    BUILTIN_PRESETS.iter().map(|(n, _)| *n).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub generate: u64,
    pub rebalance: u64,
    pub split: u64,
    pub train: u64,
    pub pipeline: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: String,
    pub description: String,
    pub zoo: Vec<ObjectSpec>,
    pub roster: Vec<RosterEntry>,
    pub seeds: Seeds,
    pub split_ratio: f64,
    pub threshold: f64,
    pub generation: GenerationConfig,
    pub features: FeatureConfig,
    pub grid: GridSpec,
    pub pipeline: PipelineConfig,
}

impl ExperimentPreset {
    pub fn objects_with_role(&self, role: Role) -> Vec<ObjectSpec> {
        self.roster
            .iter()
            .filter(|e| e.role == role)
            .filter_map(|e| self.zoo.iter().find(|o| o.id == e.object_id).cloned())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        check_roster_disjoint(&self.roster)?;
        for e in &self.roster {
            if e.requested == 0 {
                return Err(Error::Config(format!("`{}`: count must be at least 1", e.object_id)));
            }
            if !self.zoo.iter().any(|o| o.id == e.object_id) {
                return Err(Error::Config(format!("`{}` is not in the object zoo", e.object_id)));
            }
        }
        for role in [Role::Train, Role::Validation, Role::Test] {
            if !self.roster.iter().any(|e| e.role == role) {
                return Err(Error::Config(format!("roster has no {role} objects")));
            }
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config("split_ratio must lie in (0, 1)".into()));
        }
        self.generation.gripper.validate()?;
        self.generation.sensor.validate()?;
        self.features.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum DepthEntry {
    Limit(usize),
    Word(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridRecord {
    n_trees: Vec<usize>,
    min_samples_split: Vec<usize>,
    max_depth: Vec<DepthEntry>,
    #[serde(default)]
    features_per_split: Vec<String>,
    #[serde(default = "yes")]
    bootstrap: bool,
}

fn yes() -> bool {
    true
}

impl GridRecord {
    fn resolve(self) -> Result<GridSpec> {
        let max_depth = self
            .max_depth
            .into_iter()
            .map(|d| match d {
                DepthEntry::Limit(n) => Ok(Some(n)),
                DepthEntry::Word(w) if w == "none" => Ok(None),
                DepthEntry::Word(w) => Err(Error::Config(format!("max_depth entry `{w}`: use an integer or \"none\""))),
            })
            .collect::<Result<_>>()?;
        let features_per_split = if self.features_per_split.is_empty() {
            vec![FeaturesPerSplit::SqrtD]
        } else {
            self.features_per_split.iter().map(|s| parse_features_per_split(s)).collect::<Result<_>>()?
        };
        let g = GridSpec {
            n_trees: self.n_trees,
            min_samples_split: self.min_samples_split,
            max_depth,
            features_per_split,
            bootstrap: self.bootstrap,
        };
        if g.configs(0).is_empty() {
            return Err(Error::Config("hyperparameter grid is empty".into()));
        }
        Ok(g)
    }
}

/// `sqrt_d`, `all`, or a fraction such as `0.1`.
pub fn parse_features_per_split(s: &str) -> Result<FeaturesPerSplit> {
    match s {
        "sqrt_d" | "sqrt" => Ok(FeaturesPerSplit::SqrtD),
        "all" => Ok(FeaturesPerSplit::All),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|f| *f > 0.0 && *f <= 1.0)
            .map(FeaturesPerSplit::Fraction)
            .ok_or_else(|| Error::Config(format!("features_per_split `{other}`"))),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RosterRecord {
    object: String,
    role: Role,
    trials: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PresetFile {
    name: String,
    #[serde(default)]
    description: String,
    /// `builtin`, or a zoo file path relative to the preset file.
    #[serde(default = "builtin")]
    zoo: String,
    seeds: Seeds,
    #[serde(default = "default_ratio")]
    split_ratio: f64,
    #[serde(default = "default_threshold")]
    threshold: f64,
    #[serde(default = "yes")]
    second_reading: bool,
    roster: Vec<RosterRecord>,
    grid: Option<GridRecord>,
    gripper: Option<toml::Value>,
    sensor: Option<toml::Value>,
    lift: Option<toml::Value>,
    features: Option<toml::Value>,
    pipeline: Option<toml::Value>,
}

fn builtin() -> String {
    "builtin".into()
}

fn default_ratio() -> f64 {
    0.8
}

fn default_threshold() -> f64 {
    0.6
}

/// Apply the fields present in `patch` on top of `base`.
fn overlay<T: Serialize + DeserializeOwned>(base: &T, patch: Option<toml::Value>, what: &str) -> Result<T> {
    let Some(patch) = patch else {
        return Ok(serde_json::from_value(serde_json::to_value(base)?)?);
    };
    let mut merged = serde_json::to_value(base)?;
    let patch = serde_json::to_value(patch)?;
    let (Some(m), Some(p)) = (merged.as_object_mut(), patch.as_object()) else {
        return Err(Error::Config(format!("[{what}] must be a table")));
    };
    for (k, v) in p {
        if !m.contains_key(k) {
            return Err(Error::Config(format!("[{what}] has no field `{k}`")));
        }
        m.insert(k.clone(), v.clone());
    }
    serde_json::from_value(merged).map_err(|e| Error::Config(format!("[{what}]: {e}")))
}

/// Parse preset text. Relative zoo paths resolve against `base_dir`.
pub fn parse_preset(text: &str, base_dir: Option<&Path>) -> Result<ExperimentPreset> {
    let f: PresetFile = toml::from_str(text)?;
    let zoo_text = if f.zoo == "builtin" {
        BUILTIN_ZOO.to_string()
    } else {
        let p = base_dir.map_or_else(|| Path::new(&f.zoo).to_path_buf(), |d| d.join(&f.zoo));
        std::fs::read_to_string(&p).map_err(|e| Error::Config(format!("zoo file {}: {e}", p.display())))?
    };
    let defaults = GenerationConfig::default();
    let generation = GenerationConfig {
        gripper: overlay(&GripperFile::from_config(&defaults.gripper)?, f.gripper, "gripper")?.to_config()?,
        sensor: overlay(&defaults.sensor, f.sensor, "sensor")?,
        lift: overlay(&defaults.lift, f.lift, "lift")?,
        second_reading: f.second_reading,
    };
    let preset = ExperimentPreset {
        name: f.name,
        description: f.description,
        zoo: parse_zoo(&zoo_text)?,
        roster: f
            .roster
            .into_iter()
            .map(|r| RosterEntry {
                object_id: r.object,
                role: r.role,
                requested: r.trials,
            })
            .collect(),
        seeds: f.seeds,
        split_ratio: f.split_ratio,
        threshold: f.threshold,
        generation,
        features: overlay(&FeatureConfig::default(), f.features, "features")?,
        grid: f.grid.map(GridRecord::resolve).transpose()?.unwrap_or_default(),
        pipeline: overlay(&PipelineConfig::default(), f.pipeline, "pipeline")?,
    };
    preset.validate()?;
    Ok(preset)
}

pub fn load_preset(name: &str) -> Result<ExperimentPreset> {
    let text = BUILTIN_PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::UnknownPreset(format!("`{name}` (available: {})", preset_names().join(", "))))?;
    parse_preset(text, None)
}

/// A built-in preset name, or a path to a preset file.
pub fn load_preset_or_file(name_or_path: &str) -> Result<ExperimentPreset> {
    if preset_names().contains(&name_or_path) {
        return load_preset(name_or_path);
    }
    let p = Path::new(name_or_path);
    if p.exists() {
        return parse_preset(&std::fs::read_to_string(p)?, p.parent());
    }
    load_preset(name_or_path)
}
