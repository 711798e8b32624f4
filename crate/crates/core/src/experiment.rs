//! The full training protocol on a generated trial set: rebalance, split,
//! featurize, grid search on unseen-object validation, and evaluation.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{rebalance, split, RebalanceReport, Role, TrialSet};
use crate::error::{Error, Result};
use crate::evalsel::{evaluate, grid_search, roc_svg, write_confusion_csv, write_grid_csv, write_per_object_csv, Evaluation, GridSearchResult};
use crate::features::{featurize_all, FeatureConfig, FeatureMatrix, ReadingMode};
use crate::forest::{fit_forest, Dataset, ForestModel, Hyperparams};
use crate::io;
use crate::presets::ExperimentPreset;

/// Trial sets for each protocol stage.
#[derive(Debug, Clone)]
pub struct Partition {
    pub balanced: TrialSet,
    pub balance: RebalanceReport,
    pub train: TrialSet,
    /// Held-out trials of the training objects.
    pub seen_validation: TrialSet,
    pub validation: TrialSet,
    pub test: TrialSet,
}

pub fn partition(set: &TrialSet, rebalance_seed: u64, split_seed: u64, ratio: f64) -> Result<Partition> {
    let (balanced, balance) = rebalance(set, rebalance_seed);
    let (train, seen_validation) = split(&balanced, ratio, split_seed)?;
    let validation = balanced.with_role(Role::Validation);
    let test = balanced.with_role(Role::Test);
    for (name, s) in [("train", &train), ("validation", &validation), ("test", &test)] {
        if s.trials.is_empty() {
            return Err(Error::Missing(format!("no {name} trials after rebalancing")));
        }
    }
    Ok(Partition {
        balanced,
        balance,
        train,
        seen_validation,
        validation,
        test,
    })
}

#[derive(Debug, Clone)]
pub struct Matrices {
    pub train: FeatureMatrix,
    pub seen_validation: FeatureMatrix,
    pub validation: FeatureMatrix,
    pub test: FeatureMatrix,
}

impl Partition {
    pub fn featurize(&self, cfg: &FeatureConfig) -> Result<Matrices> {
        Ok(Matrices {
            train: featurize_all(&self.train.trials, cfg)?,
            seen_validation: featurize_all(&self.seen_validation.trials, cfg)?,
            validation: featurize_all(&self.validation.trials, cfg)?,
            test: featurize_all(&self.test.trials, cfg)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub search: GridSearchResult,
    pub model: ForestModel,
    /// Seen-object validation, unseen validation, unseen test.
    pub evaluations: Vec<Evaluation>,
}

impl GridOutcome {
    pub fn evaluation(&self, name: &str) -> Option<&Evaluation> {
        self.evaluations.iter().find(|e| e.name == name)
    }

    pub fn summary(&self) -> Summary {
        let acc = |n: &str| self.evaluation(n).map(|e| e.accuracy);
        let val = acc("validation").unwrap_or(f64::NAN);
        let test = acc("test").unwrap_or(f64::NAN);
        Summary {
            chosen: self.search.rows[self.search.chosen].hyperparams,
            threshold: self.search.threshold,
            validation_auc: self.evaluation("validation").and_then(|e| e.auc),
            validation_accuracy: val,
            test_auc: self.evaluation("test").and_then(|e| e.auc),
            test_accuracy: test,
            seen_validation_accuracy: acc("seen_validation"),
            test_validation_gap: (test - val).abs(),
        }
    }

    /// grid.csv, model.bin, summary.json, confusion.csv, per_object.csv, roc.svg.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_grid_csv(BufWriter::new(fs::File::create(dir.join("grid.csv"))?), &self.search)?;
        self.model.save(&dir.join("model.bin"))?;
        fs::write(dir.join("summary.json"), io::to_pretty(&self.summary())?)?;
        write_evaluations(dir, &self.evaluations)
    }
}

pub fn write_evaluations(dir: &Path, evals: &[Evaluation]) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_confusion_csv(BufWriter::new(fs::File::create(dir.join("confusion.csv"))?), evals)?;
    write_per_object_csv(BufWriter::new(fs::File::create(dir.join("per_object.csv"))?), evals)?;
    let curves: Vec<(&str, &crate::evalsel::RocCurve, f64)> = evals
        .iter()
        .filter_map(|e| Some((e.name.as_str(), e.roc.as_ref()?, e.auc?)))
        .collect();
    fs::write(dir.join("roc.svg"), roc_svg(&curves))?;
    let tables: String = evals.iter().map(|e| format!("{}\n{}\n", e.name, e.confusion.table())).collect();
    fs::write(dir.join("confusion.txt"), tables)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub chosen: Hyperparams,
    pub threshold: f64,
    pub validation_auc: Option<f64>,
    pub validation_accuracy: f64,
    pub test_auc: Option<f64>,
    pub test_accuracy: f64,
    pub seen_validation_accuracy: Option<f64>,
    pub test_validation_gap: f64,
}

/// Grid search, then score the chosen model on every held-out set.
pub fn run_grid(m: &Matrices, configs: &[Hyperparams], threshold: f64) -> Result<GridOutcome> {
    let seen = (!m.seen_validation.is_empty()).then_some(&m.seen_validation);
    let (search, model) = grid_search(configs, &m.train, &m.validation, seen, threshold)?;
    let mut evaluations = Vec::new();
    if let Some(s) = seen {
        evaluations.push(evaluate("seen_validation", &model, s, threshold)?);
    }
    evaluations.push(evaluate("validation", &model, &m.validation, threshold)?);
    evaluations.push(evaluate("test", &model, &m.test, threshold)?);
    Ok(GridOutcome { search, model, evaluations })
}

/// Generation through grid search with the preset's seeds and settings.
pub fn run_preset_grid(preset: &ExperimentPreset, set: &TrialSet) -> Result<(Partition, GridOutcome)> {
    let p = partition(set, preset.seeds.rebalance, preset.seeds.split, preset.split_ratio)?;
    let m = p.featurize(&preset.features)?;
    let out = run_grid(&m, &preset.grid.configs(preset.seeds.train), preset.threshold)?;
    Ok((p, out))
}

pub fn train_model(set: &TrialSet, hp: &Hyperparams, cfg: &FeatureConfig) -> Result<ForestModel> {
    let train = set.with_role(Role::Train);
    let m = featurize_all(&train.trials, cfg)?;
    fit_forest(&Dataset::from_rows(&m.rows, &m.labels)?, hp, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub hyperparams: Hyperparams,
    pub single_validation_auc: f64,
    pub two_reading_validation_auc: f64,
    pub single_test_auc: f64,
    pub two_reading_test_auc: f64,
    pub validation_auc_difference: f64,
}

/// Same hyperparameters with and without the second reading appended.
pub fn ablation(p: &Partition, hp: &Hyperparams, base: &FeatureConfig, threshold: f64) -> Result<AblationReport> {
    let mut aucs = Vec::new();
    for mode in [ReadingMode::SingleReading, ReadingMode::TwoReadings] {
        let cfg = FeatureConfig { mode, ..*base };
        let m = p.featurize(&cfg)?;
        let (_, model) = grid_search(&[*hp], &m.train, &m.validation, None, threshold)?;
        let val = evaluate("validation", &model, &m.validation, threshold)?;
        let test = evaluate("test", &model, &m.test, threshold)?;
        let auc = |e: &Evaluation| e.auc.ok_or_else(|| Error::Degenerate(format!("{} set has one class", e.name)));
        aucs.push((auc(&val)?, auc(&test)?));
    }
    Ok(AblationReport {
        hyperparams: *hp,
        single_validation_auc: aucs[0].0,
        two_reading_validation_auc: aucs[1].0,
        single_test_auc: aucs[0].1,
        two_reading_test_auc: aucs[1].1,
        validation_auc_difference: (aucs[1].0 - aucs[0].0).abs(),
    })
}
