//! Command-line front end.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::dataset::{generate_trials, rebalance, split, Role, TrialSet};
use crate::evalsel::evaluate;
use crate::experiment::{ablation, partition, run_grid, train_model, write_evaluations};
use crate::features::{featurize_all, write_csv};
use crate::forest::{ForestModel, Hyperparams};
use crate::io::{to_line, to_pretty};
use crate::pipeline::{compare, generate_episodes, write_outcomes_csv, Mode, ModeSpec, PerfectPredictor};
use crate::presets::{load_preset_or_file, parse_features_per_split, ExperimentPreset};
use crate::serve::{Classifier, ServeRequest, Server, DEFAULT_ADDR};

#[derive(Debug, Parser)]
#[command(name = "tofgrasp", version, about = "Grasp stability prediction from simulated in-finger time-of-flight sensing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Built-in preset name or preset file.
    #[arg(long, default_value = "desk")]
    pub config: String,
    /// Overrides the preset seed used by this step.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate labelled grasp trials.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Drop majority-class trials until each object is 50/50.
    Balance {
        #[arg(long)]
        trials: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Stratified split of training-object trials; writes train/,
    /// seen_validation/, validation/ and test/.
    Split {
        #[arg(long)]
        trials: PathBuf,
        /// Training fraction; defaults to the preset's.
        #[arg(long)]
        ratio: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Write the feature matrix as CSV.
    Featurize {
        #[arg(long)]
        trials: PathBuf,
        /// Only trials of objects with this role.
        #[arg(long)]
        role: Option<Role>,
        #[command(flatten)]
        common: Common,
    },
    /// Train one forest on the training-role trials.
    Train {
        #[arg(long)]
        trials: PathBuf,
        /// `default`, or comma-separated `key=value` pairs such as
        /// `n_trees=60,min_samples_split=5,max_depth=16`.
        #[arg(long, default_value = "default")]
        hp: String,
        #[command(flatten)]
        common: Common,
    },
    /// Rebalance, split, grid search on unseen validation objects, evaluate.
    Grid {
        /// Generated trials; generated from the preset when omitted.
        #[arg(long)]
        trials: Option<PathBuf>,
        /// Also compare single- and two-reading models.
        #[arg(long)]
        ablation: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Score a model on the trials of one role.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trials: PathBuf,
        #[arg(long, default_value = "test")]
        role: Role,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Baseline versus prediction-filtered grasp execution.
    Pipeline {
        #[arg(long)]
        model: PathBuf,
        /// Objects the episodes are drawn from.
        #[arg(long, default_value = "test")]
        role: Role,
        #[command(flatten)]
        common: Common,
    },
    /// Classify newline-delimited requests over TCP.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, env = "TOFGRASP_ADDR", default_value = DEFAULT_ADDR)]
        addr: String,
        #[arg(long, env = "TOFGRASP_THRESHOLD", default_value_t = 0.6)]
        threshold: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Classify one request record read from a file.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

/// `default` or `key=value,...` over the default hyperparameters.
pub fn parse_hyperparams(spec: &str, seed: u64) -> anyhow::Result<Hyperparams> {
    let mut hp = Hyperparams { seed, ..Hyperparams::default() };
    if spec == "default" {
        return Ok(hp);
    }
    for pair in spec.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = pair.split_once('=').ok_or_else(|| anyhow!("hyperparameter `{pair}`: expected key=value"))?;
        let int = || v.parse::<usize>().with_context(|| format!("hyperparameter `{k}`"));
        match k.trim() {
            "n_trees" => hp.n_trees = int()?,
            "min_samples_split" => hp.min_samples_split = int()?,
            "max_depth" => hp.max_depth = if v == "none" { None } else { Some(int()?) },
            "features_per_split" => hp.features_per_split = parse_features_per_split(v)?,
            "bootstrap" => hp.bootstrap = v.parse().with_context(|| "hyperparameter `bootstrap`")?,
            "seed" => hp.seed = v.parse().with_context(|| "hyperparameter `seed`")?,
            other => bail!("unknown hyperparameter `{other}`"),
        }
    }
    hp.validate()?;
    Ok(hp)
}

fn out_path(c: &Common) -> anyhow::Result<&Path> {
    c.out.as_deref().ok_or_else(|| anyhow!("--out is required"))
}

fn preset(c: &Common) -> anyhow::Result<ExperimentPreset> {
    load_preset_or_file(&c.config).with_context(|| format!("loading config `{}`", c.config))
}

fn load_trials(p: &Path) -> anyhow::Result<TrialSet> {
    TrialSet::load(p).with_context(|| format!("loading trials from {}", p.display()))
}

fn load_model(p: &Path) -> anyhow::Result<ForestModel> {
    ForestModel::load(p).with_context(|| format!("loading model {}", p.display()))
}

fn generate(preset: &ExperimentPreset, seed: u64) -> anyhow::Result<TrialSet> {
    Ok(generate_trials(&preset.zoo, &preset.roster, &preset.generation, seed)?)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen { common } => {
            let p = preset(&common)?;
            let out = out_path(&common)?;
            let set = generate(&p, common.seed.unwrap_or(p.seeds.generate))?;
            set.save(out)?;
            println!("{} trials, success rate {:.3}, written to {}", set.trials.len(), set.success_rate(), out.display());
        }
        Command::Balance { trials, common } => {
            let p = preset(&common)?;
            let out = out_path(&common)?;
            let (set, report) = rebalance(&load_trials(&trials)?, common.seed.unwrap_or(p.seeds.rebalance));
            set.save(out)?;
            fs::write(out.join("balance.json"), to_pretty(&report)?)?;
            println!("{} trials kept, {} objects excluded", set.trials.len(), report.excluded.len());
        }
        Command::Split { trials, ratio, common } => {
            let p = preset(&common)?;
            let out = out_path(&common)?;
            let set = load_trials(&trials)?;
            let (train, seen) = split(&set, ratio.unwrap_or(p.split_ratio), common.seed.unwrap_or(p.seeds.split))?;
            train.save(&out.join("train"))?;
            seen.save(&out.join("seen_validation"))?;
            set.with_role(Role::Validation).save(&out.join("validation"))?;
            set.with_role(Role::Test).save(&out.join("test"))?;
            println!("train {}, seen validation {}", train.trials.len(), seen.trials.len());
        }
        Command::Featurize { trials, role, common } => {
            let p = preset(&common)?;
            let out = out_path(&common)?;
            let mut set = load_trials(&trials)?;
            if let Some(r) = role {
                set = set.with_role(r);
            }
            let m = featurize_all(&set.trials, &p.features)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            write_csv(BufWriter::new(fs::File::create(out)?), &m, &p.features)?;
            println!("{} rows x {} features", m.len(), p.features.len());
        }
        Command::Train { trials, hp, common } => {
            let p = preset(&common)?;
            let out = out_path(&common)?;
            let hp = parse_hyperparams(&hp, common.seed.unwrap_or(p.seeds.train))?;
            let model = train_model(&load_trials(&trials)?, &hp, &p.features)?;
            model.save(out)?;
            println!("model {} written to {}", model.hash()?, out.display());
        }
        Command::Grid { trials, ablation: with_ablation, common } => {
            let p = preset(&common)?;
            let out = out_path(&common)?;
            let set = match trials {
                Some(t) => load_trials(&t)?,
                None => generate(&p, p.seeds.generate)?,
            };
            if with_ablation && !set.manifest.second_reading {
                bail!("--ablation needs trials generated with second_reading = true");
            }
            let part = partition(&set, p.seeds.rebalance, p.seeds.split, p.split_ratio)?;
            let m = part.featurize(&p.features)?;
            let configs = p.grid.configs(common.seed.unwrap_or(p.seeds.train));
            let outcome = run_grid(&m, &configs, p.threshold)?;
            outcome.write(out)?;
            fs::write(out.join("balance.json"), to_pretty(&part.balance)?)?;
            let s = outcome.summary();
            println!(
                "chosen {:?}; validation AUC {:.4}, accuracy {:.4}; test accuracy {:.4}",
                s.chosen,
                s.validation_auc.unwrap_or(f64::NAN),
                s.validation_accuracy,
                s.test_accuracy
            );
            if with_ablation {
                let r = ablation(&part, &s.chosen, &p.features, p.threshold)?;
                fs::write(out.join("ablation.json"), to_pretty(&r)?)?;
                println!(
                    "ablation: single {:.4}, two readings {:.4}, |difference| {:.4}",
                    r.single_validation_auc, r.two_reading_validation_auc, r.validation_auc_difference
                );
            }
        }
        Command::Eval { model, trials, role, threshold, common } => {
            let p = preset(&common)?;
            let out = out_path(&common)?;
            let model = load_model(&model)?;
            let set = load_trials(&trials)?.with_role(role);
            let m = featurize_all(&set.trials, &model.feature_config)?;
            let e = evaluate(&role.to_string(), &model, &m, threshold.unwrap_or(p.threshold))?;
            write_evaluations(out, std::slice::from_ref(&e))?;
            fs::write(out.join("eval.json"), to_pretty(&e)?)?;
            println!("{role}: n {}, AUC {}, accuracy {:.4}", e.n, e.auc.map_or("n/a".into(), |a| format!("{a:.4}")), e.accuracy);
            print!("{}", e.confusion.table());
        }
        Command::Pipeline { model, role, common } => {
            let p = preset(&common)?;
            let out = out_path(&common)?;
            let model = load_model(&model)?;
            let seed = common.seed.unwrap_or(p.seeds.pipeline);
            let episodes = generate_episodes(&p.objects_with_role(role), &p.pipeline, &p.generation, seed)?;
            let filtered = |predictor| Mode::Filtered {
                predictor,
                threshold: p.pipeline.threshold,
                exhaustion: p.pipeline.exhaustion,
            };
            let modes = [
                ModeSpec { name: "baseline".into(), mode: Mode::Baseline },
                ModeSpec { name: "filtered".into(), mode: filtered(&model) },
                ModeSpec { name: "perfect".into(), mode: filtered(&PerfectPredictor) },
            ];
            let report = compare(&episodes, &modes, &p.generation, seed)?;
            fs::create_dir_all(out)?;
            write_outcomes_csv(BufWriter::new(fs::File::create(out.join("outcomes.csv"))?), &report)?;
            let mut summary = report.clone();
            let latency = std::mem::take(&mut summary.latency);
            fs::write(out.join("summary.json"), to_pretty(&summary)?)?;
            fs::write(out.join("latency.json"), to_pretty(&latency)?)?;
            for m in &report.modes {
                println!("{:<10} success {:.3}, disturbances {}", m.name, m.success_rate, m.disturbances);
            }
        }
        Command::Serve { model, addr, threshold, common } => {
            let classifier = Arc::new(Classifier::new(load_model(&model)?, threshold)?);
            let server = Server::bind(&addr, classifier).with_context(|| format!("binding {addr}"))?;
            if let Some(out) = &common.out {
                fs::write(out, format!("{}\n", server.local_addr()))?;
            }
            eprintln!("listening on {}", server.local_addr());
            server.wait();
        }
        Command::Classify { model, frame, threshold, common } => {
            let p = preset(&common)?;
            let classifier = Classifier::new(load_model(&model)?, threshold.unwrap_or(p.threshold))?;
            let text = fs::read_to_string(&frame).with_context(|| format!("reading {}", frame.display()))?;
            let req: ServeRequest = serde_json::from_str(&text).with_context(|| format!("parsing {}", frame.display()))?;
            let resp = classifier.classify(&req)?;
            println!("p_success={:.16e} predicted={}", resp.p_success, resp.predicted);
            if let Some(out) = &common.out {
                fs::write(out, to_line(&resp)? + "\n")?;
            }
        }
    }
    Ok(())
}
