mod common;

use tofgrasp::dataset::Role;
use tofgrasp::gripper::{execute_grasp, GripperState};
use tofgrasp::pipeline::{
    compare, generate_episodes, has_feasible_candidate, run_baseline, run_filtered, Episode, Exhaustion, Mode, ModeSpec, PerfectPredictor,
    PipelineConfig, ScriptedPredictor,
};
use tofgrasp::presets::ExperimentPreset;

fn episodes(n: usize, seed: u64) -> (ExperimentPreset, Vec<Episode>) {
    let p = common::tiny_preset();
    let cfg = PipelineConfig { episodes: n, ..p.pipeline.clone() };
    let mut objects = p.objects_with_role(Role::Train);
    objects.extend(p.objects_with_role(Role::Test));
    let e = generate_episodes(&objects, &cfg, &p.generation, seed).unwrap();
    (p, e)
}

fn oracle(p: &ExperimentPreset, e: &Episode, k: usize) -> bool {
    let g = &p.generation;
    execute_grasp(&GripperState::open(e.candidates[k].pose, &g.gripper), &e.scene, &g.gripper, &g.lift).success
}

#[test]
fn episodes_are_ranked_and_reproducible() {
    let (_, a) = episodes(10, 7);
    let (_, b) = episodes(10, 7);
    assert_eq!(a, b);
    for e in &a {
        assert_eq!(e.candidates.len(), 5);
        assert!(e.candidates.windows(2).all(|w| w[0].planner_score >= w[1].planner_score));
    }
    let (_, c) = episodes(10, 8);
    assert_ne!(a, c);
}

#[test]
fn baseline_executes_the_top_candidate() {
    let (p, eps) = episodes(10, 1);
    for e in &eps {
        let o = run_baseline(e, &p.generation).unwrap();
        assert_eq!(o.executed_candidate_index, Some(0));
        assert_eq!(o.actual, Some(oracle(&p, e, 0)));
        assert_eq!(o.disturbed_object, !o.success());
        assert_eq!(o.contacts_before_execution, 0);
        assert!(o.contacts <= 1);
    }
}

#[test]
fn filtered_executes_first_predicted_success() {
    let (p, eps) = episodes(6, 2);
    for e in &eps {
        let s = ScriptedPredictor::new(vec![0.1, 0.3, 0.9, 0.95, 0.2]);
        let o = run_filtered(e, &p.generation, &s, 0.6, Exhaustion::Abstain, 0).unwrap();
        assert_eq!(o.executed_candidate_index, Some(2));
        assert_eq!(o.predicted, [false, false, true]);
        assert_eq!(o.candidates_skipped, 2);
        assert_eq!(o.actual, Some(oracle(&p, e, 2)));
        assert_eq!(o.disturbed_object, o.actual == Some(false));
        assert_eq!(o.contacts_before_execution, 0);
    }
}

#[test]
fn exhaustion_policies() {
    let (p, eps) = episodes(4, 3);
    for e in &eps {
        let s = ScriptedPredictor::new(vec![0.1, 0.5, 0.2, 0.5, 0.0]);
        let o = run_filtered(e, &p.generation, &s, 0.6, Exhaustion::ExecuteBestScored, 0).unwrap();
        assert_eq!(o.executed_candidate_index, Some(1));
        assert_eq!(o.predicted.len(), 5);
        assert_eq!(o.actual, Some(oracle(&p, e, 1)));

        let s = ScriptedPredictor::new(vec![0.0]);
        let o = run_filtered(e, &p.generation, &s, 0.6, Exhaustion::Abstain, 0).unwrap();
        assert_eq!(o.executed_candidate_index, None);
        assert_eq!(o.actual, None);
        assert!(!o.disturbed_object);
        assert_eq!(o.contacts, 0);
        assert_eq!(o.candidates_skipped, 5);
    }
}

#[test]
fn empty_candidate_list_is_rejected() {
    let (p, mut eps) = episodes(1, 4);
    eps[0].candidates.clear();
    assert!(run_baseline(&eps[0], &p.generation).is_err());
    assert!(run_filtered(&eps[0], &p.generation, &PerfectPredictor, 0.6, Exhaustion::Abstain, 0).is_err());
    let cfg = PipelineConfig { candidates: 0, ..PipelineConfig::default() };
    assert!(generate_episodes(&p.zoo[..1], &cfg, &p.generation, 0).is_err());
    assert!(generate_episodes(&[], &PipelineConfig::default(), &p.generation, 0).is_err());
}

#[test]
fn perfect_predictor_reaches_the_feasible_fraction() {
    let (p, eps) = episodes(30, 5);
    let g = &p.generation;
    for e in &eps {
        let o = run_filtered(e, g, &PerfectPredictor, 0.6, Exhaustion::ExecuteBestScored, 0).unwrap();
        assert_eq!(o.success(), has_feasible_candidate(e, g));
        if let Some(k) = o.executed_candidate_index {
            assert!((0..k).all(|j| !oracle(&p, e, j)));
        }
    }
    let modes = [
        ModeSpec { name: "baseline".into(), mode: Mode::Baseline },
        ModeSpec {
            name: "perfect".into(),
            mode: Mode::Filtered {
                predictor: &PerfectPredictor,
                threshold: 0.6,
                exhaustion: Exhaustion::Abstain,
            },
        },
    ];
    let r = compare(&eps, &modes, g, 9).unwrap();
    assert_eq!(r.modes[1].successes, r.feasible_episodes);
    assert!(r.modes[1].success_rate >= r.modes[0].success_rate);
    assert_eq!(r.modes[1].disturbances, 0);
    assert_eq!(r.modes[1].abstentions, r.episodes - r.feasible_episodes);
    assert_eq!(r.modes[0].disturbances, r.modes[0].executed_failures);
    assert_eq!(compare(&eps, &modes, g, 9).unwrap().modes, r.modes);
}

#[test]
fn two_reading_model_is_refused() {
    let p = common::tiny_preset_with("second_reading = true");
    let set = tofgrasp::dataset::generate_trials(&p.zoo, &p.roster[..2], &p.generation, 1).unwrap();
    let features = tofgrasp::features::FeatureConfig {
        mode: tofgrasp::features::ReadingMode::TwoReadings,
        ..p.features
    };
    let hp = tofgrasp::forest::Hyperparams {
        n_trees: 3,
        ..Default::default()
    };
    let model = tofgrasp::experiment::train_model(&set, &hp, &features).unwrap();
    let (_, eps) = episodes(1, 6);
    let err = run_filtered(&eps[0], &p.generation, &model, 0.6, Exhaustion::Abstain, 0).unwrap_err();
    assert!(err.to_string().contains("single-reading"), "{err}");
}
