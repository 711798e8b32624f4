mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use tofgrasp::dataset::TrialSet;
use tofgrasp::forest::ForestModel;
use tofgrasp::io::to_line;
use tofgrasp::serve::{Classifier, ServeResponse};

fn tofgrasp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tofgrasp")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = tofgrasp(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

struct Workspace {
    dir: tempfile::TempDir,
    preset: String,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let preset = s(&common::write_tiny_preset(dir.path()));
        Self { dir, preset }
    }

    fn with_second_reading() -> Self {
        let w = Self::new();
        std::fs::write(&w.preset, common::TINY_PRESET.replace("second_reading = false", "second_reading = true")).unwrap();
        w
    }

    fn path(&self, name: &str) -> String {
        s(&self.dir.path().join(name))
    }

    fn run(&self, cmd: &str, rest: &[&str]) -> String {
        let mut args = vec![cmd, "--config", &self.preset];
        args.extend_from_slice(rest);
        ok(&args)
    }

    fn gen(&self, name: &str) -> String {
        let out = self.path(name);
        self.run("gen", &["--out", &out]);
        out
    }

    fn train(&self, trials: &str) -> String {
        let out = self.path("model.bin");
        self.run("train", &["--trials", trials, "--hp", "n_trees=8,max_depth=6", "--out", &out]);
        out
    }
}

fn read(p: &str) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{p}: {e}"))
}

#[test]
fn gen_is_reproducible_and_loadable() {
    let w = Workspace::new();
    let a = w.gen("a");
    let b = w.gen("b");
    for f in std::fs::read_dir(&a).unwrap() {
        let name = f.unwrap().file_name();
        let name = name.to_str().unwrap();
        assert_eq!(read(&format!("{a}/{name}")), read(&format!("{b}/{name}")), "{name} differs");
    }
    let set = TrialSet::load(Path::new(&a)).unwrap();
    assert_eq!(set.trials.len(), 140);
    assert_eq!(set, *common::tiny_trials());
}

#[test]
fn seed_override_changes_trials() {
    let w = Workspace::new();
    let a = w.gen("a");
    let b = w.path("b");
    w.run("gen", &["--seed", "99", "--out", &b]);
    let la: Vec<bool> = TrialSet::load(Path::new(&a)).unwrap().trials.iter().map(|t| t.label).collect();
    let lb: Vec<bool> = TrialSet::load(Path::new(&b)).unwrap().trials.iter().map(|t| t.label).collect();
    assert_ne!(la, lb);
}

#[test]
fn balance_split_and_featurize() {
    let w = Workspace::new();
    let trials = w.gen("trials");
    let balanced = w.path("balanced");
    w.run("balance", &["--trials", &trials, "--out", &balanced]);
    let report: serde_json::Value = serde_json::from_slice(&read(&format!("{balanced}/balance.json"))).unwrap();
    assert_eq!(report["objects"].as_array().unwrap().len(), 4);
    let set = TrialSet::load(Path::new(&balanced)).unwrap();
    let pos = set.trials.iter().filter(|t| t.label).count();
    assert_eq!(2 * pos, set.trials.len());

    let parts = w.path("parts");
    w.run("split", &["--trials", &balanced, "--out", &parts]);
    let count = |d: &str| TrialSet::load(&Path::new(&parts).join(d)).unwrap().trials.len();
    let train_role = set.trials.iter().filter(|t| t.object_id == "cylinder" || t.object_id == "box").count();
    assert_eq!(count("train") + count("seen_validation"), train_role);
    assert!(count("validation") > 0 && count("test") > 0);

    let csv = w.path("features.csv");
    w.run("featurize", &["--trials", &balanced, "--role", "test", "--out", &csv]);
    let text = String::from_utf8(read(&csv)).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header.split(',').count(), 3 + 1028);
    assert_eq!(lines.count(), count("test"));
}

#[test]
fn train_eval_and_classify() {
    let w = Workspace::new();
    let trials = w.gen("trials");
    let model_path = w.train(&trials);
    let eval = w.path("eval");
    let stdout = w.run("eval", &["--model", &model_path, "--trials", &trials, "--role", "validation", "--out", &eval]);
    assert!(stdout.starts_with("validation: n 30"), "{stdout}");
    assert!(stdout.contains("predicted success"));
    for f in ["eval.json", "confusion.csv", "per_object.csv", "roc.svg", "confusion.txt"] {
        assert!(Path::new(&eval).join(f).is_file(), "{f} missing");
    }

    let set = common::tiny_trials();
    let req = common::request(set, 5);
    let frame = w.path("request.json");
    std::fs::write(&frame, to_line(&req).unwrap()).unwrap();
    let resp_path = w.path("response.json");
    let stdout = w.run("classify", &["--model", &model_path, "--frame", &frame, "--out", &resp_path]);
    let model = ForestModel::load(Path::new(&model_path)).unwrap();
    let expected = Classifier::new(model, 0.6).unwrap().classify(&req).unwrap();
    assert_eq!(stdout.trim(), format!("p_success={:.16e} predicted={}", expected.p_success, expected.predicted));
    let written: ServeResponse = serde_json::from_slice(&read(&resp_path)).unwrap();
    assert_eq!(written.p_success.to_bits(), expected.p_success.to_bits());
    assert_eq!(written.request_id, req.request_id);
}

#[test]
fn grid_with_ablation_writes_reports() {
    let single = Workspace::new();
    let trials = single.gen("trials");
    let out = tofgrasp(&["grid", "--config", &single.preset, "--trials", &trials, "--ablation", "--out", &single.path("grid")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("second_reading"));

    let w = Workspace::with_second_reading();
    let trials = w.gen("trials");
    let out = w.path("grid");
    let stdout = w.run("grid", &["--trials", &trials, "--ablation", "--out", &out]);
    assert!(stdout.contains("validation AUC") && stdout.contains("ablation"), "{stdout}");
    for f in ["grid.csv", "model.bin", "summary.json", "balance.json", "ablation.json", "roc.svg", "per_object.csv"] {
        assert!(Path::new(&out).join(f).is_file(), "{f} missing");
    }
    let grid = String::from_utf8(read(&format!("{out}/grid.csv"))).unwrap();
    assert_eq!(grid.lines().count(), 1 + 2);
    let summary: serde_json::Value = serde_json::from_slice(&read(&format!("{out}/summary.json"))).unwrap();
    assert!(summary["validation_auc"].is_number());
}

#[test]
fn pipeline_summary_is_reproducible() {
    let w = Workspace::new();
    let trials = w.gen("trials");
    let model = w.train(&trials);
    let a = w.path("pa");
    let b = w.path("pb");
    let stdout = w.run("pipeline", &["--model", &model, "--out", &a]);
    w.run("pipeline", &["--model", &model, "--out", &b]);
    for name in ["baseline", "filtered", "perfect"] {
        assert!(stdout.contains(name), "{stdout}");
    }
    for f in ["summary.json", "outcomes.csv"] {
        assert_eq!(read(&format!("{a}/{f}")), read(&format!("{b}/{f}")), "{f} differs");
    }
    let summary: serde_json::Value = serde_json::from_slice(&read(&format!("{a}/summary.json"))).unwrap();
    assert_eq!(summary["episodes"], 12);
    assert!(summary.get("latency").is_none());
    let latency: serde_json::Value = serde_json::from_slice(&read(&format!("{a}/latency.json"))).unwrap();
    assert!(latency.is_array());
}

#[test]
fn serve_answers_over_tcp() {
    let w = Workspace::new();
    let trials = w.gen("trials");
    let model_path = w.train(&trials);
    let addr_file = w.path("addr.txt");
    let mut child = Command::new(env!("CARGO_BIN_EXE_tofgrasp"))
        .args(["serve", "--model", &model_path, "--addr", "127.0.0.1:0", "--out", &addr_file])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let addr = loop {
        if let Ok(a) = std::fs::read_to_string(&addr_file) {
            if a.ends_with('\n') {
                break a.trim().to_string();
            }
        }
        assert!(Instant::now() < deadline, "server did not start");
        std::thread::sleep(Duration::from_millis(20));
    };
    let req = common::request(common::tiny_trials(), 3);
    let mut conn = TcpStream::connect(&addr).unwrap();
    writeln!(conn, "{}", to_line(&req).unwrap()).unwrap();
    let mut line = String::new();
    BufReader::new(conn.try_clone().unwrap()).read_line(&mut line).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    let resp: ServeResponse = serde_json::from_str(&line).unwrap();
    let model = ForestModel::load(Path::new(&model_path)).unwrap();
    let expected = Classifier::new(model, 0.6).unwrap().classify(&req).unwrap();
    assert_eq!(resp.p_success.to_bits(), expected.p_success.to_bits());
    assert_eq!(resp.model_hash, expected.model_hash);
}

#[test]
fn bad_invocations_fail() {
    let out = tofgrasp(&["gen", "--no-such-flag"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--no-such-flag"));

    let out = tofgrasp(&["eval", "--model", "/nonexistent/model.bin", "--trials", "/nonexistent"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = tofgrasp(&["gen", "--config", "no_such_preset", "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_preset"));

    let out = tofgrasp(&["train", "--trials", "/nonexistent", "--hp", "n_trees=0"]);
    assert_eq!(out.status.code(), Some(1));
}
