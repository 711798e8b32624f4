mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::{Arc, OnceLock};
use std::thread;

use serde_json::{json, Value};

use tofgrasp::dataset::generate_trials;
use tofgrasp::experiment::train_model;
use tofgrasp::features::featurize;
use tofgrasp::forest::{ForestModel, Hyperparams};
use tofgrasp::io::to_line;
use tofgrasp::serve::{Classifier, FramePair, ServeRequest, Server, MAX_RECORD_BYTES};

fn hp() -> Hyperparams {
    Hyperparams {
        n_trees: 10,
        max_depth: Some(8),
        seed: 5,
        ..Hyperparams::default()
    }
}

fn classifier() -> Arc<Classifier> {
    static C: OnceLock<Arc<Classifier>> = OnceLock::new();
    C.get_or_init(|| {
        let p = common::tiny_preset();
        let model = train_model(common::tiny_trials(), &hp(), &p.features).unwrap();
        Arc::new(Classifier::new(model, 0.6).unwrap())
    })
    .clone()
}

fn line(req: &ServeRequest) -> String {
    to_line(req).unwrap()
}

fn value(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

struct Conn {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Conn {
    fn open(server: &Server) -> Self {
        let s = TcpStream::connect(server.local_addr()).unwrap();
        Self {
            reader: BufReader::new(s.try_clone().unwrap()),
            writer: s,
        }
    }

    fn send(&mut self, bytes: &[u8]) {
        self.writer.write_all(bytes).unwrap();
    }

    fn recv(&mut self) -> Value {
        let mut l = String::new();
        self.reader.read_line(&mut l).unwrap();
        assert!(l.ends_with('\n'), "unterminated response {l:?}");
        value(&l)
    }
}

#[test]
fn valid_request_matches_direct_prediction() {
    let c = classifier();
    let set = common::tiny_trials();
    for i in [0, 17, 90] {
        let req = common::request(set, i);
        let resp = c.classify(&req).unwrap();
        let v = featurize(&set.trials[i], &c.model().feature_config).unwrap();
        let direct = c.model().predict_proba(&v).unwrap();
        assert_eq!(resp.p_success.to_bits(), direct.to_bits());
        assert_eq!(resp.predicted, direct >= 0.6);
        assert_eq!(resp.threshold, 0.6);
        assert_eq!(resp.model_hash, c.model().hash().unwrap());
        assert_eq!(resp.request_id, Some(json!(set.trials[i].trial_id)));
        let r = value(&c.respond(line(&req).as_bytes()));
        assert_eq!(r["p_success"].as_f64().unwrap().to_bits(), direct.to_bits());
        assert!(r["processing_latency_ms"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn threshold_override_and_validation() {
    let c = classifier();
    let mut req = common::request(common::tiny_trials(), 2);
    req.threshold = Some(0.0);
    let r = c.classify(&req).unwrap();
    assert!(r.predicted);
    assert_eq!(r.threshold, 0.0);
    req.threshold = Some(1.5);
    assert!(c.classify(&req).is_err());
    let r = value(&c.respond(line(&req).as_bytes()));
    assert!(r["error"].as_str().unwrap().contains("threshold"), "{r}");
    assert!(Classifier::new(c.model().clone(), -0.1).is_err());
}

#[test]
fn malformed_records_get_errors() {
    let c = classifier();
    let r = value(&c.respond(b"{not json"));
    assert!(r["error"].as_str().unwrap().starts_with("malformed record"), "{r}");
    assert!(r["request_id"].is_null());

    let mut v = value(&line(&common::request(common::tiny_trials(), 0)));
    v["request_id"] = json!("abc");
    v["frames"][0]["zones"].as_array_mut().unwrap().pop();
    let r = value(&c.respond(v.to_string().as_bytes()));
    assert_eq!(r["request_id"], "abc");
    assert!(r["error"].as_str().unwrap().contains("zones"), "{r}");

    let mut v = value(&line(&common::request(common::tiny_trials(), 0)));
    v["extra"] = json!(1);
    let r = value(&c.respond(v.to_string().as_bytes()));
    assert!(r["error"].as_str().unwrap().starts_with("invalid request"), "{r}");

    let mut req = common::request(common::tiny_trials(), 0);
    req.frames.swap(0, 1);
    let r = value(&c.respond(line(&req).as_bytes()));
    assert!(r["error"].as_str().unwrap().contains("sensor_id"), "{r}");
}

#[test]
fn two_reading_model_needs_second_pair() {
    let p = common::tiny_preset_with("second_reading = true");
    let set = generate_trials(&p.zoo, &p.roster[..2], &p.generation, 1).unwrap();
    let features = tofgrasp::features::FeatureConfig {
        mode: tofgrasp::features::ReadingMode::TwoReadings,
        ..p.features
    };
    let model = train_model(&set, &hp(), &features).unwrap();
    let c = Classifier::new(model, 0.6).unwrap();
    let t = &set.trials[3];
    let mut req = common::request(&set, 3);
    let err = c.classify(&req).unwrap_err().to_string();
    assert!(err.contains("second"), "{err}");
    let s = t.second.as_ref().unwrap();
    req.second = Some(FramePair {
        joint_angles: s.joint_angles,
        frames: [s.frame_left.clone(), s.frame_right.clone()],
    });
    let got = c.classify(&req).unwrap().p_success;
    let direct = c.model().predict_proba(&featurize(t, &features).unwrap()).unwrap();
    assert_eq!(got.to_bits(), direct.to_bits());
}

#[test]
fn connection_survives_bad_records() {
    let c = classifier();
    let server = Server::bind("127.0.0.1:0", Arc::clone(&c)).unwrap();
    let mut conn = Conn::open(&server);
    let good = line(&common::request(common::tiny_trials(), 1));

    conn.send(b"garbage\n");
    assert!(conn.recv()["error"].as_str().unwrap().starts_with("malformed"));

    let mut big = vec![b' '; MAX_RECORD_BYTES + 10];
    big.push(b'\n');
    conn.send(&big);
    let r = conn.recv();
    assert_eq!(r["error"], format!("record exceeds {MAX_RECORD_BYTES} bytes"));

    conn.send(format!("\n\r\n{good}\r\n").as_bytes());
    let r = conn.recv();
    assert!(r["p_success"].is_number(), "{r}");
    assert_eq!(r["request_id"], 1);
    server.shutdown();
}

#[test]
fn concurrent_connections_answer_in_order() {
    let c = classifier();
    let server = Server::bind("127.0.0.1:0", Arc::clone(&c)).unwrap();
    let set = common::tiny_trials();
    let expected: Vec<u64> = (0..40).map(|i| c.classify(&common::request(set, i)).unwrap().p_success.to_bits()).collect();
    let expected = Arc::new(expected);
    let handles: Vec<_> = (0..6)
        .map(|k| {
            let mut conn = Conn::open(&server);
            let expected = Arc::clone(&expected);
            let lines: Vec<String> = (0..40).map(|i| line(&common::request(set, (i + k * 7) % 40))).collect();
            thread::spawn(move || {
                let batch: String = lines.iter().map(|l| format!("{l}\n")).collect();
                conn.send(batch.as_bytes());
                for i in 0..40 {
                    let want = (i + k * 7) % 40;
                    let r = conn.recv();
                    assert_eq!(r["request_id"], want as u64);
                    assert_eq!(r["p_success"].as_f64().unwrap().to_bits(), expected[want]);
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    server.shutdown();
}

#[test]
fn model_round_trip_keeps_predictions() {
    let c = classifier();
    let bytes = c.model().to_bytes().unwrap();
    let back = ForestModel::from_bytes(&bytes).unwrap();
    assert_eq!(&back, c.model());
    let c2 = Classifier::new(back, 0.6).unwrap();
    assert_eq!(c2.model_hash(), c.model_hash());
    let req = common::request(common::tiny_trials(), 9);
    assert_eq!(c2.classify(&req).unwrap().p_success.to_bits(), c.classify(&req).unwrap().p_success.to_bits());
}
