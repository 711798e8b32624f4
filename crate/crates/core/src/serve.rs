//! Streaming classification over TCP.
//!
//! Each connection carries newline-delimited JSON records. Every request gets
//! exactly one response line, in order. Connections are served by their own
//! thread and share the model read-only.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::{featurize_frames, ReadingMode};
use crate::forest::ForestModel;
use crate::io::to_line;
use crate::tof::{RawSensorFrame, SensorSide};

pub const MAX_RECORD_BYTES: usize = 1 << 20;
pub const DEFAULT_ADDR: &str = "127.0.0.1:7878";

/// Joint angles and the (left, right) frame pair from one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramePair {
    pub joint_angles: [f64; 4],
    pub frames: [RawSensorFrame; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<Value>,
    pub joint_angles: [f64; 4],
    pub frames: [RawSensorFrame; 2],
    /// Replaces the service threshold for this request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Required by two-reading models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<FramePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServeResponse {
    pub request_id: Option<Value>,
    pub p_success: f64,
    pub predicted: bool,
    pub threshold: f64,
    pub model_hash: String,
    pub processing_latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub request_id: Option<Value>,
    pub error: String,
}

/// A loaded model plus its default threshold.
#[derive(Debug)]
pub struct Classifier {
    model: ForestModel,
    model_hash: String,
    threshold: f64,
}

fn check_threshold(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Config(format!("threshold: {t} outside [0, 1]")))
    }
}

fn check_pair(frames: &[RawSensorFrame; 2], field: &str) -> Result<()> {
    for (i, (f, side)) in frames.iter().zip([SensorSide::Left, SensorSide::Right]).enumerate() {
        if f.sensor_id != side {
            return Err(Error::Frame(format!("{field}[{i}].sensor_id: expected {side:?}")));
        }
        f.check().map_err(|e| Error::Frame(format!("{field}[{i}]: {e}")))?;
    }
    Ok(())
}

impl Classifier {
    pub fn new(model: ForestModel, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        Ok(Self {
            model_hash: model.hash()?,
            model,
            threshold,
        })
    }

    pub fn model(&self) -> &ForestModel {
        &self.model
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// `(p_success, threshold used)`.
    pub fn score(&self, req: &ServeRequest) -> Result<(f64, f64)> {
        let threshold = req.threshold.unwrap_or(self.threshold);
        check_threshold(threshold)?;
        check_pair(&req.frames, "frames")?;
        let second = match (&req.second, self.model.feature_config.mode) {
            (Some(s), ReadingMode::TwoReadings) => {
                check_pair(&s.frames, "second.frames")?;
                Some((&s.joint_angles, &s.frames[0], &s.frames[1]))
            }
            (None, ReadingMode::TwoReadings) => return Err(Error::Missing("second: this model needs a second reading".into())),
            _ => None,
        };
        let v = featurize_frames(&req.joint_angles, &req.frames[0], &req.frames[1], second, &self.model.feature_config)?;
        Ok((self.model.predict_proba(&v)?, threshold))
    }

    pub fn classify(&self, req: &ServeRequest) -> Result<ServeResponse> {
        let t0 = Instant::now();
        let (p, threshold) = self.score(req)?;
        Ok(ServeResponse {
            request_id: req.request_id.clone(),
            p_success: p,
            predicted: p >= threshold,
            threshold,
            model_hash: self.model_hash.clone(),
            processing_latency_ms: t0.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// One request line in, one response line out (no newline). Latency
    /// covers parsing through scoring.
    pub fn respond(&self, line: &[u8]) -> String {
        let t0 = Instant::now();
        let value: Value = match serde_json::from_slice(line) {
            Ok(v) => v,
            Err(e) => return error_line(None, format!("malformed record: {e}")),
        };
        let request_id = value.get("request_id").cloned();
        let req: ServeRequest = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => return error_line(request_id, format!("invalid request: {e}")),
        };
        match self.score(&req) {
            Ok((p, threshold)) => {
                let resp = ServeResponse {
                    request_id,
                    p_success: p,
                    predicted: p >= threshold,
                    threshold,
                    model_hash: self.model_hash.clone(),
                    processing_latency_ms: t0.elapsed().as_secs_f64() * 1e3,
                };
                to_line(&resp).unwrap_or_else(|e| error_line(resp.request_id, e.to_string()))
            }
            Err(e) => error_line(request_id, e.to_string()),
        }
    }
}

fn error_line(request_id: Option<Value>, error: String) -> String {
    to_line(&ErrorResponse { request_id, error }).expect("plain record serializes")
}

enum Record {
    Line,
    TooLong,
    Eof,
}

/// Read up to the next newline into `buf`, keeping at most `limit` bytes.
fn read_record<R: BufRead>(r: &mut R, buf: &mut Vec<u8>, limit: usize) -> io::Result<Record> {
    buf.clear();
    let mut overflow = false;
    let mut any = false;
    loop {
        let chunk = r.fill_buf()?;
        if chunk.is_empty() {
            return Ok(match (any, overflow) {
                (false, _) => Record::Eof,
                (true, true) => Record::TooLong,
                (true, false) => Record::Line,
            });
        }
        any = true;
        let (part, done) = match chunk.iter().position(|&b| b == b'\n') {
            Some(i) => (&chunk[..i], Some(i + 1)),
            None => (chunk, None),
        };
        if !overflow {
            if buf.len() + part.len() > limit {
                overflow = true;
                buf.clear();
            } else {
                buf.extend_from_slice(part);
            }
        }
        let used = done.unwrap_or(chunk.len());
        r.consume(used);
        if done.is_some() {
            return Ok(if overflow { Record::TooLong } else { Record::Line });
        }
    }
}

/// Serve one connection until the peer closes it.
pub fn handle_connection(stream: TcpStream, classifier: &Classifier) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut buf = Vec::new();
    loop {
        let line = match read_record(&mut reader, &mut buf, MAX_RECORD_BYTES)? {
            Record::Eof => return Ok(()),
            Record::TooLong => error_line(None, format!("record exceeds {MAX_RECORD_BYTES} bytes")),
            Record::Line => {
                let text = buf.strip_suffix(b"\r").unwrap_or(&buf);
                if text.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                classifier.respond(text)
            }
        };
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
}

/// A running service. Dropping the handle leaves it running; call
/// [`Server::shutdown`] to stop accepting.
pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl Server {
    pub fn start(listener: TcpListener, classifier: Arc<Classifier>) -> Result<Self> {
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&stop);
        let accept = thread::spawn(move || {
            for conn in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let c = Arc::clone(&classifier);
                thread::spawn(move || {
                    let _ = handle_connection(conn, &c);
                });
            }
        });
        Ok(Self {
            addr,
            stop,
            accept: Some(accept),
        })
    }

    pub fn bind(addr: &str, classifier: Arc<Classifier>) -> Result<Self> {
        Self::start(TcpListener::bind(addr)?, classifier)
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Block until the accept loop ends.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    /// Stop accepting new connections. Open connections run to completion.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}
