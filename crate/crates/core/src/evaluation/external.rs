//! Evaluator running in a child process, spoken to over stdin/stdout.
//!
//! One JSON object per line, UTF-8:
//!
//! ```text
//! evaluator -> engine  {"type":"hello","protocol":1,"num_tasks":N,"metric":"avp"}
//! engine -> evaluator  {"id":"r-000017","tasks":[0,3,4],"architecture":{"nodes":2,"edges":[{"src":0,"dst":1,"op":"rnn"},...]},"seed":42}
//! evaluator -> engine  {"id":"r-000017","metrics":{"0":0.5712,"3":0.4402,"4":0.6123}}
//!                      {"id":"r-000017","error":"<message>"}
//! engine -> evaluator  {"type":"shutdown"}
//! ```
//!
//! All requests of a batch are written up front; responses may arrive in any
//! order and are matched back by id.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;

use super::{compute_gains, BaselineScores, EvaluationRecord, EvaluationSource, Evaluator, PointOutcome};
use crate::error::{Error, Result};
use crate::rng::fnv1a;
use crate::space::SearchPoint;

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Serialize)]
struct WireEdge {
    src: usize,
    dst: usize,
    op: &'static str,
}

#[derive(Serialize)]
struct WireArchitecture {
    nodes: usize,
    edges: Vec<WireEdge>,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    id: &'a str,
    tasks: Vec<usize>,
    architecture: WireArchitecture,
    seed: u64,
}

/// Serializes one request line (without the trailing newline).
pub fn request_line(id: &str, point: &SearchPoint, seed: u64) -> String {
    let req = WireRequest {
        id,
        tasks: point.combination.members().map(|t| t.index()).collect(),
        architecture: WireArchitecture {
            nodes: point.architecture.num_nodes(),
            edges: point
                .architecture
                .edge_ops()
                .map(|((src, dst), op)| WireEdge {
                    src,
                    dst,
                    op: op.label(),
                })
                .collect(),
        },
        seed,
    };
    serde_json::to_string(&req).expect("request serialization cannot fail")
}

enum Response {
    Metrics(BTreeMap<usize, f64>),
    Failure(String),
}

fn parse_response(line: &str) -> Result<(String, Response)> {
    let malformed = || Error::Transport(format!("malformed response line: {line}"));
    let value: Value = serde_json::from_str(line).map_err(|_| malformed())?;
    let obj = value.as_object().ok_or_else(malformed)?;
    let id = obj.get("id").and_then(Value::as_str).ok_or_else(malformed)?.to_string();
    if let Some(msg) = obj.get("error") {
        let msg = msg.as_str().map(str::to_string).unwrap_or_else(|| msg.to_string());
        return Ok((id, Response::Failure(msg)));
    }
    let metrics = obj.get("metrics").and_then(Value::as_object).ok_or_else(malformed)?;
    let mut out = BTreeMap::new();
    for (k, v) in metrics {
        let task: usize = k.parse().map_err(|_| malformed())?;
        let m = v.as_f64().ok_or_else(malformed)?;
        out.insert(task, m);
    }
    Ok((id, Response::Metrics(out)))
}

pub struct ExternalEvaluator {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    baselines: BaselineScores,
    timeout: Duration,
    seed: u64,
    next_id: u64,
}

impl ExternalEvaluator {
    /// Starts `command` through `sh -c` and waits for the handshake.
    pub fn spawn(command: &str, baselines: BaselineScores, seed: u64, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Transport(format!("cannot start evaluator `{command}`: {e}")))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut ev = ExternalEvaluator {
            child,
            stdin,
            lines: rx,
            baselines,
            timeout,
            seed,
            next_id: 0,
        };
        ev.handshake()?;
        Ok(ev)
    }

    fn next_line(&mut self) -> Result<String> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(Error::Transport(format!("reading evaluator output: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Transport(format!(
                "evaluator sent nothing for {:?}",
                self.timeout
            ))),
            Err(RecvTimeoutError::Disconnected) => Err(Error::Transport("evaluator exited".into())),
        }
    }

    fn handshake(&mut self) -> Result<()> {
        let line = self.next_line()?;
        let bad = || Error::Transport(format!("bad handshake: {line}"));
        let value: Value = serde_json::from_str(&line).map_err(|_| bad())?;
        if value.get("type").and_then(Value::as_str) != Some("hello") {
            return Err(bad());
        }
        if value.get("protocol").and_then(Value::as_u64) != Some(PROTOCOL_VERSION) {
            return Err(Error::Transport(format!("unsupported protocol in handshake: {line}")));
        }
        let n = value.get("num_tasks").and_then(Value::as_u64).ok_or_else(bad)?;
        if n as usize != self.baselines.num_tasks() {
            return Err(Error::config(format!(
                "evaluator reports {n} tasks, baselines cover {}",
                self.baselines.num_tasks()
            )));
        }
        let metric = value.get("metric").and_then(Value::as_str).ok_or_else(bad)?;
        if metric != self.baselines.metric_name {
            return Err(Error::config(format!(
                "evaluator reports metric `{metric}`, baselines are `{}`",
                self.baselines.metric_name
            )));
        }
        Ok(())
    }

    fn send(&mut self, line: &str) -> Result<()> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Transport("evaluator input already closed".into()))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Transport(format!("writing to evaluator: {e}")))
    }

    /// Sends the shutdown message and waits for the process to exit.
    pub fn shutdown(mut self) -> Result<std::process::ExitStatus> {
        self.send(r#"{"type":"shutdown"}"#)?;
        self.stdin = None;
        Ok(self.child.wait()?)
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        if self.stdin.is_some() {
            let _ = self.send(r#"{"type":"shutdown"}"#);
            self.stdin = None;
            for _ in 0..50 {
                if let Ok(Some(_)) = self.child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(20));
            }
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

impl Evaluator for ExternalEvaluator {
    fn evaluate(&mut self, points: &[SearchPoint]) -> Result<Vec<PointOutcome>> {
        let mut slot_of: HashMap<String, usize> = HashMap::new();
        for (i, point) in points.iter().enumerate() {
            self.next_id += 1;
            let id = format!("r-{:06}", self.next_id);
            let seed = self.seed ^ fnv1a(point.encode().as_bytes());
            let line = request_line(&id, point, seed);
            self.send(&line)?;
            slot_of.insert(id, i);
        }

        let mut out: Vec<Option<PointOutcome>> = vec![None; points.len()];
        let mut remaining = points.len();
        while remaining > 0 {
            let line = self.next_line()?;
            if line.trim().is_empty() {
                continue;
            }
            let (id, response) = parse_response(&line)?;
            let Some(&i) = slot_of.get(&id) else {
                return Err(Error::Transport(format!("response for unknown id: {line}")));
            };
            if out[i].is_some() {
                return Err(Error::Transport(format!("duplicate response: {line}")));
            }
            let point = &points[i];
            let outcome = match response {
                Response::Failure(msg) => Err(msg),
                Response::Metrics(metrics) => {
                    let expected: Vec<usize> = point.combination.members().map(|t| t.index()).collect();
                    if metrics.keys().copied().ne(expected.iter().copied()) {
                        Err(format!(
                            "metrics keyed by {:?}, expected {:?}",
                            metrics.keys().collect::<Vec<_>>(),
                            expected
                        ))
                    } else if metrics.values().any(|m| !m.is_finite()) {
                        Err("non-finite metric".to_string())
                    } else {
                        compute_gains(&metrics, &self.baselines)
                            .map(|gains| EvaluationRecord {
                                point: point.clone(),
                                metrics,
                                gains,
                                source: EvaluationSource::External,
                                timestamp: 0,
                            })
                            .map_err(|e| e.to_string())
                    }
                }
            };
            out[i] = Some(outcome);
            remaining -= 1;
        }
        Ok(out.into_iter().map(|o| o.expect("every slot answered")).collect())
    }

    fn baselines(&self) -> &BaselineScores {
        &self.baselines
    }
}
