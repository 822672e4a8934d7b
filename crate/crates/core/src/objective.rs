//! Objectives the engine can query: the built-in benchmarks, or an external
//! process speaking one JSON line per evaluation, or an HTTP callback.
//!
//! Both external transports use the same messages: the engine sends
//! `{"x":[...]}` and expects `{"y":<number>}` back.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::benchmarks::{self, Goal, ObjectiveSpec};
use crate::domain::Bounds;
use crate::error::{Error, Result};

pub trait Objective: Send + Sync {
    fn name(&self) -> &str;
    fn bounds(&self) -> &Bounds<f64>;
    fn goal(&self) -> Goal;
    /// Best attainable value in the user's orientation, when known.
    fn optimum_value(&self) -> Option<f64>;
    fn evaluate(&self, x: &[f64]) -> Result<f64>;
    /// Typical spread of objective values, used to normalize targets.
    fn range_estimate(&self) -> Option<f64> {
        None
    }
    /// Name of an expert feature map that fits this objective.
    fn feature_map(&self) -> Option<&str> {
        None
    }
    /// Whether the engine should add its own observation noise.
    fn is_noiseless(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveConfig {
    Builtin {
        name: String,
    },
    Subprocess {
        command: String,
        #[serde(default)]
        args: Vec<String>,
        bounds: Bounds<f64>,
        #[serde(default)]
        goal: Goal,
        #[serde(default)]
        optimum_value: Option<f64>,
    },
    Http {
        url: String,
        bounds: Bounds<f64>,
        #[serde(default)]
        goal: Goal,
        #[serde(default)]
        optimum_value: Option<f64>,
    },
}

impl ObjectiveConfig {
    pub fn builtin(name: impl Into<String>) -> Self {
        ObjectiveConfig::Builtin { name: name.into() }
    }

    pub fn instantiate(&self) -> Result<Arc<dyn Objective>> {
        Ok(match self {
            ObjectiveConfig::Builtin { name } => Arc::new(BuiltinObjective::new(name)?),
            ObjectiveConfig::Subprocess { command, args, bounds, goal, optimum_value } => {
                bounds.validate()?;
                Arc::new(SubprocessObjective::new(command, args.clone(), bounds.clone(), *goal, *optimum_value))
            }
            ObjectiveConfig::Http { url, bounds, goal, optimum_value } => {
                bounds.validate()?;
                Arc::new(HttpObjective::new(url, bounds.clone(), *goal, *optimum_value))
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct BuiltinObjective {
    spec: ObjectiveSpec<f64>,
    range: f64,
}

impl BuiltinObjective {
    pub fn new(name: &str) -> Result<Self> {
        let spec = benchmarks::builtin::<f64>(name)?;
        let range = spec.range_estimate();
        Ok(Self { spec, range })
    }

    pub fn spec(&self) -> &ObjectiveSpec<f64> {
        &self.spec
    }
}

impl Objective for BuiltinObjective {
    fn name(&self) -> &str {
        &self.spec.name
    }

    fn bounds(&self) -> &Bounds<f64> {
        &self.spec.bounds
    }

    fn goal(&self) -> Goal {
        self.spec.goal
    }

    fn optimum_value(&self) -> Option<f64> {
        self.spec.optimum_value
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.spec.evaluate(x)
    }

    fn range_estimate(&self) -> Option<f64> {
        Some(self.range)
    }

    fn feature_map(&self) -> Option<&str> {
        self.spec.feature_map.as_deref()
    }

    fn is_noiseless(&self) -> bool {
        true
    }
}

#[derive(Serialize)]
struct Query<'a> {
    x: &'a [f64],
}

#[derive(Deserialize)]
struct Reply {
    y: f64,
}

fn finite_reply(r: Reply) -> Result<f64> {
    if r.y.is_finite() {
        Ok(r.y)
    } else {
        Err(Error::Objective(format!("non-finite objective value {}", r.y)))
    }
}

struct ChildIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Long-lived child process; started on first use and fed one query per line.
pub struct SubprocessObjective {
    name: String,
    command: String,
    args: Vec<String>,
    bounds: Bounds<f64>,
    goal: Goal,
    optimum: Option<f64>,
    io: Mutex<Option<ChildIo>>,
}

impl SubprocessObjective {
    pub fn new(command: &str, args: Vec<String>, bounds: Bounds<f64>, goal: Goal, optimum: Option<f64>) -> Self {
        Self {
            name: format!("subprocess:{command}"),
            command: command.to_string(),
            args,
            bounds,
            goal,
            optimum,
            io: Mutex::new(None),
        }
    }

    fn spawn(&self) -> Result<ChildIo> {
        let mut child = Command::new(&self.command)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Objective(format!("cannot start '{}': {e}", self.command)))?;
        let stdin = child.stdin.take().ok_or_else(|| Error::Objective("child stdin unavailable".into()))?;
        let stdout = child.stdout.take().ok_or_else(|| Error::Objective("child stdout unavailable".into()))?;
        Ok(ChildIo { child, stdin, stdout: BufReader::new(stdout) })
    }
}

impl Objective for SubprocessObjective {
    fn name(&self) -> &str {
        &self.name
    }

    fn bounds(&self) -> &Bounds<f64> {
        &self.bounds
    }

    fn goal(&self) -> Goal {
        self.goal
    }

    fn optimum_value(&self) -> Option<f64> {
        self.optimum
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let mut guard = self.io.lock().map_err(|_| Error::Objective("objective lock poisoned".into()))?;
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let io = guard.as_mut().expect("spawned above");
        let mut line = serde_json::to_string(&Query { x }).map_err(|e| Error::Objective(e.to_string()))?;
        line.push('\n');
        let outcome = io
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| io.stdin.flush())
            .map_err(|e| Error::Objective(format!("write to objective process failed: {e}")))
            .and_then(|_| {
                let mut reply = String::new();
                match io.stdout.read_line(&mut reply) {
                    Ok(0) => Err(Error::Objective("objective process closed its output".into())),
                    Ok(_) => serde_json::from_str::<Reply>(reply.trim())
                        .map_err(|e| Error::Objective(format!("bad reply {reply:?}: {e}"))),
                    Err(e) => Err(Error::Objective(format!("read from objective process failed: {e}"))),
                }
            });
        if outcome.is_err() {
            // restart on next call rather than reuse a confused process
            if let Some(mut dead) = guard.take() {
                let _ = dead.child.kill();
                let _ = dead.child.wait();
            }
        }
        finite_reply(outcome?)
    }
}

impl Drop for SubprocessObjective {
    fn drop(&mut self) {
        if let Ok(mut guard) = self.io.lock() {
            if let Some(mut io) = guard.take() {
                drop(io.stdin);
                let _ = io.child.kill();
                let _ = io.child.wait();
            }
        }
    }
}

pub struct HttpObjective {
    name: String,
    url: String,
    bounds: Bounds<f64>,
    goal: Goal,
    optimum: Option<f64>,
}

impl HttpObjective {
    pub fn new(url: &str, bounds: Bounds<f64>, goal: Goal, optimum: Option<f64>) -> Self {
        Self { name: format!("http:{url}"), url: url.to_string(), bounds, goal, optimum }
    }
}

impl Objective for HttpObjective {
    fn name(&self) -> &str {
        &self.name
    }

    fn bounds(&self) -> &Bounds<f64> {
        &self.bounds
    }

    fn goal(&self) -> Goal {
        self.goal
    }

    fn optimum_value(&self) -> Option<f64> {
        self.optimum
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let reply: Reply = ureq::post(&self.url)
            .send_json(Query { x })
            .map_err(|e| Error::Objective(format!("POST {} failed: {e}", self.url)))?
            .body_mut()
            .read_json()
            .map_err(|e| Error::Objective(format!("bad reply from {}: {e}", self.url)))?;
        finite_reply(reply)
    }
}
