//! Bridge from a [`ProblemSpec`] to a user-supplied child process.
//!
//! The child is started once per run and kept alive: every evaluation
//! writes one JSON line `{"x":[...]}` to its stdin and reads one reply line
//! `{"objective":f,"constraints":[...]}`. A reply that is malformed, has
//! the wrong constraint count, or does not arrive within the timeout kills
//! the child and surfaces as an evaluation failure; the next evaluation
//! starts a fresh child, which gives the optimizer's retry a chance.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::Deserialize;
use xferbo::{Blackbox, Doe, Error, ProblemSpec};

use crate::config::ExternalProblem;

#[derive(Debug, Deserialize)]
struct Reply {
    objective: f64,
    #[serde(default)]
    constraints: Vec<f64>,
}

struct ChildHandle {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

struct Bridge {
    command: Vec<String>,
    timeout: Duration,
    n_constraints: usize,
    child: Option<ChildHandle>,
    /// Last evaluated point, keyed on the exact bit pattern of x. The
    /// objective and constraint closures all funnel through here, so one
    /// child round trip serves the whole evaluation of a point.
    memo: Option<(Vec<u64>, f64, Vec<f64>)>,
}

fn blackbox_err(message: impl Into<String>) -> Error {
    Error::Blackbox { row: None, message: message.into() }
}

impl Bridge {
    fn new(desc: &ExternalProblem) -> Bridge {
        Bridge {
            command: desc.command.clone(),
            timeout: Duration::from_secs_f64(desc.timeout_seconds),
            n_constraints: desc.constraints.len(),
            child: None,
            memo: None,
        }
    }

    fn spawn(&mut self) -> Result<(), Error> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| blackbox_err(format!("cannot start '{}': {e}", self.command[0])))?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");
        // Reads block, so a thread forwards lines into a channel and the
        // caller waits on it with the timeout.
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });
        self.child = Some(ChildHandle { child, stdin, lines: rx });
        Ok(())
    }

    fn kill_child(&mut self) {
        if let Some(mut handle) = self.child.take() {
            let _ = handle.child.kill();
            let _ = handle.child.wait();
        }
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>), Error> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some((k, obj, cons)) = &self.memo {
            if *k == key {
                return Ok((*obj, cons.clone()));
            }
        }
        let result = self.round_trip(x);
        if result.is_err() {
            self.kill_child();
        }
        let (objective, constraints) = result?;
        self.memo = Some((key, objective, constraints.clone()));
        Ok((objective, constraints))
    }

    fn round_trip(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>), Error> {
        if self.child.is_none() {
            self.spawn()?;
        }
        let handle = self.child.as_mut().expect("just spawned");
        let request = format!("{}\n", serde_json::json!({ "x": x }));
        handle
            .stdin
            .write_all(request.as_bytes())
            .and_then(|()| handle.stdin.flush())
            .map_err(|e| blackbox_err(format!("writing to the external blackbox failed: {e}")))?;

        let line = match handle.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => {
                return Err(blackbox_err(format!("reading from the external blackbox failed: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => {
                return Err(blackbox_err(format!(
                    "external blackbox timed out after {:.3}s",
                    self.timeout.as_secs_f64()
                )))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let detail = match handle.child.try_wait() {
                    Ok(Some(status)) => format!(" (exit status {status})"),
                    _ => String::new(),
                };
                return Err(blackbox_err(format!(
                    "external blackbox closed its output{detail}"
                )));
            }
        };

        let reply: Reply = serde_json::from_str(&line)
            .map_err(|e| blackbox_err(format!("malformed reply '{}': {e}", line.trim())))?;
        if reply.constraints.len() != self.n_constraints {
            return Err(blackbox_err(format!(
                "reply has {} constraint values, problem declares {}",
                reply.constraints.len(),
                self.n_constraints
            )));
        }
        if !reply.objective.is_finite() || reply.constraints.iter().any(|c| !c.is_finite()) {
            return Err(blackbox_err("reply contains a non-finite value".to_string()));
        }
        Ok((reply.objective, reply.constraints))
    }
}

impl Drop for Bridge {
    fn drop(&mut self) {
        self.kill_child();
    }
}

/// Builds the problem around a shared bridge. The blackboxes are marked
/// non-reentrant: all of them talk to the same child process.
pub fn external_problem(desc: &ExternalProblem) -> Result<ProblemSpec, Error> {
    if desc.command.is_empty() {
        return Err(Error::InvalidInput("external command must not be empty".into()));
    }
    let bridge = Arc::new(Mutex::new(Bridge::new(desc)));

    let objective = {
        let bridge = Arc::clone(&bridge);
        Blackbox::sequential(move |x: &[f64]| {
            let mut b = bridge.lock().expect("bridge lock");
            b.evaluate(x).map(|(objective, _)| objective)
        })
    };
    let constraints = desc
        .constraints
        .iter()
        .enumerate()
        .map(|(i, meta)| {
            let bridge = Arc::clone(&bridge);
            let blackbox = Blackbox::sequential(move |x: &[f64]| {
                let mut b = bridge.lock().expect("bridge lock");
                b.evaluate(x).map(|(_, cons)| cons[i])
            });
            (meta.clone(), blackbox)
        })
        .collect();

    ProblemSpec::new(desc.name.clone(), desc.variables.clone(), objective, constraints)
}

/// Loads the prior data sets declared for an external problem.
pub fn load_source_does(desc: &ExternalProblem) -> Result<Vec<Doe>, Error> {
    desc.source_data
        .iter()
        .map(|s| {
            Doe::read_csv_path(&s.data, s.variables.clone(), s.constraints.clone()).map_err(|e| {
                Error::InvalidInput(format!(
                    "source data '{}' ({}): {e}",
                    s.name,
                    s.data.display()
                ))
            })
        })
        .collect()
}
