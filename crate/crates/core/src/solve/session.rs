//! Repeated queries against one formula.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver};
use std::thread;
use std::time::{Duration, Instant};

use super::{check, parse_response, SolverConfig, Verdict};
use crate::encode::{emit_assertion, emit_prelude, emit_query, Formula};
use crate::ir::Expr;

const DONE_MARKER: &str = "smtwcet-done";

/// Queries share the formula's prelude and any permanent assertions added
/// so far. In one-shot mode every query spawns a fresh solver on the full
/// script; in incremental mode one process answers all queries under
/// `push`/`pop` and is restarted after a timeout.
pub struct Session {
    cfg: SolverConfig,
    formula: Formula,
    prelude: String,
    permanent: String,
    permanent_exprs: Vec<Expr>,
    live: Option<Interactive>,
    queries: usize,
}

impl Session {
    pub fn new(f: &Formula, cfg: &SolverConfig) -> Session {
        Session {
            cfg: cfg.clone(),
            formula: f.clone(),
            prelude: emit_prelude(f),
            permanent: String::new(),
            permanent_exprs: Vec::new(),
            live: None,
            queries: 0,
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    /// Number of `check-sat` queries issued so far.
    pub fn queries(&self) -> usize {
        self.queries
    }

    /// Adds an assertion kept for all later queries.
    pub fn assert_permanent(&mut self, e: &Expr) {
        let text = emit_assertion(e);
        if let Some(live) = self.live.as_mut() {
            if live.send(&text).is_err() {
                self.live = None;
            }
        }
        self.permanent.push_str(&text);
        self.permanent_exprs.push(e.clone());
    }

    /// Assertions added with [`Session::assert_permanent`].
    pub fn permanent(&self) -> &[Expr] {
        &self.permanent_exprs
    }

    /// Full script of one query, as run in one-shot mode.
    pub fn script(&self, extra: &[Expr]) -> String {
        let mut s = self.prelude.clone();
        s.push_str(&self.permanent);
        s.push_str(&emit_query(&self.formula, conjunction(extra).as_ref()));
        s.push_str("(exit)\n");
        s
    }

    /// Checks the formula together with `extra`.
    pub fn query(&mut self, extra: &[Expr]) -> Verdict {
        self.queries += 1;
        if self.cfg.incremental {
            self.query_incremental(extra)
        } else {
            check(&self.script(extra), &self.cfg)
        }
    }

    fn query_incremental(&mut self, extra: &[Expr]) -> Verdict {
        if self.live.is_none() {
            let init = format!("{}{}", self.prelude, self.permanent);
            match Interactive::spawn(&self.cfg, &init) {
                Ok(live) => self.live = Some(live),
                Err(v) => return v,
            }
        }
        let live = self.live.as_mut().expect("solver is running");
        let mut text = String::from("(push 1)\n");
        text.push_str(&emit_query(&self.formula, conjunction(extra).as_ref()));
        let verdict = live.ask(&text);
        if !live.is_alive() {
            self.live = None;
            return verdict;
        }
        if let Err(v) = live.send("(pop 1)\n") {
            self.live = None;
            return v;
        }
        verdict
    }
}

/// One long-running solver process fed command by command.
pub struct Interactive {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
    timeout: Duration,
}

impl Drop for Interactive {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Interactive {
    /// Starts the solver of `cfg` and sends `init`.
    pub fn spawn(cfg: &SolverConfig, init: &str) -> Result<Interactive, Verdict> {
        let (exe, args) = cfg
            .command
            .split_first()
            .ok_or_else(|| Verdict::SolverError("empty solver command".into()))?;
        let mut child = Command::new(exe)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Verdict::SolverError(format!("cannot run `{exe}`: {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut s = Interactive {
            child,
            stdin: Some(stdin),
            lines,
            timeout: cfg.timeout(),
        };
        s.send(init)?;
        Ok(s)
    }

    /// False once the process has been given up on.
    pub fn is_alive(&self) -> bool {
        self.stdin.is_some()
    }

    /// Sends commands that produce no output.
    pub fn send(&mut self, text: &str) -> Result<(), Verdict> {
        let Some(stdin) = self.stdin.as_mut() else {
            return Err(Verdict::SolverError("solver was stopped".into()));
        };
        if let Err(e) = stdin.write_all(text.as_bytes()).and_then(|_| stdin.flush()) {
            self.stdin = None;
            return Err(Verdict::SolverError(format!("cannot write to solver: {e}")));
        }
        Ok(())
    }

    /// Sends `text`, which should end in `check-sat` and optionally
    /// `get-value`, and reads the answer. After a timeout the process is
    /// killed and every later call fails.
    pub fn ask(&mut self, text: &str) -> Verdict {
        if let Err(v) = self.send(&format!("{text}(echo \"{DONE_MARKER}\")\n")) {
            return v;
        }
        let deadline = Instant::now() + self.timeout;
        let mut out = String::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(line) if line.trim() == DONE_MARKER => break,
                Ok(line) => {
                    out.push_str(&line);
                    out.push('\n');
                }
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    self.stdin = None;
                    let _ = self.child.kill();
                    return Verdict::Timeout;
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => {
                    self.stdin = None;
                    return match parse_response(&out) {
                        Verdict::SolverError(e) => {
                            Verdict::SolverError(format!("solver exited: {e}"))
                        }
                        v => v,
                    };
                }
            }
        }
        parse_response(&out)
    }
}

fn conjunction(extra: &[Expr]) -> Option<Expr> {
    match extra {
        [] => None,
        [e] => Some(e.clone()),
        _ => Some(Expr::And(extra.to_vec())),
    }
}
