//! External SMT-LIB v2 solver driver.
//!
//! Every query either runs a fresh solver process on a complete script
//! ([`check`]) or goes through a [`Session`], which can also keep one
//! process alive and answer queries under `push`/`pop`.

mod session;

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::ir::{EvalError, Expr, Value};
use crate::sexp::{self, Sexp};

pub use session::{Interactive, Session};

/// Environment variable naming the solver command line.
pub const SOLVER_ENV: &str = "SMTWCET_SOLVER";

/// Known solvers, tried in order when no command is configured.
const KNOWN_SOLVERS: [(&str, &[&str]); 3] = [
    ("z3", &["-in", "-smt2"]),
    ("cvc5", &["--lang=smt2", "--incremental"]),
    ("yices-smt2", &["--incremental"]),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Executable followed by its arguments; the script goes to stdin.
    pub command: Vec<String>,
    pub timeout_ms: u64,
    /// Keep one process per formula and use `push`/`pop`.
    pub incremental: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("solver timeout must be positive")]
    ZeroTimeout,
    #[error("empty solver command")]
    EmptyCommand,
}

impl SolverConfig {
    pub fn new(command: Vec<String>, timeout_ms: u64) -> Result<SolverConfig, ConfigError> {
        if timeout_ms == 0 {
            return Err(ConfigError::ZeroTimeout);
        }
        if command.is_empty() {
            return Err(ConfigError::EmptyCommand);
        }
        Ok(SolverConfig {
            command,
            timeout_ms,
            incremental: false,
        })
    }

    /// Splits a command line on whitespace. A lone executable of a known
    /// solver gets that solver's stdin flags.
    pub fn from_command_line(line: &str, timeout_ms: u64) -> Result<SolverConfig, ConfigError> {
        let mut command: Vec<String> = line.split_whitespace().map(String::from).collect();
        if let [exe] = command.as_slice() {
            let base = Path::new(exe)
                .file_name()
                .and_then(|s| s.to_str())
                .unwrap_or("");
            if let Some((_, args)) = KNOWN_SOLVERS.iter().find(|(name, _)| *name == base) {
                command.extend(args.iter().map(|a| a.to_string()));
            }
        }
        SolverConfig::new(command, timeout_ms)
    }

    /// The command from [`SOLVER_ENV`], else the first known solver found on
    /// `PATH`, else plain `z3` (which then fails with a diagnostic).
    pub fn detect(timeout_ms: u64) -> Result<SolverConfig, ConfigError> {
        if let Ok(line) = std::env::var(SOLVER_ENV) {
            if !line.trim().is_empty() {
                return SolverConfig::from_command_line(&line, timeout_ms);
            }
        }
        let found = KNOWN_SOLVERS
            .iter()
            .find(|(exe, _)| find_on_path(exe).is_some())
            .unwrap_or(&KNOWN_SOLVERS[0]);
        let mut command = vec![found.0.to_string()];
        command.extend(found.1.iter().map(|a| a.to_string()));
        SolverConfig::new(command, timeout_ms)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    pub fn with_timeout(mut self, timeout_ms: u64) -> SolverConfig {
        self.timeout_ms = timeout_ms.max(1);
        self
    }

    pub fn with_incremental(mut self, incremental: bool) -> SolverConfig {
        self.incremental = incremental;
        self
    }
}

fn find_on_path(exe: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join(exe))
        .find(|p| is_executable(p))
}

fn is_executable(p: &Path) -> bool {
    p.is_file()
}

/// Variable assignment returned with a `sat` answer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Model {
    pub values: BTreeMap<String, Value>,
}

impl Model {
    pub fn get(&self, name: &str) -> Option<Value> {
        self.values.get(name).copied()
    }

    pub fn int(&self, name: &str) -> Option<i64> {
        self.get(name).and_then(Value::as_int)
    }

    pub fn bool(&self, name: &str) -> Option<bool> {
        self.get(name).and_then(Value::as_bool)
    }

    pub fn lookup(&self) -> impl Fn(&str) -> Option<Value> + '_ {
        move |n| self.get(n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Sat(Model),
    Unsat,
    Unknown(String),
    Timeout,
    SolverError(String),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Sat(_) => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Unknown(_) => "unknown",
            Verdict::Timeout => "timeout",
            Verdict::SolverError(_) => "error",
        }
    }

    pub fn is_decisive(&self) -> bool {
        matches!(self, Verdict::Sat(_) | Verdict::Unsat)
    }
}

/// Evaluates `term` under the model.
pub fn eval_in_model(m: &Model, term: &Expr) -> Result<Value, EvalError> {
    term.eval(&m.lookup())
}

/// Runs a fresh solver process on `script` and interprets its answer. The
/// process is killed once the timeout elapses and is always reaped.
pub fn check(script: &str, cfg: &SolverConfig) -> Verdict {
    let (exe, args) = match cfg.command.split_first() {
        Some(x) => x,
        None => return Verdict::SolverError("empty solver command".into()),
    };
    let mut child = match Command::new(exe)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return Verdict::SolverError(format!("cannot run `{exe}`: {e}")),
    };
    let mut stdin = child.stdin.take().expect("stdin is piped");
    let mut stdout = child.stdout.take().expect("stdout is piped");
    let mut stderr = child.stderr.take().expect("stderr is piped");
    let script = script.to_string();
    let writer = thread::spawn(move || {
        // a solver that exits early closes the pipe; that is not an error here
        let _ = stdin.write_all(script.as_bytes());
    });
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut out = String::new();
        let _ = stdout.read_to_string(&mut out);
        let _ = tx.send(out);
    });
    let err_reader = thread::spawn(move || {
        let mut err = String::new();
        let _ = stderr.read_to_string(&mut err);
        err
    });

    let started = Instant::now();
    let out = match rx.recv_timeout(cfg.timeout()) {
        Ok(out) => Some(out),
        Err(_) => {
            let _ = child.kill();
            None
        }
    };
    let status = child.wait();
    let _ = writer.join();
    let err = err_reader.join().unwrap_or_default();
    log::trace!("solver answered in {:?}", started.elapsed());
    let Some(out) = out else {
        return Verdict::Timeout;
    };
    let verdict = parse_response(&out);
    match (&verdict, status) {
        (Verdict::SolverError(msg), Ok(st)) if !st.success() => {
            Verdict::SolverError(format!("{msg}; exit status {st}; stderr: {}", err.trim()))
        }
        _ => verdict,
    }
}

/// Interprets solver output: the first `sat` / `unsat` / `unknown` answer
/// and, after `sat`, the model given as `get-value` pairs or `define-fun`
/// forms. Errors printed after `unsat` or `unknown` (for the model request)
/// are ignored.
pub fn parse_response(out: &str) -> Verdict {
    let items = match sexp::parse_all(out) {
        Ok(items) => items,
        Err(e) => {
            return Verdict::SolverError(format!("unparsable solver output ({e}): {}", out.trim()))
        }
    };
    let mut it = items.iter().skip_while(|s| s.as_atom() == Some("success"));
    match it.next() {
        Some(Sexp::Atom(a)) if a == "sat" => {
            let mut model = Model::default();
            for s in it {
                if let Err(e) = read_model(s, &mut model) {
                    return Verdict::SolverError(e);
                }
            }
            Verdict::Sat(model)
        }
        Some(Sexp::Atom(a)) if a == "unsat" => Verdict::Unsat,
        Some(Sexp::Atom(a)) if a == "unknown" => {
            let reason = it
                .find_map(|s| match s.as_list() {
                    Some([k, v]) if k.as_atom() == Some(":reason-unknown") => Some(v.to_string()),
                    _ => None,
                })
                .unwrap_or_else(|| "unknown".to_string());
            Verdict::Unknown(reason)
        }
        Some(Sexp::List(l)) if l.first().and_then(Sexp::as_atom) == Some("error") => {
            Verdict::SolverError(l.get(1).map(|s| s.to_string()).unwrap_or_default())
        }
        Some(other) => Verdict::SolverError(format!("unexpected solver output `{other}`")),
        None => Verdict::SolverError("no answer from solver".into()),
    }
}

fn read_model(s: &Sexp, m: &mut Model) -> Result<(), String> {
    let Some(list) = s.as_list() else {
        return Ok(());
    };
    match list.first().and_then(Sexp::as_atom) {
        Some("error") => return Err(format!("solver error: {s}")),
        Some("model") => {
            for d in &list[1..] {
                read_model_entry(d, m)?;
            }
            return Ok(());
        }
        Some("define-fun") => return read_model_entry(s, m),
        _ => {}
    }
    for entry in list {
        read_model_entry(entry, m)?;
    }
    Ok(())
}

fn read_model_entry(s: &Sexp, m: &mut Model) -> Result<(), String> {
    let bad = || format!("malformed model entry `{s}`");
    let list = s.as_list().ok_or_else(bad)?;
    let (name, value) = match list {
        [name, value] => (name, value),
        [kw, name, params, _sort, value] if kw.as_atom() == Some("define-fun") => {
            if params.as_list().is_some_and(|p| !p.is_empty()) {
                return Ok(());
            }
            (name, value)
        }
        [first, ..] if first.as_list().is_some() => {
            for entry in list {
                read_model_entry(entry, m)?;
            }
            return Ok(());
        }
        _ => return Err(bad()),
    };
    let name = name.as_atom().ok_or_else(bad)?;
    let name = name.trim_matches('|').to_string();
    let value = Expr::from_sexp(value)
        .ok()
        .and_then(|e| e.eval(&|_| None).ok())
        .ok_or_else(|| format!("unsupported model value `{value}` for `{name}`"))?;
    m.values.insert(name, value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lone_known_solvers_get_their_stdin_flags() {
        let c = SolverConfig::from_command_line("/opt/bin/z3", 10).unwrap();
        assert_eq!(c.command, ["/opt/bin/z3", "-in", "-smt2"]);
        let c = SolverConfig::from_command_line("cvc5 --lang=smt2", 10).unwrap();
        assert_eq!(c.command, ["cvc5", "--lang=smt2"]);
        let c = SolverConfig::from_command_line("mysolver", 10).unwrap();
        assert_eq!(c.command, ["mysolver"]);
        assert_eq!(
            SolverConfig::from_command_line("  ", 10),
            Err(ConfigError::EmptyCommand)
        );
        assert_eq!(
            SolverConfig::from_command_line("z3", 0),
            Err(ConfigError::ZeroTimeout)
        );
    }

    #[test]
    fn get_value_pairs() {
        let v = parse_response("sat\n((b_0 true) (x (- 5)) (cost 36))\n");
        let Verdict::Sat(m) = v else { panic!("{v:?}") };
        assert_eq!(m.bool("b_0"), Some(true));
        assert_eq!(m.int("x"), Some(-5));
        assert_eq!(m.int("cost"), Some(36));
    }

    #[test]
    fn define_fun_models() {
        let out =
            "sat\n(model\n  (define-fun x () Int\n    (- 3))\n  (define-fun b () Bool true)\n)\n";
        let Verdict::Sat(m) = parse_response(out) else {
            panic!()
        };
        assert_eq!(m.int("x"), Some(-3));
        assert_eq!(m.bool("b"), Some(true));
        let bare = "sat\n((define-fun y () Int 4))";
        let Verdict::Sat(m) = parse_response(bare) else {
            panic!()
        };
        assert_eq!(m.int("y"), Some(4));
    }

    #[test]
    fn errors_after_unsat_are_ignored() {
        let out = "unsat\n(error \"line 9 column 10: model is not available\")\n";
        assert_eq!(parse_response(out), Verdict::Unsat);
        assert!(matches!(parse_response("unknown\n"), Verdict::Unknown(_)));
        assert!(matches!(parse_response(""), Verdict::SolverError(_)));
        assert!(matches!(
            parse_response("(error \"x\")"),
            Verdict::SolverError(_)
        ));
    }

    #[test]
    fn eval_in_models() {
        let mut m = Model::default();
        m.values.insert("b".into(), Value::Bool(true));
        let e = Expr::ite(Expr::var("b"), Expr::Int(2), Expr::Int(3));
        assert_eq!(eval_in_model(&m, &e), Ok(Value::Int(2)));
        m.values.insert("x".into(), Value::Int(5));
        m.values.insert("y".into(), Value::Int(-5));
        let s = Expr::Add(vec![Expr::var("x"), Expr::var("y")]);
        assert_eq!(eval_in_model(&m, &s), Ok(Value::Int(0)));
        assert!(eval_in_model(&m, &Expr::var("z")).is_err());
    }

    #[test]
    fn missing_executable_is_a_solver_error() {
        let cfg = SolverConfig::new(vec!["/nonexistent/solver".into()], 1000).unwrap();
        assert!(matches!(
            check("(check-sat)", &cfg),
            Verdict::SolverError(_)
        ));
    }

    #[test]
    fn zero_timeout_is_rejected() {
        assert_eq!(
            SolverConfig::new(vec!["z3".into()], 0),
            Err(ConfigError::ZeroTimeout)
        );
    }
}
