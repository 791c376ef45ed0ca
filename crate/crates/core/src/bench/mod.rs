//! Diamond programs, a path-enumeration oracle, random program generators
//! and the with/without-cuts scaling harness.

mod diamond;
mod equiv;
mod oracle;
mod random;

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::encode::{emit_smtlib, encode, CutMode, EncodingOptions};
use crate::ir::Expr;
use crate::omt::{analyze, AnalysisOptions, OmtError, Strategy};
use crate::par::{self, Exec};
use crate::solve::{check, SolverConfig, Verdict};

pub use diamond::{gen_diamond, DiamondSpec, FIRST_ARMS, SECOND_ARMS};
pub use equiv::{run_equivalence, EquivReport, EquivRow};
pub use oracle::{
    count_paths, enumerate_paths, oracle_wcet, oracle_wcet_with, path_script, OracleOutcome,
    OracleWitness, DEFAULT_PATH_LIMIT,
};
pub use random::{random_dag, random_program, random_source, RandomSpec};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BenchError {
    #[error("{0}")]
    Spec(String),
    #[error("{paths} paths exceed the limit of {limit}")]
    PathBudget { limit: usize, paths: u128 },
    #[error("solver could not decide a path query ({0})")]
    Indecisive(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error(transparent)]
    Omt(#[from] OmtError),
    #[error("cannot write report: {0}")]
    Io(String),
}

/// Cut configuration of a scaling run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMode {
    NoCuts,
    LeafCuts,
    Hierarchical,
    CutOrdered,
}

impl BenchMode {
    pub const ALL: [BenchMode; 4] = [
        BenchMode::NoCuts,
        BenchMode::LeafCuts,
        BenchMode::Hierarchical,
        BenchMode::CutOrdered,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMode::NoCuts => "no-cuts",
            BenchMode::LeafCuts => "leaf-cuts",
            BenchMode::Hierarchical => "hierarchical",
            BenchMode::CutOrdered => "cut-ordered",
        }
    }

    pub fn options(self) -> AnalysisOptions {
        let (cuts, strategy) = match self {
            BenchMode::NoCuts => (CutMode::None, Strategy::Binary),
            BenchMode::LeafCuts => (CutMode::Leaves, Strategy::Binary),
            BenchMode::Hierarchical => (CutMode::Hierarchical, Strategy::Binary),
            BenchMode::CutOrdered => (CutMode::Hierarchical, Strategy::CutOrdered),
        };
        AnalysisOptions {
            cuts,
            strategy,
            ..AnalysisOptions::default()
        }
    }
}

impl FromStr for BenchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BenchMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                format!(
                    "unknown mode `{s}` (expected no-cuts, leaf-cuts, hierarchical or cut-ordered)"
                )
            })
    }
}

/// What a scaling run measures per instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchQuery {
    /// The full maximization.
    #[default]
    Maximize,
    /// One check of `cost >= 5n + 1`, which is unsatisfiable.
    AboveOptimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalingConfig {
    pub query: BenchQuery,
    /// Per-query solver budget.
    pub budget_ms: u64,
    /// Replace syntactic cut bounds by semantic ones first.
    pub refine_portions: bool,
    /// Repetitions per cell; the row reports the median time.
    pub runs: usize,
    /// Run instances concurrently (times then include contention).
    pub exec: Exec,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            query: BenchQuery::Maximize,
            budget_ms: 60_000,
            refine_portions: false,
            runs: 1,
            exec: Exec::Sequential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: String,
    pub mode: BenchMode,
    pub n: usize,
    pub wcet: Option<u64>,
    pub queries: usize,
    pub wall_ms: f64,
    /// `sat`, `unsat`, `sound`, `timeout`, `unknown` or `error`.
    pub verdict: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r).map_err(|e| BenchError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| BenchError::Io(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn rows_for(&self, mode: BenchMode) -> impl Iterator<Item = &BenchRow> {
        self.rows.iter().filter(move |r| r.mode == mode)
    }
}

/// Milliseconds since `t0`, rounded to microseconds.
pub(crate) fn elapsed_ms(t0: Instant) -> f64 {
    (t0.elapsed().as_secs_f64() * 1e6).round() / 1000.0
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn run_cell(n: usize, mode: BenchMode, cfg: &ScalingConfig, solver: &SolverConfig) -> BenchRow {
    let solver = solver.clone().with_timeout(cfg.budget_ms);
    let mut row = BenchRow {
        instance: format!("diamond{n}"),
        mode,
        n,
        wcet: None,
        queries: 0,
        wall_ms: 0.0,
        verdict: String::new(),
    };
    let (p, costs) = match gen_diamond(DiamondSpec::new(n)) {
        Ok(x) => x,
        Err(e) => {
            row.verdict = format!("error: {e}");
            return row;
        }
    };
    let mut times = Vec::new();
    for _ in 0..cfg.runs.max(1) {
        let t0 = Instant::now();
        match cfg.query {
            BenchQuery::Maximize => {
                let opts = AnalysisOptions {
                    refine_portions: cfg.refine_portions,
                    ..mode.options()
                };
                match analyze(&p, &costs, opts, &solver) {
                    Ok(a) => {
                        let r = a.result;
                        row.queries = r.stats.queries;
                        if r.sound {
                            row.wcet = Some(r.wcet);
                            row.verdict = "sound".into();
                        } else {
                            row.verdict = r
                                .trace
                                .last()
                                .map_or("unknown".to_string(), |q| q.verdict.clone());
                        }
                    }
                    Err(e) => row.verdict = format!("error: {e}"),
                }
            }
            BenchQuery::AboveOptimum => {
                let opts = EncodingOptions {
                    cuts: mode.options().cuts,
                    ..EncodingOptions::default()
                };
                let m = DiamondSpec::new(n).wcet() as i64 + 1;
                row.queries = 1;
                row.verdict = match encode(&p, &costs, opts) {
                    Ok(f) => {
                        let extra = Expr::ge(Expr::var(&f.cost_var), Expr::Int(m));
                        match check(&emit_smtlib(&f, Some(&extra)), &solver) {
                            Verdict::SolverError(e) => format!("error: {e}"),
                            v => v.name().to_string(),
                        }
                    }
                    Err(e) => format!("error: {e}"),
                };
            }
        }
        times.push(elapsed_ms(t0));
        if row.verdict != "sound" && row.verdict != "unsat" && row.verdict != "sat" {
            break;
        }
    }
    row.wall_ms = median(times);
    row
}

/// Runs every `(n, mode)` cell on `diamond(n)`. Timeouts and errors are
/// rows. Rows come out ordered by `n`, then mode.
pub fn run_scaling(
    ns: &[usize],
    modes: &[BenchMode],
    cfg: &ScalingConfig,
    solver: &SolverConfig,
) -> BenchReport {
    let cells: Vec<(usize, BenchMode)> = ns
        .iter()
        .flat_map(|&n| modes.iter().map(move |&m| (n, m)))
        .collect();
    let mut rows = par::map(cfg.exec, &cells, |&(n, m)| {
        let row = run_cell(n, m, cfg, solver);
        log::info!(
            "{} {} {} {:.1} ms",
            row.instance,
            m.name(),
            row.verdict,
            row.wall_ms
        );
        row
    });
    rows.sort_by(|a, b| (a.n, a.mode).cmp(&(b.n, b.mode)));
    BenchReport { rows }
}

/// Parses `a..b` (inclusive) or a comma-separated list of sizes.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    let bad = |x: &str| format!("invalid size `{x}`");
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad(a))?;
        let b: usize = b.trim().parse().map_err(|_| bad(b))?;
        return Ok((a..=b).collect());
    }
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse().map_err(|_| bad(x)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_modes_parse() {
        assert_eq!(parse_sizes("10..13").unwrap(), [10, 11, 12, 13]);
        assert_eq!(parse_sizes("1, 5,9").unwrap(), [1, 5, 9]);
        assert!(parse_sizes("x..3").is_err());
        assert_eq!("leaf-cuts".parse::<BenchMode>(), Ok(BenchMode::LeafCuts));
        assert!("cuts".parse::<BenchMode>().is_err());
    }

    #[test]
    fn empty_size_list_gives_an_empty_report() {
        let solver = SolverConfig::new(vec!["z3".into()], 1000).unwrap();
        let r = run_scaling(&[], &BenchMode::ALL, &ScalingConfig::default(), &solver);
        assert!(r.rows.is_empty());
        assert_eq!(r.to_csv(), "");
    }

    #[test]
    fn csv_has_the_documented_columns() {
        let r = BenchReport {
            rows: vec![BenchRow {
                instance: "diamond3".into(),
                mode: BenchMode::LeafCuts,
                n: 3,
                wcet: Some(15),
                queries: 4,
                wall_ms: 12.5,
                verdict: "sound".into(),
            }],
        };
        assert_eq!(
            r.to_csv(),
            "instance,mode,n,wcet,queries,wall_ms,verdict\ndiamond3,leaf-cuts,3,15,4,12.5,sound\n"
        );
    }
}
