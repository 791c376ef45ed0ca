//! Cross-checking the optimizer against the oracle on random programs.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    elapsed_ms, oracle_wcet_with, random_program, BenchError, BenchMode, RandomSpec,
    DEFAULT_PATH_LIMIT,
};
use crate::omt::{analyze, OmtError};
use crate::par::{self, Exec};
use crate::solve::SolverConfig;

/// One optimizer run on one random program next to the oracle's answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivRow {
    pub instance: String,
    pub seed: u64,
    pub mode: BenchMode,
    pub blocks: usize,
    /// Oracle WCET; empty when no path is feasible or the oracle failed.
    pub oracle_wcet: Option<u64>,
    pub oracle_ms: f64,
    /// Optimizer WCET; empty unless the run is sound.
    pub omt_wcet: Option<u64>,
    pub omt_ms: f64,
    /// `sound`, `unsound`, `infeasible` or `error: ...`.
    pub verdict: String,
    /// Whether both sides completed and agree; empty when either did not.
    pub agree: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EquivReport {
    pub rows: Vec<EquivRow>,
}

impl EquivReport {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), BenchError> {
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

    /// Rows where both sides completed.
    pub fn completed(&self) -> impl Iterator<Item = &EquivRow> {
        self.rows.iter().filter(|r| r.agree.is_some())
    }

    pub fn disagreements(&self) -> impl Iterator<Item = &EquivRow> {
        self.rows.iter().filter(|r| r.agree == Some(false))
    }
}

fn run_seed(
    seed: u64,
    spec: RandomSpec,
    modes: &[BenchMode],
    solver: &SolverConfig,
) -> Vec<EquivRow> {
    let (p, costs) = random_program(seed, spec);
    let t0 = Instant::now();
    let oracle = oracle_wcet_with(&p, &costs, solver, DEFAULT_PATH_LIMIT, Exec::Sequential);
    let oracle_ms = elapsed_ms(t0);
    let oracle_ok = oracle.is_ok();
    let oracle_wcet = oracle.ok().and_then(|o| o.wcet());
    modes
        .iter()
        .map(|&mode| {
            let t0 = Instant::now();
            let run = analyze(&p, &costs, mode.options(), solver);
            let omt_ms = elapsed_ms(t0);
            let (omt_wcet, verdict, done) = match run {
                Ok(a) if a.result.sound => (Some(a.result.wcet), "sound".to_string(), true),
                Ok(_) => (None, "unsound".to_string(), false),
                Err(OmtError::Infeasible) => (None, "infeasible".to_string(), true),
                Err(e) => (None, format!("error: {e}"), false),
            };
            EquivRow {
                instance: p.name().to_string(),
                seed,
                mode,
                blocks: p.num_blocks(),
                oracle_wcet,
                oracle_ms,
                omt_wcet,
                omt_ms,
                verdict,
                agree: (done && oracle_ok).then_some(omt_wcet == oracle_wcet),
            }
        })
        .collect()
}

/// Analyzes `random_program(seed, spec)` for every seed in every mode and
/// compares each result with the path-enumeration oracle. Seeds run
/// concurrently under `Exec::Parallel`; rows come out in seed order.
pub fn run_equivalence(
    seeds: &[u64],
    spec: RandomSpec,
    modes: &[BenchMode],
    solver: &SolverConfig,
    exec: Exec,
) -> EquivReport {
    let rows = par::map(exec, seeds, |&seed| run_seed(seed, spec, modes, solver));
    EquivReport {
        rows: rows.into_iter().flatten().collect(),
    }
}
