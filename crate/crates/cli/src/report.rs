//! Analysis and oracle reports, as text or JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use smtwcet::bench::OracleOutcome;
use smtwcet::encode::{CostEncoding, CutMode};
use smtwcet::ir::{Program, Value};
use smtwcet::omt::{
    Analysis, AnalysisOptions, CutBound, QueryRecord, RefineRecord, Strategy, WitnessPath,
};
use smtwcet::solve::SolverConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub encoding: CostEncoding,
    pub cuts: CutMode,
    pub strategy: Strategy,
    pub refine_portions: bool,
    pub solver: Vec<String>,
    pub timeout_ms: u64,
    pub incremental: bool,
}

impl ReportConfig {
    pub fn new(opts: &AnalysisOptions, solver: &SolverConfig) -> ReportConfig {
        ReportConfig {
            encoding: opts.encoding,
            cuts: opts.cuts,
            strategy: opts.strategy,
            refine_portions: opts.refine_portions,
            solver: solver.command.clone(),
            timeout_ms: solver.timeout_ms,
            incremental: solver.incremental,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub program: String,
    pub input: String,
    pub config: ReportConfig,
    /// Whether loops were unrolled before the analysis.
    pub unrolled: bool,
    pub blocks: usize,
    pub edges: usize,
    pub syntactic_bound: u64,
    pub wcet: u64,
    /// `syntactic_bound - wcet`.
    pub improvement: u64,
    /// `100 * (syntactic_bound - wcet) / syntactic_bound`, 0 for a zero bound.
    pub diff_percent: f64,
    /// False when `wcet` is an upper bound left by an indecisive query.
    pub sound: bool,
    pub witness: Option<WitnessPath>,
    /// Number of cut constraints, the whole-program bound included.
    pub cuts: usize,
    pub cut_bounds: Vec<CutBound>,
    pub refinements: Vec<RefineRecord>,
    pub queries: usize,
    pub wall_ms: f64,
    pub trace: Vec<QueryRecord>,
}

pub fn diff_percent(syntactic: u64, wcet: u64) -> f64 {
    if syntactic == 0 {
        0.0
    } else {
        100.0 * syntactic.saturating_sub(wcet) as f64 / syntactic as f64
    }
}

fn render_inputs(values: &BTreeMap<String, Value>) -> String {
    if values.is_empty() {
        return "(none)".into();
    }
    values
        .iter()
        .map(|(k, v)| match v {
            Value::Int(i) => format!("{k} = {i}"),
            Value::Bool(b) => format!("{k} = {b}"),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

impl AnalyzeReport {
    pub fn new(
        p: &Program,
        input: String,
        config: ReportConfig,
        unrolled: bool,
        a: &Analysis,
        wall_ms: f64,
    ) -> AnalyzeReport {
        let r = &a.result;
        AnalyzeReport {
            program: p.name().to_string(),
            input,
            config,
            unrolled,
            blocks: p.num_blocks(),
            edges: p.num_edges(),
            syntactic_bound: r.syntactic_bound,
            wcet: r.wcet,
            improvement: r.syntactic_bound.saturating_sub(r.wcet),
            diff_percent: diff_percent(r.syntactic_bound, r.wcet),
            sound: r.sound,
            witness: r.witness.clone(),
            cuts: a.cut_count(),
            cut_bounds: r.per_cut_bounds.clone(),
            refinements: a.refinements.clone(),
            queries: r.stats.queries,
            wall_ms,
            trace: r.trace.clone(),
        }
    }

    pub fn to_text(&self, verbose: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "program     {}", self.program);
        let _ = writeln!(
            s,
            "blocks      {} ({} edges{})",
            self.blocks,
            self.edges,
            if self.unrolled { ", unrolled" } else { "" }
        );
        let _ = writeln!(s, "syntactic   {}", self.syntactic_bound);
        let status = if self.sound {
            "exact"
        } else {
            "upper bound only"
        };
        let _ = writeln!(s, "wcet        {} ({status})", self.wcet);
        let _ = writeln!(
            s,
            "diff        {:.1}% ({} cycles)",
            self.diff_percent, self.improvement
        );
        let _ = writeln!(s, "cuts        {}", self.cuts);
        let _ = writeln!(s, "queries     {}", self.queries);
        let _ = writeln!(s, "wall        {:.1} ms", self.wall_ms);
        if let Some(w) = &self.witness {
            let _ = writeln!(s, "path        {} (cost {})", w.blocks.join(" -> "), w.cost);
            let _ = writeln!(s, "inputs      {}", render_inputs(&w.input_values));
        }
        for c in &self.cut_bounds {
            let _ = writeln!(
                s,
                "cut         {} <= {} (syntactic {})",
                c.label, c.optimized, c.syntactic
            );
        }
        for r in &self.refinements {
            let _ = writeln!(
                s,
                "refined     {} <= {} (syntactic {})",
                r.label, r.refined, r.syntactic
            );
        }
        if verbose {
            for q in &self.trace {
                let m = q.m.map_or("-".to_string(), |m| m.to_string());
                let _ = writeln!(
                    s,
                    "query       {} >= {m}: {} in {:.1} ms",
                    q.objective, q.verdict, q.elapsed_ms
                );
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub program: String,
    pub input: String,
    #[serde(flatten)]
    pub outcome: OracleOutcome,
}

impl OracleReport {
    pub fn new(p: &Program, input: String, outcome: &OracleOutcome) -> OracleReport {
        OracleReport {
            program: p.name().to_string(),
            input,
            outcome: outcome.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "program     {}", self.program);
        match &self.outcome {
            OracleOutcome::Feasible(w) => {
                let _ = writeln!(s, "paths       {}", w.paths);
                let _ = writeln!(s, "checks      {}", w.checks);
                let _ = writeln!(s, "wcet        {}", w.wcet);
                let _ = writeln!(s, "path        {}", w.blocks.join(" -> "));
                let _ = writeln!(s, "inputs      {}", render_inputs(&w.input_values));
            }
            OracleOutcome::NoFeasiblePath { paths, checks } => {
                let _ = writeln!(s, "paths       {paths}");
                let _ = writeln!(s, "checks      {checks}");
                let _ = writeln!(s, "wcet        none (no feasible path)");
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diff_is_relative_to_the_syntactic_bound() {
        assert!((diff_percent(39, 32) - 17.948_717).abs() < 1e-4);
        assert_eq!(diff_percent(0, 0), 0.0);
        assert_eq!(diff_percent(10, 10), 0.0);
    }
}
