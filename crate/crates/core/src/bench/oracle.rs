//! WCET by explicit path exploration with incremental feasibility checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::ir::{BlockId, CostModel, Expr, Program, Type, Value};
use crate::par::{self, Exec};
use crate::solve::{Interactive, Model, SolverConfig, Verdict};

pub const DEFAULT_PATH_LIMIT: usize = 4096;

/// Number of entry-to-exit paths, saturating.
pub fn count_paths(p: &Program) -> u128 {
    let order = crate::cfgkit::topo_order(p).expect("loop-free program");
    let mut count = vec![0u128; p.num_blocks()];
    count[p.exit().0] = 1;
    for &b in order.iter().rev() {
        if b == p.exit() {
            continue;
        }
        count[b.0] = p
            .succs(b)
            .iter()
            .fold(0u128, |acc, e| acc.saturating_add(count[p.edge(*e).to.0]));
    }
    count[p.entry().0]
}

/// Every structural entry-to-exit path, or `None` past `limit` paths.
pub fn enumerate_paths(p: &Program, limit: usize) -> Option<Vec<Vec<BlockId>>> {
    if count_paths(p) > limit as u128 {
        return None;
    }
    let mut out = Vec::new();
    let mut stack = vec![vec![p.entry()]];
    while let Some(path) = stack.pop() {
        let last = *path.last().expect("paths are non-empty");
        if last == p.exit() {
            out.push(path);
            continue;
        }
        for e in p.succs(last).iter().rev() {
            let mut next = path.clone();
            next.push(p.edge(*e).to);
            stack.push(next);
        }
    }
    Some(out)
}

fn smt_name(v: &str) -> String {
    format!("v_{v}")
}

fn rename(e: &Expr) -> Expr {
    e.rename(&|v: &str| smt_name(v))
}

/// Facts of entering `path[k]` from `path[k - 1]`: the branch guard taken,
/// the phi choices, then the block's assignments and assumptions.
fn step_facts(p: &Program, path: &[BlockId], k: usize) -> Vec<Expr> {
    let mut facts = Vec::new();
    let block = p.block(path[k]);
    if k > 0 {
        let pred = path[k - 1];
        let e = p.find_edge(pred, path[k]).expect("path follows edges");
        facts.push(p.edge(e).guard.clone());
        for phi in &block.phis {
            let (_, src) = phi
                .sources
                .iter()
                .find(|(from, _)| *from == pred)
                .expect("phi covers every predecessor");
            facts.push(Expr::eq(Expr::var(&phi.target), src.clone()));
        }
    }
    for (x, v) in &block.assigns {
        facts.push(Expr::eq(Expr::var(x), v.clone()));
    }
    facts.extend(block.assumes.iter().cloned());
    facts
}

/// Declarations and input ranges.
fn preamble(p: &Program) -> String {
    let mut s = String::from("(set-option :produce-models true)\n(set-logic QF_LIA)\n");
    for (v, t) in p.var_types() {
        let sort = match t {
            Type::Int => "Int",
            Type::Bool => "Bool",
        };
        let _ = writeln!(s, "(declare-fun {} () {sort})", smt_name(v));
    }
    for h in p.inputs() {
        let x = Expr::var(&h.name);
        if let Some(lo) = h.lo {
            let _ = writeln!(
                s,
                "(assert {})",
                rename(&Expr::le(Expr::Int(lo), x.clone()))
            );
        }
        if let Some(hi) = h.hi {
            let _ = writeln!(s, "(assert {})", rename(&Expr::le(x, Expr::Int(hi))));
        }
    }
    s
}

fn get_inputs(p: &Program) -> String {
    if p.inputs().is_empty() {
        return String::new();
    }
    let names: Vec<String> = p.inputs().iter().map(|h| smt_name(&h.name)).collect();
    format!("(get-value ({}))\n", names.join(" "))
}

/// SMT-LIB script asking whether `path` is feasible: input ranges, then
/// along the path the branch conditions, phi choices, assignments and
/// assumptions.
pub fn path_script(p: &Program, path: &[BlockId]) -> String {
    let mut s = preamble(p);
    for k in 0..path.len() {
        for f in step_facts(p, path, k) {
            let _ = writeln!(s, "(assert {})", rename(&f));
        }
    }
    s.push_str("(check-sat)\n");
    s.push_str(&get_inputs(p));
    s.push_str("(exit)\n");
    s
}

/// Most expensive feasible path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleWitness {
    pub wcet: u64,
    pub blocks: Vec<String>,
    pub input_values: BTreeMap<String, Value>,
    /// Structural entry-to-exit paths.
    pub paths: usize,
    /// Feasibility checks issued.
    pub checks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum OracleOutcome {
    Feasible(OracleWitness),
    NoFeasiblePath { paths: usize, checks: usize },
}

impl OracleOutcome {
    pub fn wcet(&self) -> Option<u64> {
        match self {
            OracleOutcome::Feasible(w) => Some(w.wcet),
            OracleOutcome::NoFeasiblePath { .. } => None,
        }
    }
}

/// Best feasible path found so far, shared by concurrent explorers.
struct Best {
    /// Cost plus one of the best path; zero before any.
    bar: AtomicU64,
    found: Mutex<Option<(u64, Vec<BlockId>, Model)>>,
}

impl Best {
    /// Whether a path of cost at most `bound` can still improve the result.
    fn beaten(&self, bound: u64) -> bool {
        bound + 1 <= self.bar.load(Ordering::Relaxed)
    }

    fn offer(&self, cost: u64, path: &[BlockId], m: Model) {
        let mut found = self.found.lock().expect("no panics while holding the lock");
        if found.as_ref().map_or(true, |(c, _, _)| cost > *c) {
            *found = Some((cost, path.to_vec(), m));
            self.bar.fetch_max(cost + 1, Ordering::Relaxed);
        }
    }
}

/// Depth-first search over the paths extending one prefix, with one solver
/// process whose assertion stack mirrors the current path.
struct Explorer<'a> {
    p: &'a Program,
    costs: &'a CostModel,
    /// Largest cost from the start of a block to the end of the exit.
    rest: &'a [u64],
    best: &'a Best,
    solver: Interactive,
    checks: usize,
}

fn indecisive(v: Verdict) -> BenchError {
    match v {
        Verdict::Unknown(r) => BenchError::Indecisive(format!("unknown: {r}")),
        Verdict::Timeout => BenchError::Indecisive("timeout".into()),
        Verdict::SolverError(e) => BenchError::Solver(e),
        v => BenchError::Solver(format!("unexpected answer {}", v.name())),
    }
}

impl Explorer<'_> {
    fn enter(&mut self, path: &[BlockId]) -> Result<(), BenchError> {
        let mut text = String::from("(push 1)\n");
        for f in step_facts(self.p, path, path.len() - 1) {
            let _ = writeln!(text, "(assert {})", rename(&f));
        }
        self.solver.send(&text).map_err(indecisive)
    }

    fn leave(&mut self) -> Result<(), BenchError> {
        self.solver.send("(pop 1)\n").map_err(indecisive)
    }

    fn feasible(&mut self, with_inputs: bool) -> Result<Option<Model>, BenchError> {
        self.checks += 1;
        let mut q = String::from("(check-sat)\n");
        if with_inputs {
            q.push_str(&get_inputs(self.p));
        }
        match self.solver.ask(&q) {
            Verdict::Sat(m) => Ok(Some(m)),
            Verdict::Unsat => Ok(None),
            v => Err(indecisive(v)),
        }
    }

    /// Explores below the last block of `path`, whose facts are asserted;
    /// `cost` excludes that block's own cost.
    fn dfs(&mut self, path: &mut Vec<BlockId>, cost: u64) -> Result<(), BenchError> {
        let b = *path.last().expect("paths are non-empty");
        let cost = cost + self.costs.block_cost(b);
        if b == self.p.exit() {
            if !self.best.beaten(cost) {
                if let Some(m) = self.feasible(true)? {
                    self.best.offer(cost, path, m);
                }
            }
            return Ok(());
        }
        let mut succs: Vec<_> = self.p.succs(b).to_vec();
        let bound =
            |e: &crate::ir::EdgeId| self.costs.edge_cost(*e) + self.rest[self.p.edge(*e).to.0];
        succs.sort_by_key(|e| std::cmp::Reverse(bound(e)));
        let branching = succs.len() > 1;
        for e in succs {
            if self.best.beaten(cost + bound(&e)) {
                continue;
            }
            path.push(self.p.edge(e).to);
            self.enter(path)?;
            if !branching || self.feasible(false)?.is_some() {
                self.dfs(path, cost + self.costs.edge_cost(e))?;
            }
            self.leave()?;
            path.pop();
        }
        Ok(())
    }

    fn run(
        p: &Program,
        costs: &CostModel,
        rest: &[u64],
        best: &Best,
        solver: &SolverConfig,
        prefix: &[BlockId],
    ) -> Result<usize, BenchError> {
        let mut ex = Explorer {
            p,
            costs,
            rest,
            best,
            solver: Interactive::spawn(solver, &preamble(p)).map_err(indecisive)?,
            checks: 0,
        };
        let mut path = Vec::with_capacity(p.num_blocks());
        for &b in prefix {
            path.push(b);
            ex.enter(&path)?;
        }
        let last = *prefix.last().expect("prefixes are non-empty");
        let before =
            costs.path_cost(p, prefix).expect("prefix follows edges") - costs.block_cost(last);
        if prefix.len() == 1 || ex.feasible(false)?.is_some() {
            ex.dfs(&mut path, before)?;
        }
        Ok(ex.checks)
    }
}

/// Splits the paths into subtrees for concurrent exploration: structural
/// prefixes, extended breadth-first until there are at least `target`.
fn frontier(p: &Program, target: usize) -> Vec<Vec<BlockId>> {
    let mut front = vec![vec![p.entry()]];
    while front.len() < target {
        let mut next = Vec::new();
        let mut grew = false;
        for prefix in front {
            let last = *prefix.last().expect("prefixes are non-empty");
            if last == p.exit() {
                next.push(prefix);
                continue;
            }
            grew |= p.succs(last).len() > 1;
            for e in p.succs(last) {
                let mut q = prefix.clone();
                q.push(p.edge(*e).to);
                next.push(q);
            }
        }
        front = next;
        if !grew
            && front
                .iter()
                .all(|q| *q.last().expect("non-empty") == p.exit())
        {
            break;
        }
    }
    front
}

/// Exact WCET by exploring every structural path (at most `limit` of them)
/// depth first, asking the solver whether each branch taken is still
/// feasible and skipping subtrees that cannot beat the best path found.
/// Under `Exec::Parallel` disjoint subtrees run in separate solvers.
pub fn oracle_wcet_with(
    p: &Program,
    costs: &CostModel,
    solver: &SolverConfig,
    limit: usize,
    exec: Exec,
) -> Result<OracleOutcome, BenchError> {
    costs
        .check(p)
        .map_err(|e| BenchError::Spec(e.to_string()))?;
    let total = count_paths(p);
    if total > limit as u128 {
        return Err(BenchError::PathBudget {
            limit,
            paths: total,
        });
    }
    let order = crate::cfgkit::topo_order(p).map_err(|e| BenchError::Spec(e.to_string()))?;
    let mut rest = vec![0u64; p.num_blocks()];
    for &b in order.iter().rev() {
        let tail = p
            .succs(b)
            .iter()
            .map(|e| costs.edge_cost(*e) + rest[p.edge(*e).to.0])
            .max()
            .unwrap_or(0);
        rest[b.0] = costs.block_cost(b) + tail;
    }
    let prefixes = if exec.is_parallel() {
        frontier(p, 4 * rayon_threads())
    } else {
        vec![vec![p.entry()]]
    };
    let best = Best {
        bar: AtomicU64::new(0),
        found: Mutex::new(None),
    };
    let runs = par::map(exec, &prefixes, |prefix| {
        Explorer::run(p, costs, &rest, &best, solver, prefix)
    });
    let mut checks = 0;
    for r in runs {
        checks += r?;
    }
    let paths = total as usize;
    Ok(match best.found.into_inner().expect("explorers finished") {
        None => OracleOutcome::NoFeasiblePath { paths, checks },
        Some((wcet, path, m)) => OracleOutcome::Feasible(OracleWitness {
            wcet,
            blocks: path.iter().map(|b| p.block(*b).name.clone()).collect(),
            input_values: p
                .inputs()
                .iter()
                .filter_map(|h| m.get(&smt_name(&h.name)).map(|v| (h.name.clone(), v)))
                .collect(),
            paths,
            checks,
        }),
    })
}

fn rayon_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();
    #[cfg(not(feature = "parallel"))]
    1
}

/// [`oracle_wcet_with`] with the default path limit, in parallel.
pub fn oracle_wcet(
    p: &Program,
    costs: &CostModel,
    solver: &SolverConfig,
) -> Result<OracleOutcome, BenchError> {
    oracle_wcet_with(p, costs, solver, DEFAULT_PATH_LIMIT, Exec::Parallel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_minilang;

    #[test]
    fn paths_of_two_sequential_ifs() {
        let src = "x = nondet(0, 5); if (x > 1) { cost 1; } if (x > 2) { cost 2; }";
        let (p, _) = parse_minilang(src).unwrap();
        assert_eq!(count_paths(&p), 4);
        let paths = enumerate_paths(&p, 10).unwrap();
        assert_eq!(paths.len(), 4);
        assert!(paths
            .iter()
            .all(|q| q[0] == p.entry() && *q.last().unwrap() == p.exit()));
        assert!(enumerate_paths(&p, 3).is_none());
    }

    #[test]
    fn path_scripts_pin_phi_sources() {
        let src = "x = nondet(0, 5); if (x > 1) { y = 1; } else { y = 2; } assume(y == 2);";
        let (p, _) = parse_minilang(src).unwrap();
        let paths = enumerate_paths(&p, 10).unwrap();
        let scripts: Vec<String> = paths.iter().map(|q| path_script(&p, q)).collect();
        assert!(scripts.iter().any(|s| s.contains("(assert (= v_y.2 v_y))")));
        assert!(scripts.iter().all(|s| s.contains("(assert (<= 0 v_x))")));
    }
}
