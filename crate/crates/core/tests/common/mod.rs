//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smtwcet::bench::enumerate_paths;
use smtwcet::encode::{encode, CutMode, CutVar, EncodingOptions, Formula};
use smtwcet::ir::{BlockId, CostModel, EdgeId, Expr, Program, Value};
use smtwcet::solve::{eval_in_model, Session, SolverConfig, Verdict};

pub fn solver(timeout_ms: u64) -> SolverConfig {
    SolverConfig::detect(timeout_ms).expect("solver configuration")
}

fn reachable_without(p: &Program, removed: Option<BlockId>) -> Vec<bool> {
    let mut seen = vec![false; p.num_blocks()];
    if removed == Some(p.entry()) {
        return seen;
    }
    let mut stack = vec![p.entry()];
    seen[p.entry().0] = true;
    while let Some(b) = stack.pop() {
        for e in p.succs(b) {
            let to = p.edge(*e).to;
            if Some(to) != removed && !seen[to.0] {
                seen[to.0] = true;
                stack.push(to);
            }
        }
    }
    seen
}

/// `a` dominates `b` iff `b` is `a` or unreachable once `a` is removed.
pub fn brute_dominators(p: &Program) -> Vec<BTreeSet<BlockId>> {
    let mut doms: Vec<BTreeSet<BlockId>> = p.block_ids().map(|b| BTreeSet::from([b])).collect();
    for a in p.block_ids() {
        let seen = reachable_without(p, Some(a));
        for b in p.block_ids() {
            if !seen[b.0] {
                doms[b.0].insert(a);
            }
        }
    }
    doms
}

/// The strict dominator of each block that every other strict dominator
/// dominates; the entry maps to itself.
pub fn brute_idoms(p: &Program) -> Vec<BlockId> {
    let doms = brute_dominators(p);
    p.block_ids()
        .map(|b| {
            doms[b.0]
                .iter()
                .copied()
                .filter(|&a| a != b)
                .max_by_key(|a| doms[a.0].len())
                .unwrap_or(b)
        })
        .collect()
}

/// Largest cost of any structural path, counting only `edges` and `blocks`
/// (everything when `None`).
pub fn brute_bound(
    p: &Program,
    costs: &CostModel,
    part: Option<(&BTreeSet<EdgeId>, &BTreeSet<BlockId>)>,
) -> u64 {
    let paths = enumerate_paths(p, 1 << 16).expect("few paths");
    paths
        .iter()
        .map(|path| {
            let blocks: u64 = path
                .iter()
                .filter(|b| part.map_or(true, |(_, bs)| bs.contains(b)))
                .map(|b| costs.block_cost(*b))
                .sum();
            let edges: u64 = path
                .windows(2)
                .map(|w| p.find_edge(w[0], w[1]).expect("path follows edges"))
                .filter(|e| part.map_or(true, |(es, _)| es.contains(e)))
                .map(|e| costs.edge_cost(e))
                .sum();
            blocks + edges
        })
        .max()
        .unwrap_or(0)
}

/// The formula with every cut bound removed; the cut definitions stay.
pub fn without_cut_bounds(f: &Formula) -> Formula {
    let bounds: Vec<Expr> = f.cut_vars.iter().map(|c| c.constraint()).collect();
    let mut g = f.clone();
    g.asserts.retain(|a| !bounds.contains(&a.expr));
    g
}

/// Outcome of evaluating every cut on sampled models.
#[derive(Debug, Default)]
pub struct CutCheck {
    pub models: usize,
    pub cuts: usize,
    pub violations: Vec<String>,
    pub indecisive: usize,
}

/// Samples up to `n` models of `f` without its cut bounds, steering each
/// towards a random cost threshold and away from the paths already seen,
/// and evaluates every constraint of `cuts` in each model.
pub fn check_cuts_on_samples(
    f: &Formula,
    cuts: &[CutVar],
    n: usize,
    seed: u64,
    solver: &SolverConfig,
    max_cost: u64,
) -> CutCheck {
    let relaxed = without_cut_bounds(f);
    let mut session = Session::new(&relaxed, solver);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocked: Vec<Expr> = Vec::new();
    let mut out = CutCheck {
        cuts: cuts.len(),
        ..CutCheck::default()
    };
    let mut attempts = 0;
    while out.models < n && attempts < 4 * n {
        attempts += 1;
        let threshold = rng.gen_range(0..=max_cost) as i64;
        let mut extra = blocked.clone();
        extra.push(Expr::ge(Expr::var(&f.cost_var), Expr::Int(threshold)));
        match session.query(&extra) {
            Verdict::Sat(m) => {
                out.models += 1;
                for c in cuts {
                    match eval_in_model(&m, &c.constraint()) {
                        Ok(Value::Bool(true)) => {}
                        other => out.violations.push(format!("{}: {other:?}", c.label)),
                    }
                }
                let taken: Vec<Expr> = f
                    .edge_vars
                    .iter()
                    .filter(|t| m.bool(t) == Some(true))
                    .map(|t| Expr::not(Expr::var(t)))
                    .collect();
                if !taken.is_empty() {
                    blocked.push(Expr::or(taken));
                }
            }
            Verdict::Unsat => blocked.clear(),
            _ => out.indecisive += 1,
        }
    }
    out
}

/// Formula of `p` with the cuts of `mode`.
pub fn formula(p: &Program, costs: &CostModel, mode: CutMode) -> Formula {
    encode(
        p,
        costs,
        EncodingOptions {
            cuts: mode,
            ..EncodingOptions::default()
        },
    )
    .expect("encodable")
}
