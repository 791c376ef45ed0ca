//! Semantic bounds for program portions, computed by running the whole
//! analysis on the portion as a standalone sub-program.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{maximize_binary_search, OmtError};
use crate::cfgkit::{self, Portion};
use crate::encode::{encode_with_cuts, CostEncoding, CutKind, CutSpec};
use crate::ir::{BlockId, CostModel, EdgeId, HavocVar, Program, RawPhi, RawTerm, Type};
use crate::par::{self, Exec};
use crate::solve::SolverConfig;

/// A header-to-merge region turned into a program of its own, with the
/// ids of the original edges and blocks it keeps.
#[derive(Debug, Clone)]
pub struct SubProgram {
    pub program: Program,
    pub costs: CostModel,
    pub edge_map: HashMap<EdgeId, EdgeId>,
    pub block_map: HashMap<BlockId, BlockId>,
}

/// Extracts the region from `header` to `merge`. Header phis and every
/// value flowing in from outside become unconstrained inputs (program
/// inputs keep their ranges); the merge becomes the exit. Only the costs of
/// `edges` and of `blocks` (the interior) are kept.
pub fn sub_program(
    p: &Program,
    costs: &CostModel,
    header: BlockId,
    merge: BlockId,
    edges: &BTreeSet<EdgeId>,
    blocks: &BTreeSet<BlockId>,
) -> Result<SubProgram, OmtError> {
    let mut all: BTreeSet<BlockId> = blocks.clone();
    all.insert(header);
    all.insert(merge);
    let label = format!("{}..{}", p.block(header).name, p.block(merge).name);
    for &b in &all {
        if b != merge && p.succs(b).iter().any(|e| !edges.contains(e)) {
            return Err(OmtError::Unsupported(format!(
                "region {label} is left through `{}`",
                p.block(b).name
            )));
        }
    }
    let raw = p.to_raw();
    let mut sub_blocks = Vec::with_capacity(all.len());
    let mut defined = BTreeSet::new();
    let mut used = BTreeSet::new();
    for &b in &all {
        let mut rb = raw.blocks[b.0].clone();
        if b == header {
            for phi in &rb.phis {
                used.insert(phi.target.clone());
            }
            rb.phis = Vec::<RawPhi>::new();
        }
        if b == merge {
            rb.term = RawTerm::Return;
        }
        rb.loop_bound = None;
        for phi in &rb.phis {
            defined.insert(phi.target.clone());
            for (_, v) in &phi.sources {
                v.collect_vars(&mut used);
            }
        }
        for (x, v) in &rb.assigns {
            defined.insert(x.clone());
            v.collect_vars(&mut used);
        }
        for a in &rb.assumes {
            a.collect_vars(&mut used);
        }
        if let RawTerm::Branch { cond, .. } = &rb.term {
            cond.collect_vars(&mut used);
        }
        sub_blocks.push(rb);
    }
    let originals: BTreeMap<&str, &HavocVar> =
        p.inputs().iter().map(|h| (h.name.as_str(), h)).collect();
    let inputs = used
        .difference(&defined)
        .map(|v| match originals.get(v.as_str()) {
            Some(h) => (*h).clone(),
            None => match p.var_types().get(v) {
                Some(Type::Bool) => HavocVar::boolean(v.clone()),
                _ => HavocVar::int(v.clone(), None, None),
            },
        })
        .collect();
    let program = crate::ir::RawProgram {
        name: format!("{}.{}", p.name(), label),
        blocks: sub_blocks,
        entry: p.block(header).name.clone(),
        exit: p.block(merge).name.clone(),
        inputs,
    }
    .build()
    .map_err(|e| OmtError::Unsupported(format!("region {label}: {e}")))?;

    let block_map: HashMap<BlockId, BlockId> = all
        .iter()
        .map(|&b| (b, program.find_block(&p.block(b).name).expect("block kept")))
        .collect();
    let mut edge_map = HashMap::new();
    let mut sub_costs = CostModel::zeros(&program);
    for &e in edges {
        let edge = p.edge(e);
        let s = program
            .find_edge(block_map[&edge.from], block_map[&edge.to])
            .expect("region edge kept");
        edge_map.insert(e, s);
        sub_costs.edge[s.0] = costs.edge_cost(e);
    }
    for &b in blocks {
        sub_costs.block[block_map[&b].0] = costs.block_cost(b);
    }
    Ok(SubProgram {
        program,
        costs: sub_costs,
        edge_map,
        block_map,
    })
}

/// Outcome of refining one cut.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineRecord {
    pub label: String,
    pub syntactic: u64,
    pub refined: u64,
    /// False when the solver could not decide and `refined` is an upper
    /// bound only, or when the region is not a standalone sub-program.
    pub sound: bool,
    pub queries: usize,
}

fn translate(spec: &CutSpec, sub: &SubProgram) -> CutSpec {
    CutSpec {
        kind: spec.kind,
        label: spec.label.clone(),
        header: sub.block_map[&spec.header],
        merge: sub.block_map[&spec.merge],
        edges: spec.edges.iter().map(|e| sub.edge_map[e]).collect(),
        blocks: spec.blocks.iter().map(|b| sub.block_map[b]).collect(),
        bound: spec.bound,
        header_pos: spec.header_pos,
    }
}

fn refine_region(
    p: &Program,
    costs: &CostModel,
    spec: &CutSpec,
    nested: &[CutSpec],
    solver: &SolverConfig,
) -> Result<(u64, bool, usize), OmtError> {
    let sub = match sub_program(p, costs, spec.header, spec.merge, &spec.edges, &spec.blocks) {
        Ok(sub) => sub,
        Err(OmtError::Unsupported(_)) => return Ok((spec.bound, false, 0)),
        Err(e) => return Err(e),
    };
    let mut cuts: Vec<CutSpec> = nested.iter().map(|c| translate(c, &sub)).collect();
    cuts.push(CutSpec {
        kind: CutKind::Whole,
        label: spec.label.clone(),
        header: sub.program.entry(),
        merge: sub.program.exit(),
        edges: sub.program.edges().iter().map(|e| e.id).collect(),
        blocks: sub.program.block_ids().collect(),
        bound: cfgkit::syntactic_bound(&sub.program, &sub.costs, cfgkit::Scope::Whole)?,
        header_pos: 0,
    });
    let f = encode_with_cuts(&sub.program, &sub.costs, CostEncoding::Sum, &cuts)?;
    match maximize_binary_search(&sub.program, &sub.costs, &f, spec.bound, solver) {
        Ok(r) => Ok((r.wcet.min(spec.bound), r.sound, r.stats.queries)),
        // a region no feasible trace traverses contributes nothing
        Err(OmtError::Infeasible) => Ok((0, true, 1)),
        Err(e) => Err(e),
    }
}

/// Semantic WCET of a closed portion run as a standalone sub-program.
/// Falls back to the syntactic bound when the solver cannot decide.
pub fn refine_portion_bound(
    p: &Program,
    portion: &Portion,
    costs: &CostModel,
    solver: &SolverConfig,
) -> Result<u64, OmtError> {
    let syntactic = cfgkit::syntactic_bound(p, costs, portion.scope())?;
    let spec = CutSpec {
        kind: CutKind::Leaf,
        label: portion.label(p),
        header: portion.header,
        merge: portion.merge,
        edges: portion.edges.clone(),
        blocks: portion.blocks.clone(),
        bound: syntactic,
        header_pos: 0,
    };
    sub_program(
        p,
        costs,
        portion.header,
        portion.merge,
        &portion.edges,
        &portion.blocks,
    )?;
    let (bound, sound, _) = refine_region(p, costs, &spec, &[], solver)?;
    Ok(if sound { bound } else { bound.min(syntactic) })
}

/// Replaces the bound of every non-whole cut by its semantic WCET, smallest
/// regions first so that each refinement runs with the already refined
/// cuts it contains. Regions whose nested cuts are all refined are
/// processed concurrently.
pub fn refine_cut_specs(
    p: &Program,
    costs: &CostModel,
    specs: &mut [CutSpec],
    solver: &SolverConfig,
) -> Result<Vec<RefineRecord>, OmtError> {
    let n = specs.len();
    let contains = |outer: &CutSpec, inner: &CutSpec| {
        inner.edges.is_subset(&outer.edges) && inner.edges != outer.edges
    };
    let todo: Vec<usize> = (0..n)
        .filter(|&i| specs[i].kind != CutKind::Whole)
        .collect();
    let mut done = vec![false; n];
    let mut records: Vec<Option<RefineRecord>> = vec![None; n];
    for i in 0..n {
        if specs[i].kind == CutKind::Whole {
            done[i] = true;
        }
    }
    let mut remaining = todo;
    while !remaining.is_empty() {
        let (ready, wait): (Vec<usize>, Vec<usize>) = remaining.iter().partition(|&&i| {
            (0..n).all(|j| {
                done[j]
                    || j == i
                    || specs[j].kind == CutKind::Whole
                    || !contains(&specs[i], &specs[j])
            })
        });
        let ready = if ready.is_empty() {
            vec![wait[0]]
        } else {
            ready
        };
        let snapshot: &[CutSpec] = specs;
        let results = par::map(Exec::Parallel, &ready, |&i| {
            let nested: Vec<CutSpec> = (0..n)
                .filter(|&j| {
                    j != i
                        && snapshot[j].kind != CutKind::Whole
                        && contains(&snapshot[i], &snapshot[j])
                })
                .map(|j| snapshot[j].clone())
                .collect();
            refine_region(p, costs, &snapshot[i], &nested, solver)
        });
        for (&i, r) in ready.iter().zip(results) {
            let (bound, sound, queries) = r?;
            let syntactic = specs[i].bound;
            specs[i].bound = bound.min(syntactic);
            records[i] = Some(RefineRecord {
                label: specs[i].label.clone(),
                syntactic,
                refined: specs[i].bound,
                sound,
                queries,
            });
            done[i] = true;
        }
        remaining.retain(|i| !done[*i]);
    }
    Ok(records.into_iter().flatten().collect())
}
