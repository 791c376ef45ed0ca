//! Graph algorithms over loop-free CFGs: topological order, dominators,
//! portion discovery and grouping, and the syntactic longest-path bound.

pub mod dom;
mod portions;

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use crate::ir::{BlockId, CostError, CostModel, EdgeId, Program};

pub use dom::{immediate_dominators, DomTree};
pub use portions::{
    bound_portions, dump_portions, find_portions, group_portions, outermost, NodeKind, Portion,
    PortionTree, TreeNode,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CfgError {
    #[error("cycle through block `{0}`")]
    Cycle(String),
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// Kahn's algorithm; among ready blocks the lowest id goes first.
pub fn topo_order(p: &Program) -> Result<Vec<BlockId>, CfgError> {
    let n = p.num_blocks();
    let mut indeg: Vec<usize> = p.block_ids().map(|b| p.preds(b).len()).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(b)) = ready.pop() {
        order.push(BlockId(b));
        for e in p.succs(BlockId(b)) {
            let t = p.edge(*e).to.0;
            indeg[t] -= 1;
            if indeg[t] == 0 {
                ready.push(Reverse(t));
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n)
            .find(|&i| indeg[i] > 0)
            .expect("some block left over");
        return Err(CfgError::Cycle(p.block(BlockId(stuck)).name.clone()));
    }
    Ok(order)
}

/// Position of every block in `order`.
pub fn positions(order: &[BlockId], n: usize) -> Vec<usize> {
    let mut pos = vec![0; n];
    for (i, b) in order.iter().enumerate() {
        pos[b.0] = i;
    }
    pos
}

/// The set of costs a bound ranges over: the indicator of the paper-style
/// recurrence. `Whole` counts every edge and block.
#[derive(Debug, Clone, Copy)]
pub enum Scope<'a> {
    Whole,
    Part {
        edges: &'a BTreeSet<EdgeId>,
        blocks: &'a BTreeSet<BlockId>,
    },
}

impl Scope<'_> {
    fn has_edge(&self, e: EdgeId) -> bool {
        match self {
            Scope::Whole => true,
            Scope::Part { edges, .. } => edges.contains(&e),
        }
    }

    fn has_block(&self, b: BlockId) -> bool {
        match self {
            Scope::Whole => true,
            Scope::Part { blocks, .. } => blocks.contains(&b),
        }
    }
}

/// `w[b]`: the largest in-scope cost accumulated on any path from entry to
/// the start of `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LongestPathTable {
    pub w: Vec<u64>,
}

pub fn longest_path_table(
    p: &Program,
    costs: &CostModel,
    scope: Scope<'_>,
) -> Result<LongestPathTable, CfgError> {
    costs.check(p)?;
    let order = topo_order(p)?;
    let mut w = vec![0u64; p.num_blocks()];
    for &b in &order {
        let mut best = 0;
        for &e in p.preds(b) {
            let from = p.edge(e).from;
            let mut v = w[from.0];
            if scope.has_block(from) {
                v += costs.block_cost(from);
            }
            if scope.has_edge(e) {
                v += costs.edge_cost(e);
            }
            best = best.max(v);
        }
        w[b.0] = best;
    }
    Ok(LongestPathTable { w })
}

/// Largest in-scope cost over all structural entry-to-exit paths, feasible
/// or not. One topological pass.
pub fn syntactic_bound(p: &Program, costs: &CostModel, scope: Scope<'_>) -> Result<u64, CfgError> {
    let table = longest_path_table(p, costs, scope)?;
    let exit = p.exit();
    let tail = if scope.has_block(exit) {
        costs.block_cost(exit)
    } else {
        0
    };
    Ok(table.w[exit.0] + tail)
}

/// Depth-first search for a cycle; returns its blocks in order when found.
pub fn find_cycle(succs: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = succs.len();
    let mut mark = vec![Mark::New; n];
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = Mark::Active;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if let Some(&s) = succs[node].get(*next) {
                *next += 1;
                match mark[s] {
                    Mark::New => {
                        mark[s] = Mark::Active;
                        stack.push((s, 0));
                    }
                    Mark::Active => {
                        let start = stack.iter().position(|(b, _)| *b == s).expect("on stack");
                        return Some(stack[start..].iter().map(|(b, _)| *b).collect());
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}
