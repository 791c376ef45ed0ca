use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{positions, syntactic_bound, topo_order, CfgError, DomTree, Scope};
use crate::ir::{BlockId, CostModel, EdgeId, Program};

/// The region between a merge block and its immediate dominator.
///
/// `edges` are all edges on header-to-merge paths; `blocks` are the blocks
/// strictly between the two, whose own costs count towards the portion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Portion {
    pub header: BlockId,
    pub merge: BlockId,
    pub edges: BTreeSet<EdgeId>,
    pub blocks: BTreeSet<BlockId>,
    pub bound: u64,
}

impl Portion {
    pub fn scope(&self) -> Scope<'_> {
        Scope::Part {
            edges: &self.edges,
            blocks: &self.blocks,
        }
    }

    pub fn label(&self, p: &Program) -> String {
        format!(
            "{}..{}",
            p.block(self.header).name,
            p.block(self.merge).name
        )
    }

    /// Every block of the region, header and merge included.
    pub fn all_blocks(&self) -> BTreeSet<BlockId> {
        let mut out = self.blocks.clone();
        out.insert(self.header);
        out.insert(self.merge);
        out
    }

    /// Whether the region is closed: apart from the merge, no block of it
    /// has a successor outside it. Only closed regions form a standalone
    /// sub-program from header to merge.
    pub fn is_closed(&self, p: &Program) -> bool {
        let all = self.all_blocks();
        all.iter()
            .filter(|b| **b != self.merge)
            .all(|b| p.succs(*b).iter().all(|e| self.edges.contains(e)))
    }
}

/// Blocks on some `from -> to` path, and the edges between them.
fn region(p: &Program, from: BlockId, to: BlockId) -> (BTreeSet<BlockId>, BTreeSet<EdgeId>) {
    let n = p.num_blocks();
    let mut fwd = vec![false; n];
    let mut stack = vec![from];
    fwd[from.0] = true;
    while let Some(b) = stack.pop() {
        if b == to {
            continue;
        }
        for e in p.succs(b) {
            let t = p.edge(*e).to;
            if !fwd[t.0] {
                fwd[t.0] = true;
                stack.push(t);
            }
        }
    }
    let mut bwd = vec![false; n];
    let mut stack = vec![to];
    bwd[to.0] = true;
    while let Some(b) = stack.pop() {
        if b == from {
            continue;
        }
        for e in p.preds(b) {
            let s = p.edge(*e).from;
            if !bwd[s.0] {
                bwd[s.0] = true;
                stack.push(s);
            }
        }
    }
    let blocks: BTreeSet<BlockId> = (0..n).filter(|&i| fwd[i] && bwd[i]).map(BlockId).collect();
    let edges = p
        .edges()
        .iter()
        .filter(|e| {
            blocks.contains(&e.from) && blocks.contains(&e.to) && e.from != to && e.to != from
        })
        .map(|e| e.id)
        .collect();
    (blocks, edges)
}

fn count_paths(
    p: &Program,
    order: &[BlockId],
    from: BlockId,
    to: BlockId,
    edges: &BTreeSet<EdgeId>,
) -> u64 {
    let mut count = vec![0u64; p.num_blocks()];
    count[from.0] = 1;
    for &b in order {
        for e in p.succs(b) {
            if edges.contains(e) {
                let t = p.edge(*e).to;
                count[t.0] = count[t.0].saturating_add(count[b.0]);
            }
        }
    }
    count[to.0]
}

/// One portion per block with several incoming edges whose region back to
/// its immediate dominator holds at least two distinct paths. Sorted by
/// topological position of the header, then of the merge. Bounds are left
/// at zero; see [`bound_portions`].
pub fn find_portions(p: &Program, dt: &DomTree) -> Result<Vec<Portion>, CfgError> {
    let order = topo_order(p)?;
    let pos = positions(&order, p.num_blocks());
    let mut out = Vec::new();
    for &merge in &order {
        if p.preds(merge).len() < 2 {
            continue;
        }
        let header = dt.idom(merge);
        let (all, edges) = region(p, header, merge);
        if count_paths(p, &order, header, merge, &edges) < 2 {
            continue;
        }
        let blocks = all
            .into_iter()
            .filter(|b| *b != header && *b != merge)
            .collect();
        out.push(Portion {
            header,
            merge,
            edges,
            blocks,
            bound: 0,
        });
    }
    out.sort_by_key(|q| (pos[q.header.0], pos[q.merge.0]));
    Ok(out)
}

/// Fills every portion's bound with its syntactic longest-path bound.
pub fn bound_portions(
    p: &Program,
    costs: &CostModel,
    portions: &mut [Portion],
) -> Result<(), CfgError> {
    for q in portions.iter_mut() {
        q.bound = syntactic_bound(p, costs, q.scope())?;
    }
    Ok(())
}

/// Indices of portions not strictly contained in another portion.
pub fn outermost(portions: &[Portion]) -> Vec<usize> {
    (0..portions.len())
        .filter(|&i| {
            !portions.iter().enumerate().any(|(j, o)| {
                j != i && portions[i].edges.is_subset(&o.edges) && portions[i].edges != o.edges
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    /// Index into the portion list the tree was built from.
    Leaf(usize),
    Internal(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub kind: NodeKind,
    pub header: BlockId,
    pub merge: BlockId,
    pub edges: BTreeSet<EdgeId>,
    pub blocks: BTreeSet<BlockId>,
    pub bound: u64,
    /// The node stands for the whole program (every edge and block).
    pub whole: bool,
}

impl TreeNode {
    pub fn scope(&self) -> Scope<'_> {
        if self.whole {
            Scope::Whole
        } else {
            Scope::Part {
                edges: &self.edges,
                blocks: &self.blocks,
            }
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf(_))
    }
}

/// Balanced pairwise grouping of the outermost portions, adjacent pairs
/// first, recursively up to one root. With two or more leaves the root
/// spans the whole program.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PortionTree {
    pub nodes: Vec<TreeNode>,
    pub leaves: Vec<usize>,
    pub root: Option<usize>,
}

impl PortionTree {
    pub fn internal_nodes(&self) -> impl Iterator<Item = (usize, &TreeNode)> {
        self.nodes.iter().enumerate().filter(|(_, n)| !n.is_leaf())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Builds the grouping tree over the outermost of `portions` (which must be
/// bounded and in program order). Node bounds are syntactic.
pub fn group_portions(
    portions: &[Portion],
    p: &Program,
    costs: &CostModel,
) -> Result<PortionTree, CfgError> {
    let mut tree = PortionTree::default();
    for i in outermost(portions) {
        let q = &portions[i];
        tree.leaves.push(tree.nodes.len());
        tree.nodes.push(TreeNode {
            kind: NodeKind::Leaf(i),
            header: q.header,
            merge: q.merge,
            edges: q.edges.clone(),
            blocks: q.blocks.clone(),
            bound: q.bound,
            whole: false,
        });
    }
    let mut level: Vec<usize> = tree.leaves.clone();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            if let [a, b] = pair {
                let (a, b) = (*a, *b);
                let (header, merge) = (tree.nodes[a].header, tree.nodes[b].merge);
                let (all, mut edges) = region(p, header, merge);
                let mut blocks: BTreeSet<BlockId> = all
                    .into_iter()
                    .filter(|x| *x != header && *x != merge)
                    .collect();
                assert!(
                    tree.nodes[a].edges.is_disjoint(&tree.nodes[b].edges),
                    "sibling portions overlap"
                );
                for c in [a, b] {
                    edges.extend(tree.nodes[c].edges.iter().copied());
                    blocks.extend(tree.nodes[c].blocks.iter().copied());
                }
                tree.nodes.push(TreeNode {
                    kind: NodeKind::Internal(vec![a, b]),
                    header,
                    merge,
                    edges,
                    blocks,
                    bound: 0,
                    whole: false,
                });
                next.push(tree.nodes.len() - 1);
            } else {
                next.push(pair[0]);
            }
        }
        level = next;
    }
    tree.root = level.first().copied();
    if let Some(r) = tree.root {
        if !tree.nodes[r].is_leaf() {
            let node = &mut tree.nodes[r];
            node.whole = true;
            node.header = p.entry();
            node.merge = p.exit();
            node.edges = p.edges().iter().map(|e| e.id).collect();
            node.blocks = p.block_ids().collect();
        }
    }
    for i in 0..tree.nodes.len() {
        if !tree.nodes[i].is_leaf() {
            tree.nodes[i].bound = syntactic_bound(p, costs, tree.nodes[i].scope())?;
        }
    }
    Ok(tree)
}

/// Deterministic text listing of portions, for golden tests.
pub fn dump_portions(p: &Program, portions: &[Portion]) -> String {
    let mut out = String::new();
    for q in portions {
        let edges: Vec<String> = q.edges.iter().map(|e| p.edge_name(*e)).collect();
        let blocks: Vec<&str> = q.blocks.iter().map(|b| p.block(*b).name.as_str()).collect();
        let _ = writeln!(
            out,
            "{} edges=[{}] blocks=[{}] bound={}",
            q.label(p),
            edges.join(","),
            blocks.join(","),
            q.bound
        );
    }
    out
}
