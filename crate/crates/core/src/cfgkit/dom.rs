//! Immediate dominators by the iterative data-flow algorithm over reverse
//! post-order (Cooper, Harvey and Kennedy).

use std::fmt::Write as _;

use crate::ir::{BlockId, Program};

/// Immediate-dominator map. `idom(entry) == entry`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomTree {
    idom: Vec<BlockId>,
    entry: BlockId,
}

impl DomTree {
    pub fn idom(&self, b: BlockId) -> BlockId {
        self.idom[b.0]
    }

    pub fn entry(&self) -> BlockId {
        self.entry
    }

    /// Reflexive dominance.
    pub fn dominates(&self, a: BlockId, mut b: BlockId) -> bool {
        loop {
            if a == b {
                return true;
            }
            if b == self.entry {
                return false;
            }
            b = self.idom[b.0];
        }
    }

    pub fn strictly_dominates(&self, a: BlockId, b: BlockId) -> bool {
        a != b && self.dominates(a, b)
    }

    /// Deterministic `child -> idom` listing, one line per block.
    pub fn dump(&self, p: &Program) -> String {
        let mut out = String::new();
        for b in p.block_ids() {
            let _ = writeln!(out, "{} -> {}", p.block(b).name, p.block(self.idom(b)).name);
        }
        out
    }
}

/// Computes immediate dominators of a program. Every block of a valid
/// [`Program`] is reachable from entry, so every block gets an idom.
pub fn immediate_dominators(p: &Program) -> DomTree {
    let idom = idoms_of_graph(&p.successor_lists(), p.entry().0);
    DomTree {
        idom: idom
            .into_iter()
            .enumerate()
            .map(|(i, d)| BlockId(d.unwrap_or(i)))
            .collect(),
        entry: p.entry(),
    }
}

/// Immediate dominators of an arbitrary graph (cycles allowed). Unreachable
/// nodes get `None`; the entry maps to itself.
pub fn idoms_of_graph(succs: &[Vec<usize>], entry: usize) -> Vec<Option<usize>> {
    let n = succs.len();
    let rpo = reverse_postorder(succs, entry);
    let mut order = vec![usize::MAX; n];
    for (i, &b) in rpo.iter().enumerate() {
        order[b] = i;
    }
    let mut preds = vec![Vec::new(); n];
    for (u, ss) in succs.iter().enumerate() {
        for &v in ss {
            preds[v].push(u);
        }
    }

    let mut idom: Vec<Option<usize>> = vec![None; n];
    idom[entry] = Some(entry);
    let mut changed = true;
    while changed {
        changed = false;
        for &b in rpo.iter().skip(1) {
            let mut new_idom: Option<usize> = None;
            for &p in &preds[b] {
                if idom[p].is_none() {
                    continue;
                }
                new_idom = Some(match new_idom {
                    None => p,
                    Some(cur) => intersect(&idom, &order, p, cur),
                });
            }
            if new_idom.is_some() && idom[b] != new_idom {
                idom[b] = new_idom;
                changed = true;
            }
        }
    }
    idom
}

fn intersect(idom: &[Option<usize>], order: &[usize], mut a: usize, mut b: usize) -> usize {
    while a != b {
        while order[a] > order[b] {
            a = idom[a].expect("processed node has an idom");
        }
        while order[b] > order[a] {
            b = idom[b].expect("processed node has an idom");
        }
    }
    a
}

fn reverse_postorder(succs: &[Vec<usize>], entry: usize) -> Vec<usize> {
    let n = succs.len();
    let mut visited = vec![false; n];
    let mut post = Vec::with_capacity(n);
    let mut stack = vec![(entry, 0usize)];
    visited[entry] = true;
    while let Some((node, next)) = stack.last_mut() {
        if let Some(&s) = succs[*node].get(*next) {
            *next += 1;
            if !visited[s] {
                visited[s] = true;
                stack.push((s, 0));
            }
        } else {
            post.push(*node);
            stack.pop();
        }
    }
    post.reverse();
    post
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diamond_and_chain() {
        // A -> {B, C} -> D
        let g = vec![vec![1, 2], vec![3], vec![3], vec![]];
        assert_eq!(
            idoms_of_graph(&g, 0),
            vec![Some(0), Some(0), Some(0), Some(0)]
        );
        let chain = vec![vec![1], vec![2], vec![]];
        assert_eq!(idoms_of_graph(&chain, 0), vec![Some(0), Some(0), Some(1)]);
    }

    #[test]
    fn loops_and_unreachable_nodes() {
        // 0 -> 1 -> 2 -> 1, 2 -> 3; node 4 unreachable
        let g = vec![vec![1], vec![2], vec![1, 3], vec![], vec![3]];
        assert_eq!(
            idoms_of_graph(&g, 0),
            vec![Some(0), Some(0), Some(1), Some(2), None]
        );
    }
}
