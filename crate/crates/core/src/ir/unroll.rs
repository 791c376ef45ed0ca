//! Unrolling of bounded natural loops, innermost first.
//!
//! A loop with header `h` and bound `k` becomes `k + 1` copies of the header
//! and `k` copies of the body, chained through the copied back edges. Copy
//! `j` renames blocks to `<name>.u<j>` and loop-defined variables to
//! `<var>.u<j>`. The last header copy jumps straight to the exit target
//! under an `assume` of the exit condition, so traces exceeding the bound
//! are excluded. Header-defined variables used after the loop are rejoined
//! by phis in the exit target under their original names.

use std::collections::{BTreeSet, HashMap};

use super::{BlockId, CostModel, Expr, IrError, Program, RawBlock, RawPhi, RawProgram, RawTerm};
use crate::cfgkit::dom::idoms_of_graph;

/// Largest accepted per-loop bound.
pub const DEFAULT_UNROLL_LIMIT: u32 = 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UnrollError {
    #[error("unbounded loop at `{0}`: no bound given and no default")]
    Unbounded(String),
    #[error("loop at `{header}` has bound {bound}, above the unroll limit {limit}")]
    BoundTooLarge {
        header: String,
        bound: u32,
        limit: u32,
    },
    #[error("loop at `{header}` is not supported: {reason}")]
    UnsupportedShape { header: String, reason: String },
    #[error(transparent)]
    Ir(#[from] IrError),
}

/// Unrolls every loop of `p`; a loop-free input is returned unchanged.
pub fn unroll(p: &Program, default_bound: Option<u32>) -> Result<Program, UnrollError> {
    let costs = CostModel::zeros(p);
    unroll_with_limit(p, &costs, default_bound, DEFAULT_UNROLL_LIMIT).map(|(q, _)| q)
}

/// Unrolls `p` and carries `costs` over: every copied block and edge costs
/// what its original did.
pub fn unroll_with_costs(
    p: &Program,
    costs: &CostModel,
    default_bound: Option<u32>,
) -> Result<(Program, CostModel), UnrollError> {
    unroll_with_limit(p, costs, default_bound, DEFAULT_UNROLL_LIMIT)
}

pub fn unroll_with_limit(
    p: &Program,
    costs: &CostModel,
    default_bound: Option<u32>,
    limit: u32,
) -> Result<(Program, CostModel), UnrollError> {
    if crate::ir::check_loop_free(p).is_ok() {
        return Ok((p.clone(), costs.clone()));
    }
    let block_cost: HashMap<String, u64> = p
        .block_ids()
        .map(|b| (p.block(b).name.clone(), costs.block_cost(b)))
        .collect();
    let edge_cost: HashMap<(String, String), u64> = p
        .edges()
        .iter()
        .map(|e| {
            let key = (p.block(e.from).name.clone(), p.block(e.to).name.clone());
            (key, costs.edge_cost(e.id))
        })
        .collect();
    let mut origin: HashMap<String, String> = p
        .blocks()
        .iter()
        .map(|b| (b.name.clone(), b.name.clone()))
        .collect();

    let mut current = p.clone();
    while crate::ir::check_loop_free(&current).is_err() {
        let raw = unroll_one(&current, default_bound, limit, &mut origin)?;
        current = raw.build()?;
    }

    let mut out = CostModel::zeros(&current);
    for b in current.block_ids() {
        out.block[b.0] = block_cost[&origin[&current.block(b).name]];
    }
    for e in current.edges() {
        let key = (
            origin[&current.block(e.from).name].clone(),
            origin[&current.block(e.to).name].clone(),
        );
        out.edge[e.id.0] = edge_cost[&key];
    }
    Ok((current, out))
}

struct NaturalLoop {
    header: usize,
    latch: usize,
    body: BTreeSet<usize>,
}

fn innermost_loop(p: &Program) -> Result<NaturalLoop, UnrollError> {
    let succs = p.successor_lists();
    let idom = idoms_of_graph(&succs, p.entry().0);
    let dominates = |a: usize, mut b: usize| loop {
        if a == b {
            return true;
        }
        match idom[b] {
            Some(d) if d != b => b = d,
            _ => return false,
        }
    };
    let mut preds = vec![Vec::new(); succs.len()];
    for (u, ss) in succs.iter().enumerate() {
        for &v in ss {
            preds[v].push(u);
        }
    }
    let mut loops: Vec<NaturalLoop> = Vec::new();
    for (u, ss) in succs.iter().enumerate() {
        for &h in ss {
            if !dominates(h, u) {
                continue;
            }
            let mut body = BTreeSet::from([h, u]);
            let mut stack = vec![u];
            while let Some(x) = stack.pop() {
                if x == h {
                    continue;
                }
                for &q in &preds[x] {
                    if body.insert(q) {
                        stack.push(q);
                    }
                }
            }
            if let Some(other) = loops.iter().find(|l| l.header == h) {
                return Err(UnrollError::UnsupportedShape {
                    header: p.block(BlockId(other.header)).name.clone(),
                    reason: "several back edges".into(),
                });
            }
            loops.push(NaturalLoop {
                header: h,
                latch: u,
                body,
            });
        }
    }
    loops
        .into_iter()
        .min_by_key(|l| l.body.len())
        .ok_or_else(|| {
            let cycle = crate::ir::check_loop_free(p)
                .err()
                .map(|c| c.blocks)
                .unwrap_or_default();
            UnrollError::UnsupportedShape {
                header: cycle.first().cloned().unwrap_or_default(),
                reason: "irreducible control flow".into(),
            }
        })
}

fn unroll_one(
    p: &Program,
    default_bound: Option<u32>,
    limit: u32,
    origin: &mut HashMap<String, String>,
) -> Result<RawProgram, UnrollError> {
    let lp = innermost_loop(p)?;
    let raw = p.to_raw();
    let hname = raw.blocks[lp.header].name.clone();
    let shape = |reason: &str| UnrollError::UnsupportedShape {
        header: hname.clone(),
        reason: reason.to_string(),
    };
    let bound = raw.blocks[lp.header]
        .loop_bound
        .or(default_bound)
        .ok_or_else(|| UnrollError::Unbounded(hname.clone()))?;
    if bound > limit {
        return Err(UnrollError::BoundTooLarge {
            header: hname,
            bound,
            limit,
        });
    }

    let in_loop: BTreeSet<String> = lp
        .body
        .iter()
        .map(|&i| raw.blocks[i].name.clone())
        .collect();
    for &b in &lp.body {
        if b != lp.header
            && raw.blocks[b]
                .targets()
                .iter()
                .any(|t| !in_loop.contains(*t))
        {
            return Err(shape("the loop is left from a block other than its header"));
        }
    }
    let (exit_target, exit_guard) = match &raw.blocks[lp.header].term {
        RawTerm::Branch {
            cond,
            then_to,
            else_to,
        } => match (in_loop.contains(then_to), in_loop.contains(else_to)) {
            (true, false) => (else_to.clone(), Expr::not(cond.clone())),
            (false, true) => (then_to.clone(), cond.clone()),
            _ => return Err(shape("the header must branch into and out of the loop")),
        },
        _ => return Err(shape("the header must end in a branch")),
    };

    let mut defined: BTreeSet<String> = BTreeSet::new();
    for &b in &lp.body {
        let blk = &raw.blocks[b];
        defined.extend(blk.phis.iter().map(|ph| ph.target.clone()));
        defined.extend(blk.assigns.iter().map(|(v, _)| v.clone()));
    }
    let header_defs: Vec<String> = {
        let h = &raw.blocks[lp.header];
        h.phis
            .iter()
            .map(|ph| ph.target.clone())
            .chain(h.assigns.iter().map(|(v, _)| v.clone()))
            .collect()
    };
    let rename = |j: u32| {
        let defined = defined.clone();
        move |v: &str| {
            if defined.contains(v) {
                format!("{v}.u{j}")
            } else {
                v.to_string()
            }
        }
    };
    let copy_name = |b: &str, j: u32| format!("{b}.u{j}");
    let latch_name = raw.blocks[lp.latch].name.clone();
    let hname = raw.blocks[lp.header].name.clone();

    let mut out_blocks: Vec<RawBlock> = Vec::new();
    let mut used_outside: BTreeSet<String> = BTreeSet::new();
    for (i, b) in raw.blocks.iter().enumerate() {
        if lp.body.contains(&i) {
            if i == lp.header {
                for j in 0..=bound {
                    let prev = rename(j.saturating_sub(1));
                    out_blocks.push(header_copy(
                        b,
                        j,
                        bound,
                        &latch_name,
                        &rename(j),
                        &prev,
                        &exit_target,
                        &exit_guard,
                        &in_loop,
                    ));
                    origin.insert(copy_name(&b.name, j), origin[&b.name].clone());
                }
            } else {
                for j in 0..bound {
                    let r = rename(j);
                    let mut c = b.clone();
                    c.name = copy_name(&b.name, j);
                    c.loop_bound = None;
                    for ph in &mut c.phis {
                        ph.target = r(&ph.target);
                        for (pred, v) in &mut ph.sources {
                            *pred = copy_name(pred, j);
                            *v = v.rename(&r);
                        }
                    }
                    for (v, e) in &mut c.assigns {
                        *v = r(v);
                        *e = e.rename(&r);
                    }
                    for a in &mut c.assumes {
                        *a = a.rename(&r);
                    }
                    c.term = match &c.term {
                        RawTerm::Branch {
                            cond,
                            then_to,
                            else_to,
                        } => RawTerm::Branch {
                            cond: cond.rename(&r),
                            then_to: retarget(then_to, j, &hname),
                            else_to: retarget(else_to, j, &hname),
                        },
                        RawTerm::Goto(t) => RawTerm::Goto(retarget(t, j, &hname)),
                        RawTerm::Return => RawTerm::Return,
                    };
                    out_blocks.push(c);
                    origin.insert(copy_name(&b.name, j), origin[&b.name].clone());
                }
            }
            continue;
        }
        let mut c = b.clone();
        let redirect = |t: &String| {
            if *t == hname {
                copy_name(&hname, 0)
            } else {
                t.clone()
            }
        };
        c.term = match &c.term {
            RawTerm::Branch {
                cond,
                then_to,
                else_to,
            } => RawTerm::Branch {
                cond: cond.clone(),
                then_to: redirect(then_to),
                else_to: redirect(else_to),
            },
            RawTerm::Goto(t) => RawTerm::Goto(redirect(t)),
            RawTerm::Return => RawTerm::Return,
        };
        for ph in &mut c.phis {
            let mut sources = Vec::new();
            for (pred, v) in &ph.sources {
                if *pred == hname {
                    for j in 0..=bound {
                        sources.push((copy_name(&hname, j), v.rename(&rename(j))));
                    }
                } else {
                    used_outside.extend(v.vars());
                    sources.push((pred.clone(), v.clone()));
                }
            }
            ph.sources = sources;
        }
        for (_, e) in &c.assigns {
            used_outside.extend(e.vars());
        }
        for a in &c.assumes {
            used_outside.extend(a.vars());
        }
        if let RawTerm::Branch { cond, .. } = &c.term {
            used_outside.extend(cond.vars());
        }
        out_blocks.push(c);
    }

    let rejoined: Vec<RawPhi> = header_defs
        .iter()
        .filter(|v| used_outside.contains(*v))
        .map(|v| RawPhi {
            target: v.clone(),
            sources: (0..=bound)
                .map(|j| (copy_name(&hname, j), Expr::Var(rename(j)(v))))
                .collect(),
        })
        .collect();
    if !rejoined.is_empty() {
        let x = out_blocks
            .iter_mut()
            .find(|b| b.name == exit_target)
            .expect("exit target is outside the loop");
        if x.phis
            .iter()
            .any(|ph| ph.sources.len() != bound as usize + 1)
        {
            return Err(shape(
                "loop-defined values flow into a join with other predecessors",
            ));
        }
        x.phis.extend(rejoined);
    }

    Ok(RawProgram {
        name: raw.name.clone(),
        entry: raw.entry.clone(),
        exit: raw.exit.clone(),
        inputs: raw.inputs.clone(),
        blocks: out_blocks,
    })
}

fn retarget(t: &str, j: u32, header: &str) -> String {
    if t == header {
        format!("{t}.u{}", j + 1)
    } else {
        format!("{t}.u{j}")
    }
}

#[allow(clippy::too_many_arguments)]
fn header_copy(
    h: &RawBlock,
    j: u32,
    bound: u32,
    latch: &str,
    r: &dyn Fn(&str) -> String,
    r_prev: &dyn Fn(&str) -> String,
    exit_target: &str,
    exit_guard: &Expr,
    in_loop: &BTreeSet<String>,
) -> RawBlock {
    let mut c = RawBlock::new(format!("{}.u{j}", h.name));
    for ph in &h.phis {
        let sources = ph
            .sources
            .iter()
            .filter(|(pred, _)| (j == 0) != in_loop.contains(pred))
            .map(|(pred, v)| {
                if j == 0 {
                    (pred.clone(), v.clone())
                } else {
                    (format!("{latch}.u{}", j - 1), v.rename(r_prev))
                }
            })
            .collect();
        c.phis.push(RawPhi {
            target: r(&ph.target),
            sources,
        });
    }
    c.assigns = h.assigns.iter().map(|(v, e)| (r(v), e.rename(r))).collect();
    c.assumes = h.assumes.iter().map(|a| a.rename(r)).collect();
    if j == bound {
        c.assumes.push(exit_guard.rename(r));
        c.term = RawTerm::Goto(exit_target.to_string());
    } else {
        c.term = match &h.term {
            RawTerm::Branch {
                cond,
                then_to,
                else_to,
            } => {
                let map = |t: &String| {
                    if in_loop.contains(t) {
                        retarget(t, j, &h.name)
                    } else {
                        t.clone()
                    }
                };
                RawTerm::Branch {
                    cond: cond.rename(r),
                    then_to: map(then_to),
                    else_to: map(else_to),
                }
            }
            other => other.clone(),
        };
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::check_loop_free;
    use crate::ir::minilang::parse_minilang;

    #[test]
    fn loop_free_input_is_unchanged() {
        let (p, c) =
            parse_minilang("a = nondet(0, 1); if (a > 0) { cost 2; } else { cost 3; }").unwrap();
        let (q, d) = unroll_with_costs(&p, &c, None).unwrap();
        assert_eq!(p, q);
        assert_eq!(c, d);
    }

    #[test]
    fn for_loop_becomes_k_body_copies() {
        let (p, c) = parse_minilang("x = 0; for i in 0..3 { cost 5; x = x + 1; } y = x;").unwrap();
        let (q, d) = unroll_with_costs(&p, &c, None).unwrap();
        assert!(check_loop_free(&q).is_ok());
        let bodies = q
            .blocks()
            .iter()
            .filter(|b| b.name.starts_with("for.body"))
            .count();
        assert_eq!(bodies, 3);
        assert_eq!(d.block.iter().sum::<u64>(), 15);
        let headers = q
            .blocks()
            .iter()
            .filter(|b| b.name.starts_with("for.cond"))
            .count();
        assert_eq!(headers, 4);
    }

    #[test]
    fn unbounded_while_needs_a_default() {
        let (p, _) = parse_minilang("while (nondet()) { x = 1; }").unwrap();
        assert!(matches!(unroll(&p, None), Err(UnrollError::Unbounded(_))));
        let q = unroll(&p, Some(2)).unwrap();
        assert!(check_loop_free(&q).is_ok());
    }

    #[test]
    fn bound_above_limit_is_rejected() {
        let (p, c) = parse_minilang("for i in 0..5000 { }").unwrap();
        assert!(matches!(
            unroll_with_limit(&p, &c, None, 100),
            Err(UnrollError::BoundTooLarge { bound: 5000, .. })
        ));
    }

    #[test]
    fn nested_loops_unroll_innermost_first() {
        let src = "s = 0; for i in 0..2 { for j in 0..3 { cost 1; s = s + 1; } }";
        let (p, c) = parse_minilang(src).unwrap();
        let (q, d) = unroll_with_costs(&p, &c, None).unwrap();
        assert!(check_loop_free(&q).is_ok());
        assert_eq!(d.block.iter().sum::<u64>(), 6);
    }
}
