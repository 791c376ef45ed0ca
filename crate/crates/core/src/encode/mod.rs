//! Translation of a loop-free program and its costs into a
//! solver-independent formula.
//!
//! Names: `b_<i>` per block, `t_<i>_<j>` per edge, `x_<ssa>` per program
//! variable, `c_<i>_<j>` / `c_<i>` per nonzero edge / block cost, `tau_<i>`
//! per block arrival time (counter encoding), `cut_<k>` per named cut sum
//! and `cost` for the total.

mod smtlib;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cfgkit::{
    self, bound_portions, find_portions, group_portions, immediate_dominators, CfgError, Portion,
    PortionTree,
};
use crate::ir::{BlockId, CostError, CostModel, EdgeId, Expr, Program, Type, Value};

pub use smtlib::{emit_assertion, emit_prelude, emit_query, emit_smtlib};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostEncoding {
    #[default]
    Sum,
    Counter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutMode {
    None,
    Leaves,
    #[default]
    Hierarchical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EncodingOptions {
    pub cost_encoding: CostEncoding,
    pub cuts: CutMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Semantics,
    Timing,
    Cuts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub expr: Expr,
    pub section: Section,
    /// Emitted as a trailing comment.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decl {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutKind {
    /// One dominator-delimited portion.
    Leaf,
    /// A grouping of adjacent portions.
    Group,
    /// The whole program (`cost <= bound`).
    Whole,
}

/// A region whose cost is bounded by a cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutSpec {
    pub kind: CutKind,
    pub label: String,
    pub header: BlockId,
    pub merge: BlockId,
    pub edges: BTreeSet<EdgeId>,
    pub blocks: BTreeSet<BlockId>,
    pub bound: u64,
    /// Topological position of the header, for ordering.
    pub header_pos: usize,
}

impl CutSpec {
    pub fn size(&self) -> usize {
        self.edges.len()
    }

    pub fn scope(&self) -> cfgkit::Scope<'_> {
        if self.kind == CutKind::Whole {
            cfgkit::Scope::Whole
        } else {
            cfgkit::Scope::Part {
                edges: &self.edges,
                blocks: &self.blocks,
            }
        }
    }

    fn from_portion(p: &Program, q: &Portion, pos: &[usize]) -> CutSpec {
        CutSpec {
            kind: CutKind::Leaf,
            label: q.label(p),
            header: q.header,
            merge: q.merge,
            edges: q.edges.clone(),
            blocks: q.blocks.clone(),
            bound: q.bound,
            header_pos: pos[q.header.0],
        }
    }
}

/// A cut as it appears in a formula.
#[derive(Debug, Clone, PartialEq)]
pub struct CutVar {
    pub id: usize,
    pub kind: CutKind,
    pub label: String,
    /// Variable holding the cut's cost sum, when it has one.
    pub var: Option<String>,
    /// The bounded quantity.
    pub term: Expr,
    /// The cut only constrains traces where this holds.
    pub guard: Option<Expr>,
    pub bound: u64,
    pub size: usize,
    pub header_pos: usize,
}

impl CutVar {
    /// `guard => term <= bound`.
    pub fn constraint(&self) -> Expr {
        self.constraint_with(self.bound)
    }

    pub fn constraint_with(&self, bound: u64) -> Expr {
        let le = Expr::le(self.term.clone(), Expr::Int(bound as i64));
        match &self.guard {
            Some(g) => Expr::implies(g.clone(), le),
            None => le,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error(transparent)]
    Cfg(#[from] CfgError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("variable `{0}` has no type")]
    Untyped(String),
    #[error("cut `{0}` is not contiguous and cannot be stated with the counter encoding")]
    NonContiguousCut(String),
}

/// Solver-independent formula with a distinguished total-cost variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub decls: Vec<Decl>,
    pub asserts: Vec<Assertion>,
    pub cost_var: String,
    pub cut_vars: Vec<CutVar>,
    pub encoding: Option<CostEncoding>,
    /// `b_<i>` by block index.
    pub block_vars: Vec<String>,
    /// `t_<i>_<j>` by edge index.
    pub edge_vars: Vec<String>,
    /// `(ssa name, formula name)` of every program input.
    pub input_vars: Vec<(String, String)>,
    /// Cost term of each edge, absent for zero-cost edges.
    pub edge_terms: Vec<Option<String>>,
    /// Cost term of each block, absent for zero-cost blocks (sum encoding).
    pub block_terms: Vec<Option<String>>,
    /// Arrival time per block (counter encoding).
    pub tau_vars: Vec<String>,
}

impl Formula {
    pub fn declare(&mut self, name: impl Into<String>, ty: Type) -> String {
        let name = name.into();
        self.decls.push(Decl {
            name: name.clone(),
            ty,
        });
        name
    }

    pub fn assert(&mut self, section: Section, expr: Expr) {
        self.asserts.push(Assertion {
            expr,
            section,
            note: None,
        });
    }

    pub fn assert_noted(&mut self, section: Section, expr: Expr, note: impl Into<String>) {
        self.asserts.push(Assertion {
            expr,
            section,
            note: Some(note.into()),
        });
    }

    pub fn decl_type(&self, name: &str) -> Option<Type> {
        self.decls.iter().find(|d| d.name == name).map(|d| d.ty)
    }

    /// Assertions that are not cuts.
    pub fn base_assertions(&self) -> impl Iterator<Item = &Assertion> {
        self.asserts.iter().filter(|a| a.section != Section::Cuts)
    }

    /// Checks that every assertion holds under `lookup`; returns the first
    /// violated one.
    pub fn check(&self, lookup: &dyn Fn(&str) -> Option<Value>) -> Result<(), String> {
        for a in &self.asserts {
            match a.expr.eval(lookup) {
                Ok(Value::Bool(true)) => {}
                Ok(v) => return Err(format!("assertion `{}` evaluates to {v}", a.expr)),
                Err(e) => return Err(format!("assertion `{}`: {e}", a.expr)),
            }
        }
        Ok(())
    }

    /// Every variable referenced by an assertion is declared exactly once.
    pub fn well_formed(&self) -> Result<(), String> {
        let mut names = BTreeSet::new();
        for d in &self.decls {
            if !names.insert(d.name.as_str()) {
                return Err(format!("`{}` declared twice", d.name));
            }
        }
        for a in &self.asserts {
            for v in a.expr.vars() {
                if !names.contains(v.as_str()) {
                    return Err(format!("`{v}` used but not declared"));
                }
            }
            let look = |n: &str| self.decl_type(n);
            match a.expr.type_of(&look) {
                Ok(Type::Bool) => {}
                Ok(t) => return Err(format!("assertion `{}` has sort {t}", a.expr)),
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&emit_smtlib(self, None))
    }
}

/// Formula name of a program variable.
pub fn var_name(ssa: &str) -> String {
    format!("x_{ssa}")
}

fn mangle(e: &Expr) -> Expr {
    e.rename(&var_name)
}

/// Control flow and data semantics: block and transition Booleans,
/// assignments, phis, assumes and input ranges.
pub fn encode_semantics(p: &Program) -> Result<Formula, EncodeError> {
    let order = cfgkit::topo_order(p)?;
    let mut f = Formula {
        decls: Vec::new(),
        asserts: Vec::new(),
        cost_var: "cost".into(),
        cut_vars: Vec::new(),
        encoding: None,
        block_vars: p.block_ids().map(|b| format!("b_{}", b.0)).collect(),
        edge_vars: p.edges().iter().map(|e| p.edge_name(e.id)).collect(),
        input_vars: p
            .inputs()
            .iter()
            .map(|h| (h.name.clone(), var_name(&h.name)))
            .collect(),
        edge_terms: vec![None; p.num_edges()],
        block_terms: vec![None; p.num_blocks()],
        tau_vars: Vec::new(),
    };
    for b in f.block_vars.clone() {
        f.declare(b, Type::Bool);
    }
    for t in f.edge_vars.clone() {
        f.declare(t, Type::Bool);
    }
    let types = p.var_types();
    let ty = |v: &str| {
        types
            .get(v)
            .copied()
            .ok_or_else(|| EncodeError::Untyped(v.to_string()))
    };
    for h in p.inputs() {
        f.declare(var_name(&h.name), ty(&h.name)?);
    }
    for b in p.blocks() {
        for phi in &b.phis {
            f.declare(var_name(&phi.target), ty(&phi.target)?);
        }
        for (v, _) in &b.assigns {
            f.declare(var_name(v), ty(v)?);
        }
    }

    for h in p.inputs() {
        let x = Expr::var(var_name(&h.name));
        let mut parts = Vec::new();
        if let Some(lo) = h.lo {
            parts.push(Expr::le(Expr::Int(lo), x.clone()));
        }
        if let Some(hi) = h.hi {
            parts.push(Expr::le(x.clone(), Expr::Int(hi)));
        }
        if !parts.is_empty() {
            f.assert(Section::Semantics, Expr::and(parts));
        }
    }
    for &bid in &order {
        let b = p.block(bid);
        let bv = Expr::var(&f.block_vars[bid.0]);
        if bid != p.entry() {
            let incoming: Vec<Expr> = p
                .preds(bid)
                .iter()
                .map(|e| Expr::var(&f.edge_vars[e.0]))
                .collect();
            f.assert(Section::Semantics, Expr::eq(bv.clone(), Expr::or(incoming)));
        }
        for phi in &b.phis {
            let chain = phi_chain(p, bid, &phi.sources, &f.edge_vars, |v| mangle(v));
            let def = Expr::eq(Expr::var(var_name(&phi.target)), chain);
            f.assert(Section::Semantics, Expr::implies(bv.clone(), def));
        }
        for (v, e) in &b.assigns {
            f.assert(
                Section::Semantics,
                Expr::eq(Expr::var(var_name(v)), mangle(e)),
            );
        }
        for a in &b.assumes {
            f.assert(Section::Semantics, Expr::implies(bv.clone(), mangle(a)));
        }
        for e in p.succs(bid) {
            let edge = p.edge(*e);
            let t = Expr::and(vec![bv.clone(), mangle(&edge.guard)]);
            f.assert(
                Section::Semantics,
                Expr::eq(Expr::var(&f.edge_vars[e.0]), t),
            );
        }
    }
    let ends = if p.entry() == p.exit() {
        vec![p.entry()]
    } else {
        vec![p.entry(), p.exit()]
    };
    for b in ends {
        f.assert(
            Section::Semantics,
            Expr::eq(Expr::var(&f.block_vars[b.0]), Expr::Bool(true)),
        );
    }
    Ok(f)
}

/// `ite(t_1, v_1, ite(t_2, v_2, ... v_n))` over the sources in order, each
/// selected by the transition from its predecessor.
fn phi_chain<T>(
    p: &Program,
    at: BlockId,
    sources: &[(BlockId, T)],
    edge_vars: &[String],
    value: impl Fn(&T) -> Expr,
) -> Expr {
    let (last, init) = sources.split_last().expect("phis have at least one source");
    init.iter().rev().fold(value(&last.1), |acc, (pred, v)| {
        let e = p.find_edge(*pred, at).expect("phi source is a predecessor");
        Expr::ite(Expr::var(&edge_vars[e.0]), value(v), acc)
    })
}

/// Sum encoding: `c = ite(t, k, 0)` per nonzero edge cost, `c_<i> =
/// ite(b_i, k, 0)` per nonzero block cost and `cost` as their sum.
pub fn encode_cost_sum(f: &mut Formula, p: &Program, costs: &CostModel) -> Result<(), EncodeError> {
    costs.check(p)?;
    f.encoding = Some(CostEncoding::Sum);
    let mut terms = Vec::new();
    for e in p.edges() {
        let k = costs.edge_cost(e.id);
        if k == 0 {
            continue;
        }
        let c = f.declare(format!("c_{}_{}", e.from.0, e.to.0), Type::Int);
        let t = Expr::var(&f.edge_vars[e.id.0]);
        f.assert(Section::Timing, indicator(&c, t, k));
        f.edge_terms[e.id.0] = Some(c.clone());
        terms.push(Expr::var(c));
    }
    for b in p.block_ids() {
        let k = costs.block_cost(b);
        if k == 0 {
            continue;
        }
        let c = f.declare(format!("c_{}", b.0), Type::Int);
        let bv = Expr::var(&f.block_vars[b.0]);
        f.assert(Section::Timing, indicator(&c, bv, k));
        f.block_terms[b.0] = Some(c.clone());
        terms.push(Expr::var(c));
    }
    let cost = f.declare("cost", Type::Int);
    f.assert(Section::Timing, Expr::eq(Expr::var(cost), Expr::sum(terms)));
    Ok(())
}

/// `c = ite(t, k, 0)` stated as `(t => c = k) and (not t => c = 0)`.
fn indicator(c: &str, t: Expr, k: u64) -> Expr {
    let c = Expr::var(c);
    Expr::And(vec![
        Expr::implies(t.clone(), Expr::eq(c.clone(), Expr::Int(k as i64))),
        Expr::implies(Expr::not(t), Expr::eq(c, Expr::Int(0))),
    ])
}

/// Counter encoding: arrival times `tau_<i>` with `tau_entry = 0`,
/// `b_j => tau_j = ite-chain(tau_i + cost(i) + cost(i, j))` and `cost =
/// tau_exit + cost(exit)`.
pub fn encode_cost_counter(
    f: &mut Formula,
    p: &Program,
    costs: &CostModel,
) -> Result<(), EncodeError> {
    costs.check(p)?;
    f.encoding = Some(CostEncoding::Counter);
    f.tau_vars = p.block_ids().map(|b| format!("tau_{}", b.0)).collect();
    for t in f.tau_vars.clone() {
        f.declare(t, Type::Int);
    }
    let order = cfgkit::topo_order(p)?;
    let plus = |v: &str, k: u64| {
        if k == 0 {
            Expr::var(v)
        } else {
            Expr::Add(vec![Expr::var(v), Expr::Int(k as i64)])
        }
    };
    for &b in &order {
        let tau = Expr::var(&f.tau_vars[b.0]);
        if b == p.entry() {
            f.assert(Section::Timing, Expr::eq(tau, Expr::Int(0)));
            continue;
        }
        let sources: Vec<(BlockId, EdgeId)> =
            p.preds(b).iter().map(|e| (p.edge(*e).from, *e)).collect();
        let chain = phi_chain(p, b, &sources, &f.edge_vars, |e| {
            let from = p.edge(*e).from;
            plus(
                &f.tau_vars[from.0],
                costs.block_cost(from) + costs.edge_cost(*e),
            )
        });
        let bv = Expr::var(&f.block_vars[b.0]);
        f.assert(Section::Timing, Expr::implies(bv, Expr::eq(tau, chain)));
    }
    let cost = f.declare("cost", Type::Int);
    let exit = p.exit();
    let total = plus(&f.tau_vars[exit.0], costs.block_cost(exit));
    f.assert(Section::Timing, Expr::eq(Expr::var(cost), total));
    Ok(())
}

/// Cost term of a region under the sum encoding, if any element of it has a
/// nonzero cost.
fn region_sum(f: &Formula, spec: &CutSpec) -> Option<Expr> {
    let mut terms: Vec<Expr> = spec
        .edges
        .iter()
        .filter_map(|e| f.edge_terms[e.0].as_ref().map(Expr::var))
        .collect();
    terms.extend(
        spec.blocks
            .iter()
            .filter_map(|b| f.block_terms[b.0].as_ref().map(Expr::var)),
    );
    if terms.is_empty() {
        None
    } else {
        Some(Expr::sum(terms))
    }
}

/// Adds one cut per spec. Under the sum encoding a region's cost sum is
/// named `cut_<k>`; under the counter encoding it is `tau_merge - tau_header
/// - cost(header)`, guarded by `b_merge`. The whole-program cut bounds
/// `cost` directly.
pub fn encode_cuts(
    f: &mut Formula,
    p: &Program,
    costs: &CostModel,
    cuts: &[CutSpec],
) -> Result<(), EncodeError> {
    let encoding = f.encoding.expect("costs are encoded before cuts");
    let dt = immediate_dominators(p);
    for spec in cuts {
        let id = f.cut_vars.len();
        let (var, term, guard) = match (spec.kind, encoding) {
            (CutKind::Whole, _) => (Some(f.cost_var.clone()), Expr::var(&f.cost_var), None),
            (_, CostEncoding::Sum) => {
                let Some(sum) = region_sum(f, spec) else {
                    continue;
                };
                let name = f.declare(format!("cut_{id}"), Type::Int);
                f.assert_noted(
                    Section::Cuts,
                    Expr::eq(Expr::var(&name), sum),
                    format!("cost between {}", spec.label.replace("..", " and ")),
                );
                (Some(name.clone()), Expr::var(name), None)
            }
            (_, CostEncoding::Counter) => {
                if !dt.dominates(spec.header, spec.merge) {
                    return Err(EncodeError::NonContiguousCut(spec.label.clone()));
                }
                let mut diff = Expr::sub(
                    Expr::var(&f.tau_vars[spec.merge.0]),
                    Expr::var(&f.tau_vars[spec.header.0]),
                );
                let hc = costs.block_cost(spec.header);
                if hc > 0 {
                    diff = Expr::sub(diff, Expr::Int(hc as i64));
                }
                (None, diff, Some(Expr::var(&f.block_vars[spec.merge.0])))
            }
        };
        let cut = CutVar {
            id,
            kind: spec.kind,
            label: spec.label.clone(),
            var,
            term,
            guard,
            bound: spec.bound,
            size: spec.size(),
            header_pos: spec.header_pos,
        };
        let note = match spec.kind {
            CutKind::Whole => "whole program".to_string(),
            _ => format!("between {}", spec.label.replace("..", " and ")),
        };
        f.assert_noted(Section::Cuts, cut.constraint(), note);
        f.cut_vars.push(cut);
    }
    Ok(())
}

/// Portions with syntactic bounds and their grouping tree.
#[derive(Debug, Clone)]
pub struct CutPlan {
    pub portions: Vec<Portion>,
    pub tree: PortionTree,
    pub specs: Vec<CutSpec>,
}

/// Selects the cuts for `mode`: every portion (nested ones included) for
/// `Leaves`, plus the inner grouping nodes for `Hierarchical`, plus in both
/// cases the whole-program bound. Bounds are syntactic.
pub fn plan_cuts(p: &Program, costs: &CostModel, mode: CutMode) -> Result<CutPlan, EncodeError> {
    costs.check(p)?;
    let dt = immediate_dominators(p);
    let mut portions = find_portions(p, &dt)?;
    bound_portions(p, costs, &mut portions)?;
    let tree = group_portions(&portions, p, costs)?;
    let order = cfgkit::topo_order(p)?;
    let pos = cfgkit::positions(&order, p.num_blocks());
    let mut specs = Vec::new();
    if mode != CutMode::None {
        specs.extend(portions.iter().map(|q| CutSpec::from_portion(p, q, &pos)));
        if mode == CutMode::Hierarchical {
            for (_, node) in tree.internal_nodes() {
                if node.whole {
                    continue;
                }
                let label = format!(
                    "{}..{}",
                    p.block(node.header).name,
                    p.block(node.merge).name
                );
                specs.push(CutSpec {
                    kind: CutKind::Group,
                    label,
                    header: node.header,
                    merge: node.merge,
                    edges: node.edges.clone(),
                    blocks: node.blocks.clone(),
                    bound: node.bound,
                    header_pos: pos[node.header.0],
                });
            }
        }
        specs.push(CutSpec {
            kind: CutKind::Whole,
            label: format!("{}..{}", p.block(p.entry()).name, p.block(p.exit()).name),
            header: p.entry(),
            merge: p.exit(),
            edges: p.edges().iter().map(|e| e.id).collect(),
            blocks: p.block_ids().collect(),
            bound: cfgkit::syntactic_bound(p, costs, cfgkit::Scope::Whole)?,
            header_pos: 0,
        });
    }
    Ok(CutPlan {
        portions,
        tree,
        specs,
    })
}

/// Semantics, costs and the given cuts.
pub fn encode_with_cuts(
    p: &Program,
    costs: &CostModel,
    encoding: CostEncoding,
    cuts: &[CutSpec],
) -> Result<Formula, EncodeError> {
    let mut f = encode_semantics(p)?;
    match encoding {
        CostEncoding::Sum => encode_cost_sum(&mut f, p, costs)?,
        CostEncoding::Counter => encode_cost_counter(&mut f, p, costs)?,
    }
    encode_cuts(&mut f, p, costs, cuts)?;
    Ok(f)
}

/// Semantics, costs and syntactically bounded cuts selected by `opts`.
pub fn encode(
    p: &Program,
    costs: &CostModel,
    opts: EncodingOptions,
) -> Result<Formula, EncodeError> {
    let plan = plan_cuts(p, costs, opts.cuts)?;
    encode_with_cuts(p, costs, opts.cost_encoding, &plan.specs)
}
