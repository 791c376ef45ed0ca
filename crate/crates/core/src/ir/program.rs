use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::{is_identifier, Expr, Type};
use crate::cfgkit::dom;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminator {
    Branch {
        cond: Expr,
        then_to: BlockId,
        else_to: BlockId,
    },
    Goto(BlockId),
    Return,
}

/// SSA join: `target` takes the value of the source attached to the edge
/// `(pred, this block)` that control arrived through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phi {
    pub target: String,
    pub sources: Vec<(BlockId, Expr)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub phis: Vec<Phi>,
    pub assigns: Vec<(String, Expr)>,
    /// Conditions every trace through the block must satisfy.
    pub assumes: Vec<Expr>,
    pub terminator: Terminator,
    /// Iteration bound when this block heads a loop.
    pub loop_bound: Option<u32>,
}

impl Block {
    pub fn new(name: impl Into<String>, terminator: Terminator) -> Block {
        Block {
            name: name.into(),
            phis: Vec::new(),
            assigns: Vec::new(),
            assumes: Vec::new(),
            terminator,
            loop_bound: None,
        }
    }

    pub fn successors(&self) -> Vec<BlockId> {
        match &self.terminator {
            Terminator::Branch {
                then_to, else_to, ..
            } => vec![*then_to, *else_to],
            Terminator::Goto(t) => vec![*t],
            Terminator::Return => vec![],
        }
    }
}

/// Nondeterministic input, optionally range-constrained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HavocVar {
    pub name: String,
    #[serde(default = "default_int")]
    pub ty: Type,
    #[serde(default)]
    pub lo: Option<i64>,
    #[serde(default)]
    pub hi: Option<i64>,
}

fn default_int() -> Type {
    Type::Int
}

impl HavocVar {
    pub fn int(name: impl Into<String>, lo: Option<i64>, hi: Option<i64>) -> HavocVar {
        HavocVar {
            name: name.into(),
            ty: Type::Int,
            lo,
            hi,
        }
    }

    pub fn boolean(name: impl Into<String>) -> HavocVar {
        HavocVar {
            name: name.into(),
            ty: Type::Bool,
            lo: None,
            hi: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub id: EdgeId,
    pub from: BlockId,
    pub to: BlockId,
    /// Condition under which control leaves `from` along this edge.
    pub guard: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IrError {
    #[error("program has no blocks")]
    Empty,
    #[error("invalid identifier `{0}`")]
    BadName(String),
    #[error("duplicate block `{0}`")]
    DuplicateBlock(String),
    #[error("reference to undeclared block `{0}`")]
    UnknownBlock(String),
    #[error("block `{0}` branches to the same target on both arms")]
    DegenerateBranch(String),
    #[error("entry block `{0}` has incoming edges")]
    EntryHasPredecessors(String),
    #[error("exit block `{0}` must end in return")]
    ExitNotReturn(String),
    #[error("block `{0}` returns but is not the exit block")]
    StrayReturn(String),
    #[error("block `{0}` is unreachable from entry")]
    Unreachable(String),
    #[error("block `{0}` cannot reach the exit")]
    CannotReachExit(String),
    #[error("phi `{target}` in `{block}` does not match the incoming edges")]
    PhiMismatch { block: String, target: String },
    #[error("variable `{0}` is defined more than once")]
    DuplicateDefinition(String),
    #[error("variable `{var}` used in `{block}` is never defined")]
    UndefinedVariable { var: String, block: String },
    #[error("use of `{var}` in `{block}` is not dominated by its definition")]
    NotDominated { var: String, block: String },
    #[error("type error in `{block}`: {msg}")]
    Type { block: String, msg: String },
    #[error("havoc `{0}` has an invalid range")]
    HavocRange(String),
}

/// A control-flow graph of SSA basic blocks with a single entry and exit.
///
/// Construction validates the structural and SSA invariants; the value is
/// immutable afterwards. Edges are derived from terminators: for each block
/// in order, a branch contributes its then-edge then its else-edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    name: String,
    blocks: Vec<Block>,
    entry: BlockId,
    exit: BlockId,
    inputs: Vec<HavocVar>,
    edges: Vec<Edge>,
    preds: Vec<Vec<EdgeId>>,
    succs: Vec<Vec<EdgeId>>,
    types: BTreeMap<String, Type>,
    def_block: BTreeMap<String, Option<BlockId>>,
}

impl Program {
    pub fn new(
        name: impl Into<String>,
        blocks: Vec<Block>,
        entry: BlockId,
        exit: BlockId,
        inputs: Vec<HavocVar>,
    ) -> Result<Program, IrError> {
        if blocks.is_empty() {
            return Err(IrError::Empty);
        }
        let n = blocks.len();
        let mut seen = BTreeSet::new();
        for b in &blocks {
            if !is_identifier(&b.name) {
                return Err(IrError::BadName(b.name.clone()));
            }
            if !seen.insert(b.name.as_str()) {
                return Err(IrError::DuplicateBlock(b.name.clone()));
            }
        }
        if entry.0 >= n || exit.0 >= n {
            return Err(IrError::UnknownBlock(format!("#{}", entry.0.max(exit.0))));
        }

        let mut edges = Vec::new();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for (i, b) in blocks.iter().enumerate() {
            let from = BlockId(i);
            let mut push = |to: BlockId, guard: Expr| -> Result<(), IrError> {
                if to.0 >= n {
                    return Err(IrError::UnknownBlock(format!("#{}", to.0)));
                }
                let id = EdgeId(edges.len());
                edges.push(Edge {
                    id,
                    from,
                    to,
                    guard,
                });
                succs[i].push(id);
                preds[to.0].push(id);
                Ok(())
            };
            match &b.terminator {
                Terminator::Branch {
                    cond,
                    then_to,
                    else_to,
                } => {
                    if then_to == else_to {
                        return Err(IrError::DegenerateBranch(b.name.clone()));
                    }
                    push(*then_to, cond.clone())?;
                    push(*else_to, Expr::not(cond.clone()))?;
                }
                Terminator::Goto(t) => push(*t, Expr::Bool(true))?,
                Terminator::Return => {
                    if i != exit.0 {
                        return Err(IrError::StrayReturn(b.name.clone()));
                    }
                }
            }
        }
        if !preds[entry.0].is_empty() {
            return Err(IrError::EntryHasPredecessors(blocks[entry.0].name.clone()));
        }
        if blocks[exit.0].terminator != Terminator::Return {
            return Err(IrError::ExitNotReturn(blocks[exit.0].name.clone()));
        }

        let mut program = Program {
            name: name.into(),
            blocks,
            entry,
            exit,
            inputs,
            edges,
            preds,
            succs,
            types: BTreeMap::new(),
            def_block: BTreeMap::new(),
        };
        program.check_reachability()?;
        program.check_phis()?;
        program.collect_definitions()?;
        program.infer_types()?;
        program.check_dominance()?;
        Ok(program)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.0]
    }

    pub fn block_ids(&self) -> impl Iterator<Item = BlockId> {
        (0..self.blocks.len()).map(BlockId)
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn entry(&self) -> BlockId {
        self.entry
    }

    pub fn exit(&self) -> BlockId {
        self.exit
    }

    pub fn inputs(&self) -> &[HavocVar] {
        &self.inputs
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn preds(&self, b: BlockId) -> &[EdgeId] {
        &self.preds[b.0]
    }

    pub fn succs(&self, b: BlockId) -> &[EdgeId] {
        &self.succs[b.0]
    }

    pub fn find_block(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name).map(BlockId)
    }

    pub fn find_edge(&self, from: BlockId, to: BlockId) -> Option<EdgeId> {
        self.succs[from.0]
            .iter()
            .copied()
            .find(|e| self.edges[e.0].to == to)
    }

    /// Sort of every variable (inputs, assignment targets, phi targets).
    pub fn var_types(&self) -> &BTreeMap<String, Type> {
        &self.types
    }

    /// Block defining each variable; `None` for program inputs.
    pub fn def_block(&self, var: &str) -> Option<Option<BlockId>> {
        self.def_block.get(var).copied()
    }

    /// Successor lists by block index, for graph algorithms.
    pub fn successor_lists(&self) -> Vec<Vec<usize>> {
        self.succs
            .iter()
            .map(|es| es.iter().map(|e| self.edges[e.0].to.0).collect())
            .collect()
    }

    /// `t_<from>_<to>`, the edge's canonical name.
    pub fn edge_name(&self, e: EdgeId) -> String {
        let edge = &self.edges[e.0];
        format!("t_{}_{}", edge.from.0, edge.to.0)
    }

    fn check_reachability(&self) -> Result<(), IrError> {
        let n = self.blocks.len();
        let mut fwd = vec![false; n];
        let mut stack = vec![self.entry.0];
        fwd[self.entry.0] = true;
        while let Some(b) = stack.pop() {
            for e in &self.succs[b] {
                let t = self.edges[e.0].to.0;
                if !fwd[t] {
                    fwd[t] = true;
                    stack.push(t);
                }
            }
        }
        if let Some(i) = fwd.iter().position(|r| !r) {
            return Err(IrError::Unreachable(self.blocks[i].name.clone()));
        }
        let mut bwd = vec![false; n];
        let mut stack = vec![self.exit.0];
        bwd[self.exit.0] = true;
        while let Some(b) = stack.pop() {
            for e in &self.preds[b] {
                let s = self.edges[e.0].from.0;
                if !bwd[s] {
                    bwd[s] = true;
                    stack.push(s);
                }
            }
        }
        if let Some(i) = bwd.iter().position(|r| !r) {
            return Err(IrError::CannotReachExit(self.blocks[i].name.clone()));
        }
        Ok(())
    }

    fn check_phis(&self) -> Result<(), IrError> {
        for (i, b) in self.blocks.iter().enumerate() {
            let mut expected: Vec<BlockId> =
                self.preds[i].iter().map(|e| self.edges[e.0].from).collect();
            expected.sort();
            for phi in &b.phis {
                let mut got: Vec<BlockId> = phi.sources.iter().map(|(p, _)| *p).collect();
                got.sort();
                let operands_ok = phi
                    .sources
                    .iter()
                    .all(|(_, v)| matches!(v, Expr::Var(_) | Expr::Int(_) | Expr::Bool(_)));
                if got != expected || !operands_ok {
                    return Err(IrError::PhiMismatch {
                        block: b.name.clone(),
                        target: phi.target.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    fn collect_definitions(&mut self) -> Result<(), IrError> {
        let mut defs: BTreeMap<String, Option<BlockId>> = BTreeMap::new();
        let mut define = |name: &str, at: Option<BlockId>| -> Result<(), IrError> {
            if !is_identifier(name) {
                return Err(IrError::BadName(name.to_string()));
            }
            if defs.insert(name.to_string(), at).is_some() {
                return Err(IrError::DuplicateDefinition(name.to_string()));
            }
            Ok(())
        };
        for h in &self.inputs {
            define(&h.name, None)?;
            let bad_range = match h.ty {
                Type::Bool => h.lo.is_some() || h.hi.is_some(),
                Type::Int => matches!((h.lo, h.hi), (Some(l), Some(u)) if l > u),
            };
            if bad_range {
                return Err(IrError::HavocRange(h.name.clone()));
            }
        }
        for (i, b) in self.blocks.iter().enumerate() {
            for phi in &b.phis {
                define(&phi.target, Some(BlockId(i)))?;
            }
            for (v, _) in &b.assigns {
                define(v, Some(BlockId(i)))?;
            }
        }
        self.def_block = defs;
        Ok(())
    }

    fn infer_types(&mut self) -> Result<(), IrError> {
        let mut types: BTreeMap<String, Type> =
            self.inputs.iter().map(|h| (h.name.clone(), h.ty)).collect();
        // Phi targets may depend on definitions later in block order (loops),
        // so iterate to a fixpoint before checking.
        loop {
            let before = types.len();
            for b in &self.blocks {
                for phi in &b.phis {
                    if types.contains_key(&phi.target) {
                        continue;
                    }
                    let look = |n: &str| types.get(n).copied();
                    if let Some(t) = phi.sources.iter().find_map(|(_, v)| v.type_of(&look).ok()) {
                        types.insert(phi.target.clone(), t);
                    }
                }
                for (v, e) in &b.assigns {
                    if types.contains_key(v) {
                        continue;
                    }
                    let look = |n: &str| types.get(n).copied();
                    if let Ok(t) = e.type_of(&look) {
                        types.insert(v.clone(), t);
                    }
                }
            }
            if types.len() == before {
                break;
            }
        }
        let look = |n: &str| types.get(n).copied();
        for b in &self.blocks {
            let err = |msg: String| IrError::Type {
                block: b.name.clone(),
                msg,
            };
            let undefined = |e: &Expr| {
                e.vars()
                    .into_iter()
                    .find(|v| !self.def_block.contains_key(v))
                    .map(|v| IrError::UndefinedVariable {
                        var: v,
                        block: b.name.clone(),
                    })
            };
            for phi in &b.phis {
                for (_, v) in &phi.sources {
                    if let Some(e) = undefined(v) {
                        return Err(e);
                    }
                    let t = v.type_of(&look).map_err(err)?;
                    if Some(t) != look(&phi.target) {
                        return Err(err(format!("phi `{}` mixes sorts", phi.target)));
                    }
                }
            }
            for (v, e) in &b.assigns {
                if let Some(u) = undefined(e) {
                    return Err(u);
                }
                let t = e.type_of(&look).map_err(err)?;
                if Some(t) != look(v) {
                    return Err(err(format!("`{v}` assigned a {t}")));
                }
            }
            let mut conds: Vec<&Expr> = b.assumes.iter().collect();
            if let Terminator::Branch { cond, .. } = &b.terminator {
                conds.push(cond);
            }
            for c in conds {
                if let Some(u) = undefined(c) {
                    return Err(u);
                }
                if c.type_of(&look).map_err(err)? != Type::Bool {
                    return Err(err(format!("condition `{c}` is not Boolean")));
                }
            }
        }
        self.types = types;
        Ok(())
    }

    fn check_dominance(&self) -> Result<(), IrError> {
        let idom = dom::idoms_of_graph(&self.successor_lists(), self.entry.0);
        let dominates = |a: usize, mut b: usize| loop {
            if a == b {
                return true;
            }
            match idom[b] {
                Some(p) if p != b => b = p,
                _ => return false,
            }
        };
        for (i, b) in self.blocks.iter().enumerate() {
            let mut local: BTreeSet<&str> = b.phis.iter().map(|p| p.target.as_str()).collect();
            let available = |v: &str, local: &BTreeSet<&str>, at: usize| -> bool {
                match self.def_block.get(v) {
                    Some(None) => true,
                    Some(Some(d)) => {
                        (d.0 == at && local.contains(v)) || (d.0 != at && dominates(d.0, at))
                    }
                    None => false,
                }
            };
            let check = |e: &Expr, local: &BTreeSet<&str>| -> Result<(), IrError> {
                for v in e.vars() {
                    if !available(&v, local, i) {
                        return Err(IrError::NotDominated {
                            var: v,
                            block: b.name.clone(),
                        });
                    }
                }
                Ok(())
            };
            for phi in &b.phis {
                for (pred, v) in &phi.sources {
                    for var in v.vars() {
                        let ok = match self.def_block.get(&var) {
                            Some(None) => true,
                            Some(Some(d)) => dominates(d.0, pred.0),
                            None => false,
                        };
                        if !ok {
                            return Err(IrError::NotDominated {
                                var,
                                block: b.name.clone(),
                            });
                        }
                    }
                }
            }
            for (v, e) in &b.assigns {
                check(e, &local)?;
                local.insert(v.as_str());
            }
            for a in &b.assumes {
                check(a, &local)?;
            }
            if let Terminator::Branch { cond, .. } = &b.terminator {
                check(cond, &local)?;
            }
        }
        Ok(())
    }
}

/// Which program elements carry timing costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostConvention {
    Edges,
    Blocks,
    EdgesAndBlocks,
    /// Every cost is zero.
    None,
}

/// Nonnegative cycle costs per edge and per block, indexed by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub edge: Vec<u64>,
    pub block: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CostError {
    #[error("cost model has {got} edge costs but the program has {expected} edges")]
    EdgeCount { expected: usize, got: usize },
    #[error("cost model has {got} block costs but the program has {expected} blocks")]
    BlockCount { expected: usize, got: usize },
}

impl CostModel {
    pub fn zeros(p: &Program) -> CostModel {
        CostModel {
            edge: vec![0; p.num_edges()],
            block: vec![0; p.num_blocks()],
        }
    }

    pub fn edge_cost(&self, e: EdgeId) -> u64 {
        self.edge[e.0]
    }

    pub fn block_cost(&self, b: BlockId) -> u64 {
        self.block[b.0]
    }

    pub fn check(&self, p: &Program) -> Result<(), CostError> {
        if self.edge.len() != p.num_edges() {
            return Err(CostError::EdgeCount {
                expected: p.num_edges(),
                got: self.edge.len(),
            });
        }
        if self.block.len() != p.num_blocks() {
            return Err(CostError::BlockCount {
                expected: p.num_blocks(),
                got: self.block.len(),
            });
        }
        Ok(())
    }

    pub fn convention(&self) -> CostConvention {
        let edges = self.edge.iter().any(|&c| c > 0);
        let blocks = self.block.iter().any(|&c| c > 0);
        match (edges, blocks) {
            (true, true) => CostConvention::EdgesAndBlocks,
            (true, false) => CostConvention::Edges,
            (false, true) => CostConvention::Blocks,
            (false, false) => CostConvention::None,
        }
    }

    /// Cost of a block sequence: every traversed edge plus every block.
    pub fn path_cost(&self, p: &Program, blocks: &[BlockId]) -> Option<u64> {
        let mut total = blocks.iter().map(|b| self.block[b.0]).sum::<u64>();
        for w in blocks.windows(2) {
            total += self.edge[p.find_edge(w[0], w[1])?.0];
        }
        Some(total)
    }
}

/// Name-keyed block used by the front ends and by loop unrolling, before
/// block ids are assigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawBlock {
    pub name: String,
    pub phis: Vec<RawPhi>,
    pub assigns: Vec<(String, Expr)>,
    pub assumes: Vec<Expr>,
    pub term: RawTerm,
    pub loop_bound: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPhi {
    pub target: String,
    pub sources: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawTerm {
    Branch {
        cond: Expr,
        then_to: String,
        else_to: String,
    },
    Goto(String),
    Return,
}

impl RawBlock {
    pub fn new(name: impl Into<String>) -> RawBlock {
        RawBlock {
            name: name.into(),
            phis: Vec::new(),
            assigns: Vec::new(),
            assumes: Vec::new(),
            term: RawTerm::Return,
            loop_bound: None,
        }
    }

    pub fn targets(&self) -> Vec<&str> {
        match &self.term {
            RawTerm::Branch {
                then_to, else_to, ..
            } => vec![then_to, else_to],
            RawTerm::Goto(t) => vec![t],
            RawTerm::Return => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawProgram {
    pub name: String,
    pub blocks: Vec<RawBlock>,
    pub entry: String,
    pub exit: String,
    pub inputs: Vec<HavocVar>,
}

impl RawProgram {
    pub fn build(self) -> Result<Program, IrError> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, b) in self.blocks.iter().enumerate() {
            if index.insert(b.name.as_str(), i).is_some() {
                return Err(IrError::DuplicateBlock(b.name.clone()));
            }
        }
        let id = |n: &str| {
            index
                .get(n)
                .map(|&i| BlockId(i))
                .ok_or_else(|| IrError::UnknownBlock(n.to_string()))
        };
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let terminator = match &b.term {
                RawTerm::Branch {
                    cond,
                    then_to,
                    else_to,
                } => Terminator::Branch {
                    cond: cond.clone(),
                    then_to: id(then_to)?,
                    else_to: id(else_to)?,
                },
                RawTerm::Goto(t) => Terminator::Goto(id(t)?),
                RawTerm::Return => Terminator::Return,
            };
            let mut phis = Vec::with_capacity(b.phis.len());
            for p in &b.phis {
                let mut sources = Vec::with_capacity(p.sources.len());
                for (pred, v) in &p.sources {
                    sources.push((id(pred)?, v.clone()));
                }
                phis.push(Phi {
                    target: p.target.clone(),
                    sources,
                });
            }
            blocks.push(Block {
                name: b.name.clone(),
                phis,
                assigns: b.assigns.clone(),
                assumes: b.assumes.clone(),
                terminator,
                loop_bound: b.loop_bound,
            });
        }
        let entry = id(&self.entry)?;
        let exit = id(&self.exit)?;
        Program::new(self.name, blocks, entry, exit, self.inputs)
    }
}

impl Program {
    pub fn to_raw(&self) -> RawProgram {
        let name = |b: BlockId| self.blocks[b.0].name.clone();
        RawProgram {
            name: self.name.clone(),
            entry: name(self.entry),
            exit: name(self.exit),
            inputs: self.inputs.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| RawBlock {
                    name: b.name.clone(),
                    phis: b
                        .phis
                        .iter()
                        .map(|p| RawPhi {
                            target: p.target.clone(),
                            sources: p
                                .sources
                                .iter()
                                .map(|(b, v)| (name(*b), v.clone()))
                                .collect(),
                        })
                        .collect(),
                    assigns: b.assigns.clone(),
                    assumes: b.assumes.clone(),
                    term: match &b.terminator {
                        Terminator::Branch {
                            cond,
                            then_to,
                            else_to,
                        } => RawTerm::Branch {
                            cond: cond.clone(),
                            then_to: name(*then_to),
                            else_to: name(*else_to),
                        },
                        Terminator::Goto(t) => RawTerm::Goto(name(*t)),
                        Terminator::Return => RawTerm::Return,
                    },
                    loop_bound: b.loop_bound,
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn goto(name: &str, to: &str) -> RawBlock {
        let mut b = RawBlock::new(name);
        b.term = RawTerm::Goto(to.into());
        b
    }

    fn raw(blocks: Vec<RawBlock>, entry: &str, exit: &str) -> RawProgram {
        RawProgram {
            name: "t".into(),
            blocks,
            entry: entry.into(),
            exit: exit.into(),
            inputs: vec![HavocVar::boolean("c")],
        }
    }

    #[test]
    fn single_block_program_has_no_edges() {
        let p = raw(vec![RawBlock::new("entry")], "entry", "entry")
            .build()
            .unwrap();
        assert_eq!(p.num_blocks(), 1);
        assert_eq!(p.num_edges(), 0);
    }

    #[test]
    fn dangling_target_is_rejected() {
        let err = raw(vec![goto("a", "bX"), RawBlock::new("b")], "a", "b")
            .build()
            .unwrap_err();
        assert_eq!(err, IrError::UnknownBlock("bX".into()));
    }

    #[test]
    fn phi_must_cover_incoming_edges() {
        let mut a = RawBlock::new("a");
        a.term = RawTerm::Branch {
            cond: Expr::var("c"),
            then_to: "b".into(),
            else_to: "m".into(),
        };
        let mut m = RawBlock::new("m");
        m.phis.push(RawPhi {
            target: "x".into(),
            sources: vec![("b".into(), Expr::int(1))],
        });
        let err = raw(vec![a, goto("b", "m"), m], "a", "m")
            .build()
            .unwrap_err();
        assert!(matches!(err, IrError::PhiMismatch { .. }));
    }

    #[test]
    fn use_outside_definition_scope_is_rejected() {
        let mut a = RawBlock::new("a");
        a.term = RawTerm::Branch {
            cond: Expr::var("c"),
            then_to: "b".into(),
            else_to: "m".into(),
        };
        let mut b = goto("b", "m");
        b.assigns.push(("y".into(), Expr::int(1)));
        let mut m = RawBlock::new("m");
        m.assigns.push(("z".into(), Expr::var("y")));
        let err = raw(vec![a, b, m], "a", "m").build().unwrap_err();
        assert!(matches!(err, IrError::NotDominated { .. }));
    }

    #[test]
    fn duplicate_ssa_definition_is_rejected() {
        let mut a = RawBlock::new("a");
        a.assigns.push(("y".into(), Expr::int(1)));
        a.assigns.push(("y".into(), Expr::int(2)));
        let err = raw(vec![a], "a", "a").build().unwrap_err();
        assert_eq!(err, IrError::DuplicateDefinition("y".into()));
    }

    #[test]
    fn unreachable_block_is_rejected() {
        let err = raw(
            vec![goto("a", "c"), goto("b", "c"), RawBlock::new("c")],
            "a",
            "c",
        )
        .build()
        .unwrap_err();
        assert_eq!(err, IrError::Unreachable("b".into()));
    }
}
