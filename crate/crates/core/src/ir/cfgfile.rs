//! CFG interchange documents (JSON).
//!
//! ```json
//! {
//!   "name": "diamond",
//!   "entry": "entry",
//!   "exit": "end",
//!   "havocs": [{"name": "x", "lo": -10, "hi": 10}],
//!   "blocks": [
//!     {"id": "entry", "term": {"kind": "branch", "cond": "(> x 0)", "then": "a", "else": "b"}},
//!     {"id": "a", "assigns": [["y", "(+ x 1)"]], "term": {"kind": "goto", "target": "end"}},
//!     {"id": "b", "assigns": [["z", "(- x 1)"]], "term": {"kind": "goto", "target": "end"}},
//!     {"id": "end", "phis": [{"target": "w", "sources": [["a", "y"], ["b", "z"]]}],
//!      "term": {"kind": "return"}, "cost": 4}
//!   ],
//!   "edges": [{"from": "entry", "to": "a", "guard": "(> x 0)", "cost": 3}]
//! }
//! ```
//!
//! Edges are implied by the terminators. The `edges` list attaches costs
//! (and optionally restates guards, which must then match); unlisted edges
//! cost zero. Blocks may carry a `cost`, `assumes` and a `loop_bound`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{
    CostModel, Expr, ExprParseError, HavocVar, IrError, Program, RawBlock, RawPhi, RawProgram,
    RawTerm, Terminator,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CfgFileError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("reference to undeclared block `{0}`")]
    DanglingReference(String),
    #[error("negative cost {cost} on {item}")]
    NegativeCost { item: String, cost: i64 },
    #[error("expression `{text}` in {context}: {err}")]
    Expr {
        context: String,
        text: String,
        err: ExprParseError,
    },
    #[error("edge {from} -> {to}: {msg}")]
    Edge {
        from: String,
        to: String,
        msg: String,
    },
    #[error(transparent)]
    Ir(IrError),
}

impl From<IrError> for CfgFileError {
    fn from(e: IrError) -> Self {
        match e {
            IrError::UnknownBlock(b) => CfgFileError::DanglingReference(b),
            other => CfgFileError::Ir(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfgDocument {
    pub name: String,
    pub entry: String,
    pub exit: String,
    #[serde(default)]
    pub havocs: Vec<HavocVar>,
    pub blocks: Vec<DocBlock>,
    #[serde(default)]
    pub edges: Vec<DocEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocBlock {
    pub id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phis: Vec<DocPhi>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assigns: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub assumes: Vec<String>,
    pub term: DocTerm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_bound: Option<u32>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub cost: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocPhi {
    pub target: String,
    pub sources: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DocTerm {
    Return,
    Goto {
        target: String,
    },
    Branch {
        cond: String,
        then: String,
        #[serde(rename = "else")]
        otherwise: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocEdge {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
    #[serde(default)]
    pub cost: i64,
}

fn is_zero(v: &i64) -> bool {
    *v == 0
}

fn parse_expr(text: &str, context: impl Fn() -> String) -> Result<Expr, CfgFileError> {
    Expr::parse_prefix(text).map_err(|err| CfgFileError::Expr {
        context: context(),
        text: text.to_string(),
        err,
    })
}

fn nonnegative(cost: i64, item: impl Fn() -> String) -> Result<u64, CfgFileError> {
    u64::try_from(cost).map_err(|_| CfgFileError::NegativeCost { item: item(), cost })
}

/// Parses an interchange document into a program and its cost model.
pub fn parse_cfg_file(text: &str) -> Result<(Program, CostModel), CfgFileError> {
    let doc: CfgDocument =
        serde_json::from_str(text).map_err(|e| CfgFileError::Schema(e.to_string()))?;
    from_document(&doc)
}

pub fn from_document(doc: &CfgDocument) -> Result<(Program, CostModel), CfgFileError> {
    if doc.blocks.is_empty() {
        return Err(CfgFileError::Schema("empty block list".into()));
    }
    let mut blocks = Vec::with_capacity(doc.blocks.len());
    for b in &doc.blocks {
        let ctx = |what: &str| format!("{what} of block `{}`", b.id);
        let mut raw = RawBlock::new(b.id.clone());
        for p in &b.phis {
            let mut sources = Vec::with_capacity(p.sources.len());
            for (pred, v) in &p.sources {
                sources.push((pred.clone(), parse_expr(v, || ctx("phi"))?));
            }
            raw.phis.push(RawPhi {
                target: p.target.clone(),
                sources,
            });
        }
        for (v, e) in &b.assigns {
            raw.assigns
                .push((v.clone(), parse_expr(e, || ctx("assignment"))?));
        }
        for a in &b.assumes {
            raw.assumes.push(parse_expr(a, || ctx("assume"))?);
        }
        raw.term = match &b.term {
            DocTerm::Return => RawTerm::Return,
            DocTerm::Goto { target } => RawTerm::Goto(target.clone()),
            DocTerm::Branch {
                cond,
                then,
                otherwise,
            } => RawTerm::Branch {
                cond: parse_expr(cond, || ctx("branch condition"))?,
                then_to: then.clone(),
                else_to: otherwise.clone(),
            },
        };
        raw.loop_bound = b.loop_bound;
        nonnegative(b.cost, || format!("block `{}`", b.id))?;
        blocks.push(raw);
    }
    let program = RawProgram {
        name: doc.name.clone(),
        blocks,
        entry: doc.entry.clone(),
        exit: doc.exit.clone(),
        inputs: doc.havocs.clone(),
    }
    .build()?;

    let mut costs = CostModel::zeros(&program);
    for (i, b) in doc.blocks.iter().enumerate() {
        costs.block[i] = nonnegative(b.cost, || format!("block `{}`", b.id))?;
    }
    let mut seen = HashMap::new();
    for e in &doc.edges {
        let lookup = |n: &str| {
            program
                .find_block(n)
                .ok_or_else(|| CfgFileError::DanglingReference(n.to_string()))
        };
        let (from, to) = (lookup(&e.from)?, lookup(&e.to)?);
        let edge_err = |msg: &str| CfgFileError::Edge {
            from: e.from.clone(),
            to: e.to.clone(),
            msg: msg.to_string(),
        };
        let id = program
            .find_edge(from, to)
            .ok_or_else(|| edge_err("no terminator produces this edge"))?;
        if seen.insert(id, ()).is_some() {
            return Err(edge_err("listed twice"));
        }
        if let Some(g) = &e.guard {
            let guard = parse_expr(g, || format!("guard of {} -> {}", e.from, e.to))?;
            if guard.to_string() != program.edge(id).guard.to_string() {
                return Err(edge_err(&format!(
                    "guard `{g}` differs from the terminator's `{}`",
                    program.edge(id).guard
                )));
            }
        }
        costs.edge[id.0] = nonnegative(e.cost, || format!("edge {} -> {}", e.from, e.to))?;
    }
    Ok((program, costs))
}

/// Builds the document describing `p` with `costs`. Every edge is listed
/// with its guard.
pub fn to_document(p: &Program, costs: &CostModel) -> CfgDocument {
    let name = |b| p.block(b).name.clone();
    let blocks = p
        .block_ids()
        .map(|id| {
            let b = p.block(id);
            DocBlock {
                id: b.name.clone(),
                phis: b
                    .phis
                    .iter()
                    .map(|phi| DocPhi {
                        target: phi.target.clone(),
                        sources: phi
                            .sources
                            .iter()
                            .map(|(pred, v)| (name(*pred), v.to_string()))
                            .collect(),
                    })
                    .collect(),
                assigns: b
                    .assigns
                    .iter()
                    .map(|(v, e)| (v.clone(), e.to_string()))
                    .collect(),
                assumes: b.assumes.iter().map(|a| a.to_string()).collect(),
                term: match &b.terminator {
                    Terminator::Return => DocTerm::Return,
                    Terminator::Goto(t) => DocTerm::Goto { target: name(*t) },
                    Terminator::Branch {
                        cond,
                        then_to,
                        else_to,
                    } => DocTerm::Branch {
                        cond: cond.to_string(),
                        then: name(*then_to),
                        otherwise: name(*else_to),
                    },
                },
                loop_bound: b.loop_bound,
                cost: costs.block_cost(id) as i64,
            }
        })
        .collect();
    let edges = p
        .edges()
        .iter()
        .map(|e| DocEdge {
            from: name(e.from),
            to: name(e.to),
            guard: Some(e.guard.to_string()),
            cost: costs.edge_cost(e.id) as i64,
        })
        .collect();
    CfgDocument {
        name: p.name().to_string(),
        entry: name(p.entry()),
        exit: name(p.exit()),
        havocs: p.inputs().to_vec(),
        blocks,
        edges,
    }
}

/// Pretty-printed interchange document for `p` with `costs`.
pub fn emit_cfg_file(p: &Program, costs: &CostModel) -> String {
    let mut s =
        serde_json::to_string_pretty(&to_document(p, costs)).expect("documents always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIAMOND: &str = r#"{
        "name": "d", "entry": "entry", "exit": "end",
        "havocs": [{"name": "x", "lo": -10, "hi": 10}],
        "blocks": [
            {"id": "entry", "term": {"kind": "branch", "cond": "(> x 0)", "then": "a", "else": "b"}},
            {"id": "a", "assigns": [["y", "(+ x 1)"]], "term": {"kind": "goto", "target": "end"}},
            {"id": "b", "assigns": [["z", "(- x 1)"]], "term": {"kind": "goto", "target": "end"}},
            {"id": "end", "phis": [{"target": "w", "sources": [["a", "y"], ["b", "z"]]}],
             "term": {"kind": "return"}, "cost": 4}
        ],
        "edges": [{"from": "entry", "to": "a", "guard": "(> x 0)", "cost": 3},
                  {"from": "entry", "to": "b", "cost": 2}]
    }"#;

    #[test]
    fn parses_structure_and_costs() {
        let (p, c) = parse_cfg_file(DIAMOND).unwrap();
        assert_eq!(p.num_blocks(), 4);
        assert_eq!(p.num_edges(), 4);
        assert_eq!(c.edge, vec![3, 2, 0, 0]);
        assert_eq!(c.block, vec![0, 0, 0, 4]);
    }

    #[test]
    fn round_trip_is_a_fixpoint() {
        let (p, c) = parse_cfg_file(DIAMOND).unwrap();
        let text = emit_cfg_file(&p, &c);
        let (q, d) = parse_cfg_file(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(c, d);
        assert_eq!(text, emit_cfg_file(&q, &d));
    }

    #[test]
    fn dangling_reference() {
        let text = DIAMOND.replace(r#""then": "a""#, r#""then": "bX""#);
        assert!(matches!(
            parse_cfg_file(&text),
            Err(CfgFileError::DanglingReference(b)) if b == "bX"
        ));
    }

    #[test]
    fn empty_block_list_is_a_schema_violation() {
        let text = r#"{"name": "e", "entry": "a", "exit": "a", "blocks": []}"#;
        assert!(matches!(parse_cfg_file(text), Err(CfgFileError::Schema(_))));
        assert!(matches!(
            parse_cfg_file("{\"name\": 3}"),
            Err(CfgFileError::Schema(_))
        ));
    }

    #[test]
    fn negative_cost_and_duplicate_definition() {
        let neg = DIAMOND.replace("\"cost\": 2", "\"cost\": -2");
        assert!(matches!(
            parse_cfg_file(&neg),
            Err(CfgFileError::NegativeCost { cost: -2, .. })
        ));
        let dup = DIAMOND.replace(r#"["z", "(- x 1)"]"#, r#"["y", "(- x 1)"]"#);
        assert!(matches!(
            parse_cfg_file(&dup),
            Err(CfgFileError::Ir(IrError::DuplicateDefinition(_)))
        ));
    }

    #[test]
    fn mismatched_guard_is_rejected() {
        let bad = DIAMOND.replace(r#""guard": "(> x 0)""#, r#""guard": "(< x 0)""#);
        assert!(matches!(
            parse_cfg_file(&bad),
            Err(CfgFileError::Edge { .. })
        ));
    }
}
