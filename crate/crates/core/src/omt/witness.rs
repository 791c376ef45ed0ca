//! Decoding a model into the entry-to-exit path it describes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::OmtError;
use crate::encode::Formula;
use crate::ir::{BlockId, CostModel, Program, Value};
use crate::solve::Model;

/// A feasible entry-to-exit path and the inputs that drive it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessPath {
    /// Block names from entry to exit.
    pub blocks: Vec<String>,
    /// Taken edge ids, one per consecutive pair of blocks.
    pub edges: Vec<usize>,
    /// Value of every program input, keyed by its SSA name.
    pub input_values: BTreeMap<String, Value>,
    pub cost: u64,
}

/// Follows the true transition variables of `m` from entry to exit and
/// checks that the path is well formed and that its cost is the model's
/// cost value.
pub fn extract_witness(
    f: &Formula,
    m: &Model,
    p: &Program,
    costs: &CostModel,
) -> Result<WitnessPath, OmtError> {
    let truth = |name: &str| {
        m.bool(name)
            .ok_or_else(|| OmtError::Model(format!("no Boolean value for `{name}`")))
    };
    let name = |b: BlockId| p.block(b).name.clone();
    let mut blocks = vec![p.entry()];
    let mut edges = Vec::new();
    let mut on_path = vec![false; p.num_edges()];
    let mut at = p.entry();
    loop {
        if !truth(&f.block_vars[at.0])? {
            return Err(OmtError::Model(format!(
                "block `{}` is on the path but not active",
                name(at)
            )));
        }
        if at == p.exit() {
            break;
        }
        let mut taken = Vec::new();
        for &e in p.succs(at) {
            if truth(&f.edge_vars[e.0])? {
                taken.push(e);
            }
        }
        let e = match taken.as_slice() {
            [e] => *e,
            [] => {
                return Err(OmtError::Model(format!(
                    "no transition out of `{}`",
                    name(at)
                )))
            }
            _ => {
                return Err(OmtError::Model(format!(
                    "{} transitions out of `{}` are taken",
                    taken.len(),
                    name(at)
                )))
            }
        };
        on_path[e.0] = true;
        edges.push(e.0);
        at = p.edge(e).to;
        blocks.push(at);
    }
    for e in p.edges() {
        if !on_path[e.id.0] && truth(&f.edge_vars[e.id.0])? {
            return Err(OmtError::Model(format!(
                "transition `{}` is taken off the path",
                p.edge_name(e.id)
            )));
        }
    }
    let cost = costs
        .path_cost(p, &blocks)
        .expect("consecutive path blocks are joined by edges");
    match m.int(&f.cost_var) {
        Some(c) if c == cost as i64 => {}
        Some(c) => {
            return Err(OmtError::Model(format!(
                "path costs {cost} but the model's cost is {c}"
            )))
        }
        None => return Err(OmtError::Model(format!("no value for `{}`", f.cost_var))),
    }
    let mut input_values = BTreeMap::new();
    for (ssa, var) in &f.input_vars {
        let v = m
            .get(var)
            .ok_or_else(|| OmtError::Model(format!("no value for input `{ssa}`")))?;
        input_values.insert(ssa.clone(), v);
    }
    Ok(WitnessPath {
        blocks: blocks.into_iter().map(name).collect(),
        edges,
        input_values,
        cost,
    })
}
