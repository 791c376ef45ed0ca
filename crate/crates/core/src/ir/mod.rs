//! Program representation, the two input front ends, loop unrolling and the
//! loop-freedom check.

pub mod cfgfile;
mod expr;
pub mod minilang;
mod program;
mod unroll;

pub use cfgfile::{emit_cfg_file, parse_cfg_file, CfgFileError};
pub use expr::{is_identifier, CmpOp, EvalError, Expr, ExprParseError, Type, Value};
pub use minilang::{parse_minilang, parse_minilang_with, MiniError};
pub use program::{
    Block, BlockId, CostConvention, CostError, CostModel, Edge, EdgeId, HavocVar, IrError, Phi,
    Program, RawBlock, RawPhi, RawProgram, RawTerm, Terminator,
};
pub use unroll::{unroll, unroll_with_costs, unroll_with_limit, UnrollError, DEFAULT_UNROLL_LIMIT};

use serde::Serialize;

/// Options shared by both front ends.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Replace unsupported constructs (non-linear arithmetic, division) by
    /// fresh unconstrained inputs instead of rejecting them.
    pub havoc_unsupported: bool,
}

/// Blocks of one cycle, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleReport {
    pub blocks: Vec<String>,
}

/// Reports one cycle of the edge relation, if any.
pub fn check_loop_free(p: &Program) -> Result<(), CycleReport> {
    match crate::cfgkit::find_cycle(&p.successor_lists()) {
        None => Ok(()),
        Some(cycle) => Err(CycleReport {
            blocks: cycle
                .into_iter()
                .map(|b| p.block(BlockId(b)).name.clone())
                .collect(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_block_cycle_is_reported() {
        let mut a = RawBlock::new("A");
        a.term = RawTerm::Branch {
            cond: Expr::var("c"),
            then_to: "B".into(),
            else_to: "X".into(),
        };
        let mut b = RawBlock::new("B");
        b.term = RawTerm::Goto("A".into());
        let mut entry = RawBlock::new("entry");
        entry.term = RawTerm::Goto("A".into());
        let p = RawProgram {
            name: "cyc".into(),
            blocks: vec![entry, a, b, RawBlock::new("X")],
            entry: "entry".into(),
            exit: "X".into(),
            inputs: vec![HavocVar::boolean("c")],
        }
        .build()
        .unwrap();
        assert_eq!(
            check_loop_free(&p),
            Err(CycleReport {
                blocks: vec!["A".into(), "B".into()]
            })
        );
    }

    #[test]
    fn single_block_is_loop_free() {
        let p = RawProgram {
            name: "one".into(),
            blocks: vec![RawBlock::new("entry")],
            entry: "entry".into(),
            exit: "entry".into(),
            inputs: vec![],
        }
        .build()
        .unwrap();
        assert_eq!(check_loop_free(&p), Ok(()));
    }
}
