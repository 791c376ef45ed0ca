//! Sequences of if-then-else pairs that share their condition.

use crate::ir::{BlockId, CostModel, Expr, HavocVar, Program, RawBlock, RawProgram, RawTerm};

use super::BenchError;

/// `n` fragments; fragment `i` tests `b_i` twice, costing 2 then 3 when it
/// holds and 3 then 2 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiamondSpec {
    pub n: usize,
    /// Lower bound queried by the single-check regime.
    pub m: Option<u64>,
}

impl DiamondSpec {
    pub fn new(n: usize) -> DiamondSpec {
        DiamondSpec { n, m: None }
    }

    /// Closed-form WCET.
    pub fn wcet(&self) -> u64 {
        5 * self.n as u64
    }
}

/// Per-fragment costs of the then and else arms of the two tests.
pub const FIRST_ARMS: (u64, u64) = (2, 3);
pub const SECOND_ARMS: (u64, u64) = (3, 2);

/// Builds the diamond program. Each `b_i` is an integer input in `{0, 1}`;
/// arm costs sit on the arm blocks.
pub fn gen_diamond(spec: DiamondSpec) -> Result<(Program, CostModel), BenchError> {
    if spec.n == 0 {
        return Err(BenchError::Spec(
            "a diamond needs at least one fragment".into(),
        ));
    }
    let head = |i: usize, part: char| {
        if i == spec.n {
            "exit".to_string()
        } else {
            format!("f{i}.{part}")
        }
    };
    let mut blocks = Vec::new();
    let mut arm_costs = Vec::new();
    let mut inputs = Vec::new();
    for i in 0..spec.n {
        let b = format!("b{i}");
        inputs.push(HavocVar::int(&b, Some(0), Some(1)));
        let cond = Expr::eq(Expr::var(&b), Expr::Int(1));
        for (part, next, arms) in [
            ('x', head(i, 'y'), FIRST_ARMS),
            ('y', head(i + 1, 'x'), SECOND_ARMS),
        ] {
            let name = head(i, part);
            let mut h = RawBlock::new(&name);
            h.term = RawTerm::Branch {
                cond: cond.clone(),
                then_to: format!("{name}.then"),
                else_to: format!("{name}.else"),
            };
            blocks.push(h);
            for (arm, cost) in [("then", arms.0), ("else", arms.1)] {
                let mut a = RawBlock::new(format!("{name}.{arm}"));
                a.term = RawTerm::Goto(next.clone());
                arm_costs.push((a.name.clone(), cost));
                blocks.push(a);
            }
        }
    }
    blocks.push(RawBlock::new("exit"));
    let p = RawProgram {
        name: format!("diamond{}", spec.n),
        entry: "f0.x".into(),
        exit: "exit".into(),
        blocks,
        inputs,
    }
    .build()
    .map_err(|e| BenchError::Spec(e.to_string()))?;
    let mut costs = CostModel::zeros(&p);
    for (name, cost) in arm_costs {
        let BlockId(i) = p.find_block(&name).expect("arm block exists");
        costs.block[i] = cost;
    }
    Ok((p, costs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfgkit::{syntactic_bound, Scope};

    #[test]
    fn shape_and_bounds() {
        let (p, c) = gen_diamond(DiamondSpec::new(3)).unwrap();
        assert_eq!(p.num_blocks(), 3 * 6 + 1);
        assert_eq!(p.num_edges(), 3 * 8);
        assert_eq!(p.inputs().len(), 3);
        assert_eq!(syntactic_bound(&p, &c, Scope::Whole).unwrap(), 18);
        assert_eq!(DiamondSpec::new(3).wcet(), 15);
    }

    #[test]
    fn zero_fragments_are_rejected() {
        assert!(gen_diamond(DiamondSpec::new(0)).is_err());
    }
}
