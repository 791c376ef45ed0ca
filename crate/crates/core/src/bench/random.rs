//! Seeded random loop-free programs for cross-validation.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ir::{
    parse_minilang, CostModel, Expr, HavocVar, Program, RawBlock, RawProgram, RawTerm,
};

/// Size limits of [`random_program`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSpec {
    pub max_blocks: usize,
    pub max_decisions: usize,
    pub max_inputs: usize,
    pub input_range: (i64, i64),
    pub max_cost: u64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            max_blocks: 12,
            max_decisions: 6,
            max_inputs: 3,
            input_range: (-10, 10),
            max_cost: 20,
        }
    }
}

struct Gen {
    rng: ChaCha8Rng,
    spec: RandomSpec,
    inputs: Vec<String>,
    locals: Vec<String>,
    blocks: usize,
    decisions: usize,
    out: String,
}

impl Gen {
    fn term(&mut self) -> String {
        let names: Vec<String> = self.inputs.iter().chain(&self.locals).cloned().collect();
        let a = names.choose(&mut self.rng).expect("inputs exist").clone();
        match self.rng.gen_range(0..4) {
            0 => {
                let b = names.choose(&mut self.rng).expect("inputs exist").clone();
                if a == b {
                    a
                } else {
                    format!("{a} + {b}")
                }
            }
            1 => format!("{a} - {}", self.rng.gen_range(0..8)),
            2 => format!("2 * {a}"),
            _ => a,
        }
    }

    fn guard(&mut self) -> String {
        let op = ["<", "<=", ">", ">=", "==", "!="][self.rng.gen_range(0..6)];
        let k = self.rng.gen_range(-10..=10);
        format!("{} {op} {k}", self.term())
    }

    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
    }

    fn stmts(&mut self, depth: usize) {
        let count = self.rng.gen_range(1..=3);
        for _ in 0..count {
            let room = self.spec.max_blocks.saturating_sub(self.blocks);
            let want_if = self.rng.gen_bool(0.6) && depth < 3;
            if want_if && self.decisions < self.spec.max_decisions && room >= 2 {
                let with_else = room >= 3 && self.rng.gen_bool(0.5);
                self.decisions += 1;
                self.blocks += if with_else { 3 } else { 2 };
                let g = self.guard();
                self.indent(depth);
                let _ = writeln!(self.out, "if ({g}) {{");
                self.stmts(depth + 1);
                self.indent(depth);
                if with_else {
                    self.out.push_str("} else {\n");
                    self.stmts(depth + 1);
                    self.indent(depth);
                }
                self.out.push_str("}\n");
            } else if self.rng.gen_bool(0.5) {
                let t = self.term();
                let name = if depth > 0 && self.rng.gen_bool(0.5) {
                    let names: Vec<String> =
                        self.inputs.iter().chain(&self.locals).cloned().collect();
                    names.choose(&mut self.rng).expect("inputs exist").clone()
                } else {
                    format!("v{}", self.locals.len())
                };
                self.indent(depth);
                let _ = writeln!(self.out, "{name} = {t};");
                if depth == 0 && !self.locals.contains(&name) && !self.inputs.contains(&name) {
                    self.locals.push(name);
                }
            } else if self.rng.gen_bool(0.2) {
                let g = self.guard();
                self.indent(depth);
                let _ = writeln!(self.out, "assume({g});");
            } else {
                let k = self.rng.gen_range(1..=5);
                self.indent(depth);
                let _ = writeln!(self.out, "x0 = x0 + {k};");
            }
        }
    }
}

/// Minilang source of the program `random_program` builds for `seed`.
pub fn random_source(seed: u64, spec: RandomSpec) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_inputs = rng.gen_range(1..=spec.max_inputs.max(1));
    let mut g = Gen {
        rng,
        spec,
        inputs: (0..n_inputs).map(|i| format!("x{i}")).collect(),
        locals: Vec::new(),
        blocks: 1,
        decisions: 0,
        out: format!("program random{seed};\n"),
    };
    let (lo, hi) = spec.input_range;
    for x in g.inputs.clone() {
        let _ = writeln!(g.out, "{x} = nondet({lo}, {hi});");
    }
    g.stmts(0);
    g.out
}

/// Deterministic random loop-free program: nested if-then(-else) over
/// linear guards on integer inputs, with independent random costs in
/// `[0, max_cost]` on every edge and block.
pub fn random_program(seed: u64, spec: RandomSpec) -> (Program, CostModel) {
    let src = random_source(seed, spec);
    let (p, _) = parse_minilang(&src).expect("generated programs parse");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut costs = CostModel::zeros(&p);
    for c in costs.edge.iter_mut().chain(costs.block.iter_mut()) {
        *c = rng.gen_range(0..=spec.max_cost);
    }
    (p, costs)
}

/// Random single-entry single-exit DAG on `2..=max_blocks` blocks whose
/// branches test unconstrained Boolean inputs, with random costs.
pub fn random_dag(seed: u64, max_blocks: usize, max_cost: u64) -> (Program, CostModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(2..=max_blocks.max(2));
        let name = |i: usize| format!("n{i}");
        let mut blocks: Vec<RawBlock> = (0..n).map(|i| RawBlock::new(name(i))).collect();
        let mut inputs = Vec::new();
        let mut has_pred = vec![false; n];
        for i in 0..n - 1 {
            let first = if !has_pred[i + 1] || rng.gen_bool(0.5) {
                i + 1
            } else {
                rng.gen_range(i + 1..n)
            };
            has_pred[first] = true;
            if i + 2 < n && rng.gen_bool(0.6) {
                let mut second = rng.gen_range(i + 1..n);
                if second == first {
                    second = if first + 1 < n { first + 1 } else { i + 1 };
                }
                if second != first {
                    has_pred[second] = true;
                    let g = format!("g{i}");
                    inputs.push(HavocVar::boolean(&g));
                    blocks[i].term = RawTerm::Branch {
                        cond: Expr::var(g),
                        then_to: name(first),
                        else_to: name(second),
                    };
                    continue;
                }
            }
            blocks[i].term = RawTerm::Goto(name(first));
        }
        let raw = RawProgram {
            name: format!("dag{seed}"),
            blocks,
            entry: name(0),
            exit: name(n - 1),
            inputs,
        };
        if let Ok(p) = raw.build() {
            let mut costs = CostModel::zeros(&p);
            for c in costs.edge.iter_mut().chain(costs.block.iter_mut()) {
                *c = rng.gen_range(0..=max_cost);
            }
            return (p, costs);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn programs_are_deterministic_in_the_seed() {
        let spec = RandomSpec::default();
        assert_eq!(random_source(1, spec), random_source(1, spec));
        assert_eq!(random_program(1, spec), random_program(1, spec));
        assert_ne!(random_source(1, spec), random_source(2, spec));
    }

    #[test]
    fn programs_respect_the_size_limits() {
        let spec = RandomSpec::default();
        for seed in 0..200 {
            let (p, c) = random_program(seed, spec);
            assert!(
                p.num_blocks() <= 12,
                "seed {seed}: {} blocks",
                p.num_blocks()
            );
            let decisions = p.block_ids().filter(|b| p.succs(*b).len() == 2).count();
            assert!(decisions <= 6);
            assert!((1..=3).contains(&p.inputs().len()));
            assert!(c.edge.iter().chain(&c.block).all(|&x| x <= 20));
        }
    }

    #[test]
    fn dags_are_valid_and_bounded() {
        for seed in 0..100 {
            let (p, _) = random_dag(seed, 12, 9);
            assert!(p.num_blocks() <= 12);
            assert_eq!(random_dag(seed, 12, 9).0, p);
        }
    }
}
