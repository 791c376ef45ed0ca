//! Maximization of the cost variable by binary search over satisfiability
//! queries, cut-ordered successive optimization, recursive refinement of
//! portion bounds and witness extraction.

mod refine;
mod witness;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cfgkit::{self, CfgError};
use crate::encode::{
    encode_with_cuts, plan_cuts, CostEncoding, CutKind, CutMode, CutPlan, EncodeError, Formula,
};
use crate::ir::{CostModel, Expr, Program, Value};
use crate::solve::{eval_in_model, Model, Session, SolverConfig, Verdict};

pub use refine::{refine_cut_specs, refine_portion_bound, sub_program, RefineRecord, SubProgram};
pub use witness::{extract_witness, WitnessPath};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OmtError {
    #[error("the program has no feasible trace")]
    Infeasible,
    #[error("solver error: {0}")]
    Solver(String),
    #[error("model validation failed: {0}")]
    Model(String),
    #[error("{label} reaches {witnessed}, above its upper bound {bound}")]
    BoundViolated {
        label: String,
        bound: u64,
        witnessed: i64,
    },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Cfg(#[from] CfgError),
}

/// Optimization strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Binary,
    CutOrdered,
}

/// One satisfiability query of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    /// `cost` or the cut variable being maximized.
    pub objective: String,
    /// Queried lower bound; absent for the feasibility check.
    pub m: Option<i64>,
    pub verdict: String,
    pub elapsed_ms: f64,
}

/// Interval of a search: `lo` is the greatest cost witnessed feasible
/// (`-1` before any model), `hi` the current sound upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub lo: i64,
    pub hi: i64,
    #[serde(skip)]
    pub best_model: Option<Model>,
    pub queries: usize,
    pub elapsed_ms: f64,
}

/// Optimized bound of one cut.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutBound {
    pub id: usize,
    pub label: String,
    pub kind: CutKind,
    pub syntactic: u64,
    pub optimized: u64,
    pub sound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub wcet: u64,
    /// False when an indecisive query left `wcet` as an upper bound only.
    pub sound: bool,
    pub witness: Option<WitnessPath>,
    pub syntactic_bound: u64,
    pub stats: SearchState,
    pub per_cut_bounds: Vec<CutBound>,
    pub trace: Vec<QueryRecord>,
}

struct Search<'a> {
    session: Session,
    started: Instant,
    trace: Vec<QueryRecord>,
    formula: &'a Formula,
}

enum Answer {
    Sat(Model),
    Unsat,
    Undecided,
}

struct Outcome {
    lo: i64,
    hi: i64,
    sound: bool,
    model: Option<Model>,
}

impl<'a> Search<'a> {
    fn new(f: &'a Formula, solver: &SolverConfig) -> Search<'a> {
        Search {
            session: Session::new(f, solver),
            started: Instant::now(),
            trace: Vec::new(),
            formula: f,
        }
    }

    fn ask(&mut self, label: &str, objective: &Expr, m: Option<i64>) -> Result<Answer, OmtError> {
        let extra: Vec<Expr> = m
            .map(|m| Expr::ge(objective.clone(), Expr::Int(m)))
            .into_iter()
            .collect();
        let t0 = Instant::now();
        let verdict = self.session.query(&extra);
        let elapsed = t0.elapsed();
        let record = QueryRecord {
            objective: label.to_string(),
            m,
            verdict: verdict.name().to_string(),
            elapsed_ms: millis(elapsed),
        };
        log::debug!(
            "query {} >= {}: {} in {:.1} ms",
            record.objective,
            m.map_or("-".to_string(), |m| m.to_string()),
            record.verdict,
            record.elapsed_ms
        );
        self.trace.push(record);
        match verdict {
            Verdict::Sat(model) => {
                self.validate(&model, &extra)?;
                Ok(Answer::Sat(model))
            }
            Verdict::Unsat => Ok(Answer::Unsat),
            Verdict::Unknown(_) | Verdict::Timeout => Ok(Answer::Undecided),
            Verdict::SolverError(e) => Err(OmtError::Solver(e)),
        }
    }

    /// Every assertion of the query must hold under the model.
    fn validate(&self, model: &Model, extra: &[Expr]) -> Result<(), OmtError> {
        for d in &self.formula.decls {
            match model.get(&d.name) {
                Some(v) if v.ty() == d.ty => {}
                Some(v) => {
                    return Err(OmtError::Model(format!(
                        "`{}` has value {v} of the wrong sort",
                        d.name
                    )))
                }
                None => return Err(OmtError::Model(format!("no value for `{}`", d.name))),
            }
        }
        let lookup = model.lookup();
        self.formula.check(&lookup).map_err(OmtError::Model)?;
        for e in self.session.permanent().iter().chain(extra) {
            if e.eval(&lookup) != Ok(Value::Bool(true)) {
                return Err(OmtError::Model(format!("`{e}` does not hold")));
            }
        }
        Ok(())
    }

    fn value(model: &Model, objective: &Expr) -> Result<i64, OmtError> {
        eval_in_model(model, objective)
            .ok()
            .and_then(Value::as_int)
            .ok_or_else(|| OmtError::Model(format!("`{objective}` has no integer value")))
    }

    /// Binary search on `objective` within `[lo, hi]`, where `lo` is
    /// witnessed by `model`.
    fn maximize(
        &mut self,
        label: &str,
        objective: &Expr,
        mut lo: i64,
        mut model: Option<Model>,
        mut hi: i64,
    ) -> Result<Outcome, OmtError> {
        let violated = |witnessed: i64, hi: i64| OmtError::BoundViolated {
            label: label.to_string(),
            bound: hi.max(0) as u64,
            witnessed,
        };
        if lo > hi {
            return Err(violated(lo, hi));
        }
        let mut sound = true;
        while lo < hi {
            let mid = lo + (hi - lo + 1) / 2;
            match self.ask(label, objective, Some(mid))? {
                Answer::Sat(m) => {
                    let v = Self::value(&m, objective)?;
                    if v > hi {
                        return Err(violated(v, hi));
                    }
                    lo = lo.max(mid).max(v);
                    model = Some(m);
                }
                Answer::Unsat => hi = mid - 1,
                Answer::Undecided => {
                    sound = false;
                    break;
                }
            }
        }
        Ok(Outcome {
            lo,
            hi,
            sound,
            model,
        })
    }

    /// Any model of the formula, or `None` when the solver cannot decide.
    fn feasible(&mut self) -> Result<Option<Model>, OmtError> {
        let cost = Expr::var(&self.formula.cost_var);
        match self.ask(&self.formula.cost_var.clone(), &cost, None)? {
            Answer::Sat(m) => Ok(Some(m)),
            Answer::Unsat => Err(OmtError::Infeasible),
            Answer::Undecided => Ok(None),
        }
    }

    fn finish(
        self,
        p: &Program,
        costs: &CostModel,
        syntactic: u64,
        total: Outcome,
        per_cut_bounds: Vec<CutBound>,
    ) -> Result<OptimizationResult, OmtError> {
        let witness = match (&total.model, total.sound) {
            (Some(m), true) => Some(extract_witness(self.formula, m, p, costs)?),
            _ => None,
        };
        if let Some(w) = &witness {
            if w.cost as i64 != total.hi {
                return Err(OmtError::Model(format!(
                    "witness costs {} but the optimum is {}",
                    w.cost, total.hi
                )));
            }
        }
        Ok(OptimizationResult {
            wcet: total.hi.max(0) as u64,
            sound: total.sound,
            witness,
            syntactic_bound: syntactic,
            stats: SearchState {
                lo: total.lo,
                hi: total.hi,
                best_model: total.model,
                queries: self.session.queries(),
                elapsed_ms: millis(self.started.elapsed()),
            },
            per_cut_bounds,
            trace: self.trace,
        })
    }
}

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

fn undecided(syntactic: u64, hi: u64) -> Outcome {
    Outcome {
        lo: -1,
        hi: hi.min(syntactic) as i64,
        sound: false,
        model: None,
    }
}

/// Maximizes `f`'s cost variable by binary search from `[0, init_hi]`
/// after a feasibility check. `init_hi` must bound every feasible cost;
/// the syntactic bound of `p` is used when it is smaller.
pub fn maximize_binary_search(
    p: &Program,
    costs: &CostModel,
    f: &Formula,
    init_hi: u64,
    solver: &SolverConfig,
) -> Result<OptimizationResult, OmtError> {
    let syntactic = cfgkit::syntactic_bound(p, costs, cfgkit::Scope::Whole)?;
    let hi = init_hi.min(syntactic);
    let mut search = Search::new(f, solver);
    let Some(m0) = search.feasible()? else {
        return search.finish(p, costs, syntactic, undecided(syntactic, hi), Vec::new());
    };
    let cost = Expr::var(&f.cost_var);
    let lo = Search::value(&m0, &cost)?;
    let total = search.maximize(&f.cost_var, &cost, lo, Some(m0), hi as i64)?;
    search.finish(p, costs, syntactic, total, Vec::new())
}

/// Maximizes every cut variable in increasing order of portion size,
/// asserting each optimum as a strengthened cut, then maximizes the total
/// cost. Requires the sum encoding.
pub fn maximize_cut_ordered(
    p: &Program,
    costs: &CostModel,
    f: &Formula,
    init_hi: u64,
    solver: &SolverConfig,
) -> Result<OptimizationResult, OmtError> {
    if f.encoding != Some(CostEncoding::Sum) {
        return Err(OmtError::Unsupported(
            "cut-ordered optimization needs the sum encoding".into(),
        ));
    }
    let syntactic = cfgkit::syntactic_bound(p, costs, cfgkit::Scope::Whole)?;
    let hi = init_hi.min(syntactic);
    let mut search = Search::new(f, solver);
    let Some(m0) = search.feasible()? else {
        return search.finish(p, costs, syntactic, undecided(syntactic, hi), Vec::new());
    };
    let mut order: Vec<_> = f
        .cut_vars
        .iter()
        .filter(|c| c.kind != CutKind::Whole && c.var.is_some())
        .collect();
    order.sort_by_key(|c| (c.size, c.header_pos, c.id));
    let mut per_cut = Vec::with_capacity(order.len());
    for cut in order {
        let objective = cut.term.clone();
        let lo = Search::value(&m0, &objective)?;
        let name = cut.var.clone().unwrap_or_else(|| cut.label.clone());
        let out = search.maximize(&name, &objective, lo, Some(m0.clone()), cut.bound as i64)?;
        let optimized = out.hi.max(0) as u64;
        if optimized < cut.bound {
            search
                .session
                .assert_permanent(&cut.constraint_with(optimized));
        }
        per_cut.push(CutBound {
            id: cut.id,
            label: cut.label.clone(),
            kind: cut.kind,
            syntactic: cut.bound,
            optimized,
            sound: out.sound,
        });
    }
    let cost = Expr::var(&f.cost_var);
    let lo = Search::value(&m0, &cost)?;
    let total = search.maximize(&f.cost_var, &cost, lo, Some(m0), hi as i64)?;
    search.finish(p, costs, syntactic, total, per_cut)
}

/// Knobs of a full analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub encoding: CostEncoding,
    pub cuts: CutMode,
    pub strategy: Strategy,
    /// Replace syntactic cut bounds by recursively computed ones.
    pub refine_portions: bool,
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<(), OmtError> {
        if self.encoding == CostEncoding::Counter && self.strategy == Strategy::CutOrdered {
            return Err(OmtError::Unsupported(
                "cut-ordered optimization needs the sum encoding".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of [`analyze`].
#[derive(Debug, Clone)]
pub struct Analysis {
    pub result: OptimizationResult,
    pub plan: CutPlan,
    pub formula: Formula,
    pub refinements: Vec<RefineRecord>,
}

impl Analysis {
    /// Number of cut constraints in the formula.
    pub fn cut_count(&self) -> usize {
        self.formula.cut_vars.len()
    }
}

/// Plans cuts, optionally refines their bounds, encodes and optimizes.
pub fn analyze(
    p: &Program,
    costs: &CostModel,
    opts: AnalysisOptions,
    solver: &SolverConfig,
) -> Result<Analysis, OmtError> {
    opts.validate()?;
    let mut plan = plan_cuts(p, costs, opts.cuts)?;
    let refinements = if opts.refine_portions {
        refine_cut_specs(p, costs, &mut plan.specs, solver)?
    } else {
        Vec::new()
    };
    let formula = encode_with_cuts(p, costs, opts.encoding, &plan.specs)?;
    let syntactic = cfgkit::syntactic_bound(p, costs, cfgkit::Scope::Whole)?;
    let result = match opts.strategy {
        Strategy::Binary => maximize_binary_search(p, costs, &formula, syntactic, solver)?,
        Strategy::CutOrdered => maximize_cut_ordered(p, costs, &formula, syntactic, solver)?,
    };
    Ok(Analysis {
        result,
        plan,
        formula,
        refinements,
    })
}
