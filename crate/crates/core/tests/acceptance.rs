//! Acceptance criteria, one PASS/FAIL line each.

mod common;

use std::fmt::Display;
use std::time::{Duration, Instant};

use smtwcet::bench::{
    gen_diamond, oracle_wcet, oracle_wcet_with, random_dag, random_program, run_equivalence,
    BenchMode, DiamondSpec, RandomSpec,
};
use smtwcet::cfgkit::{find_portions, immediate_dominators, syntactic_bound, Scope};
use smtwcet::encode::{
    emit_smtlib, encode, encode_with_cuts, plan_cuts, CostEncoding, CutMode, EncodingOptions,
};
use smtwcet::ir::{parse_cfg_file, Expr};
use smtwcet::omt::{analyze, AnalysisOptions, OmtError, Strategy};
use smtwcet::par::Exec;
use smtwcet::solve::{check, Verdict};

use common::{brute_bound, brute_idoms, check_cuts_on_samples, formula, solver};

const LISTED: &str = include_str!("../testdata/rate_limiter.json");
const PRINTED: &str = include_str!("../testdata/rate_limiter_printed.json");

/// Rate-limiter criteria must finish within this.
const GOLDEN_LIMIT: Duration = Duration::from_secs(5);
/// Per-instance limit of the diamond criteria.
const DIAMOND_LIMIT: Duration = Duration::from_secs(60);
/// Minimal growth per unit `n` of the no-cuts unsat query.
const GROWTH: f64 = 1.5;
/// Timeout that also counts as intractability, reached by `n <= 24`.
const INTRACTABLE: Duration = Duration::from_secs(300);
const RANDOM_INSTANCES: u64 = 200;
const RANDOM_LIMIT_MS: f64 = 10_000.0;
const MIN_COMPLETION: f64 = 0.95;
const SAMPLED_INSTANCES: u64 = 20;
const MODELS_PER_INSTANCE: usize = 50;
const DAGS: u64 = 100;

struct Report {
    failed: Vec<String>,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, what: impl Display) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id}: {what}");
        if !ok {
            self.failed.push(id.to_string());
        }
    }

    fn info(&self, what: impl Display) {
        println!("INFO {what}");
    }
}

fn above(cost_var: &str, m: i64) -> Expr {
    Expr::ge(Expr::var(cost_var), Expr::Int(m))
}

fn criterion_1(r: &mut Report) {
    let t0 = Instant::now();
    let (p, costs) = parse_cfg_file(PRINTED).unwrap();
    let mut plan = plan_cuts(&p, &costs, CutMode::Leaves).unwrap();
    for spec in &mut plan.specs {
        spec.bound = match spec.label.as_str() {
            "entry..if.end" => 21,
            "if.end..if.end6" => 22,
            _ => 43,
        };
    }
    let f = encode_with_cuts(&p, &costs, CostEncoding::Sum, &plan.specs).unwrap();
    let solver = solver(GOLDEN_LIMIT.as_millis() as u64);
    let v37 = check(&emit_smtlib(&f, Some(&above(&f.cost_var, 37))), &solver);
    let v36 = check(&emit_smtlib(&f, Some(&above(&f.cost_var, 36))), &solver);
    let cost36 = match &v36 {
        Verdict::Sat(m) => m.int(&f.cost_var),
        _ => None,
    };
    let elapsed = t0.elapsed();
    let ok = v37 == Verdict::Unsat && cost36 == Some(36) && elapsed < GOLDEN_LIMIT;
    r.line(
        "1",
        ok,
        format!(
            "printed rate limiter with cuts 21/22/43: cost >= 37 {}, cost >= 36 {} (cost {:?}), {:.2} s",
            v37.name(),
            v36.name(),
            cost36,
            elapsed.as_secs_f64()
        ),
    );
}

fn criterion_2(r: &mut Report) {
    let t0 = Instant::now();
    let (p, costs) = parse_cfg_file(LISTED).unwrap();
    let solver = solver(GOLDEN_LIMIT.as_millis() as u64);
    let a = analyze(&p, &costs, AnalysisOptions::default(), &solver).unwrap();
    let oracle = oracle_wcet(&p, &costs, &solver).unwrap().wcet();
    let elapsed = t0.elapsed();
    let res = &a.result;
    let ok = res.sound
        && res.syntactic_bound == 39
        && res.wcet == 32
        && res.syntactic_bound - res.wcet == 7
        && oracle == Some(32)
        && elapsed < GOLDEN_LIMIT;
    r.line(
        "2",
        ok,
        format!(
            "listed rate limiter: syntactic {}, wcet {}, improvement {}, oracle {:?}, {:.2} s",
            res.syntactic_bound,
            res.wcet,
            res.syntactic_bound.saturating_sub(res.wcet),
            oracle,
            elapsed.as_secs_f64()
        ),
    );
}

/// Full maximization of `diamond(n)`; the WCET when sound, and the time.
fn diamond_run(
    n: usize,
    opts: AnalysisOptions,
    limit: Duration,
) -> (Option<u64>, Duration, String) {
    let (p, costs) = gen_diamond(DiamondSpec::new(n)).unwrap();
    let t0 = Instant::now();
    let out = analyze(&p, &costs, opts, &solver(limit.as_millis() as u64));
    let elapsed = t0.elapsed();
    match out {
        Ok(a) if a.result.sound => (Some(a.result.wcet), elapsed, "sound".into()),
        Ok(a) => {
            let last = a
                .result
                .trace
                .last()
                .map_or("unknown".to_string(), |q| q.verdict.clone());
            (None, elapsed, format!("indecisive ({last})"))
        }
        Err(e) => (None, elapsed, format!("error: {e}")),
    }
}

fn leaf_cuts() -> AnalysisOptions {
    AnalysisOptions {
        cuts: CutMode::Leaves,
        ..AnalysisOptions::default()
    }
}

/// Returns whether `n = 100` completed within the limit.
fn criterion_3(r: &mut Report) -> (bool, String) {
    let mut ok = true;
    let mut notes = Vec::new();
    for n in 1..=8 {
        let (p, costs) = gen_diamond(DiamondSpec::new(n)).unwrap();
        let oracle = oracle_wcet_with(
            &p,
            &costs,
            &solver(DIAMOND_LIMIT.as_millis() as u64),
            1 << 16,
            Exec::Parallel,
        )
        .unwrap()
        .wcet();
        let (wcet, t, _) = diamond_run(n, leaf_cuts(), DIAMOND_LIMIT);
        let good = wcet == Some(5 * n as u64) && oracle == wcet && t < DIAMOND_LIMIT;
        ok &= good;
        if !good {
            notes.push(format!(
                "n={n}: wcet {wcet:?}, oracle {oracle:?}, {:.1} s",
                t.as_secs_f64()
            ));
        }
    }
    let mut hundred = (false, String::new());
    for n in [20, 50, 100] {
        let (wcet, t, verdict) = diamond_run(n, leaf_cuts(), DIAMOND_LIMIT);
        let good = wcet == Some(5 * n as u64) && t < DIAMOND_LIMIT;
        ok &= good;
        let note = format!("n={n}: wcet {wcet:?} ({verdict}), {:.1} s", t.as_secs_f64());
        if n == 100 {
            hundred = (good, note.clone());
        }
        notes.push(note);
    }
    r.line(
        "3",
        ok,
        format!(
            "diamond wcet = 5n with leaf cuts, n in 1..=8 against the oracle and n in {{20, 50, 100}}; {}",
            notes.join("; ")
        ),
    );
    let refined = AnalysisOptions {
        cuts: CutMode::Hierarchical,
        refine_portions: true,
        ..AnalysisOptions::default()
    };
    let (wcet, t, verdict) = diamond_run(100, refined, DIAMOND_LIMIT);
    r.info(format!(
        "diamond n=100 with hierarchical cuts and refined portion bounds: wcet {wcet:?} ({verdict}), {:.1} s",
        t.as_secs_f64()
    ));
    hundred
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

/// Median time of the unsatisfiable `cost >= 5n + 1` check without cuts;
/// `None` on timeout.
fn unsat_check_time(n: usize, runs: usize) -> Option<Duration> {
    let (p, costs) = gen_diamond(DiamondSpec::new(n)).unwrap();
    let opts = EncodingOptions {
        cuts: CutMode::None,
        ..EncodingOptions::default()
    };
    let f = encode(&p, &costs, opts).unwrap();
    let script = emit_smtlib(&f, Some(&above(&f.cost_var, 5 * n as i64 + 1)));
    let solver = solver(INTRACTABLE.as_millis() as u64);
    let mut times = Vec::new();
    for _ in 0..runs {
        let t0 = Instant::now();
        match check(&script, &solver) {
            Verdict::Unsat => times.push(t0.elapsed()),
            _ => return None,
        }
    }
    Some(median(times))
}

fn criterion_4(r: &mut Report, hundred: (bool, String)) {
    let mut trend = None;
    let mut series = Vec::new();
    let mut prev: Option<Duration> = None;
    for n in 10..=24 {
        let Some(t) = unsat_check_time(n, 3) else {
            series.push(format!("n={n}: timeout"));
            trend = Some(format!("timeout of {} s at n={n}", INTRACTABLE.as_secs()));
            break;
        };
        series.push(format!("n={n}: {:.0} ms", t.as_secs_f64() * 1000.0));
        if let Some(p) = prev {
            let ratio = t.as_secs_f64() / p.as_secs_f64();
            if n <= 22 && ratio >= GROWTH {
                trend = Some(format!("factor {ratio:.2} from n={} to n={n}", n - 1));
                break;
            }
        }
        prev = Some(t);
    }
    let ok = trend.is_some() && hundred.0;
    r.line(
        "4",
        ok,
        format!(
            "no-cuts unsat check grows: {} [{}]; leaf cuts at n=100 within {} s: {}",
            trend.as_deref().unwrap_or("no growth step found"),
            series.join(", "),
            DIAMOND_LIMIT.as_secs(),
            hundred.1
        ),
    );
}

fn criteria_5_and_6(r: &mut Report) {
    let solver = solver(RANDOM_LIMIT_MS as u64);
    let seeds: Vec<u64> = (0..RANDOM_INSTANCES).collect();
    let report = run_equivalence(
        &seeds,
        RandomSpec::default(),
        &[BenchMode::NoCuts],
        &solver,
        Exec::Parallel,
    );
    let completed = report
        .rows
        .iter()
        .filter(|row| row.agree.is_some() && row.omt_ms <= RANDOM_LIMIT_MS)
        .count();
    let both = report.completed().count();
    let agree = report
        .completed()
        .filter(|row| row.agree == Some(true))
        .count();
    let rate = completed as f64 / RANDOM_INSTANCES as f64;
    r.line(
        "5",
        both > 0 && agree == both && rate >= MIN_COMPLETION,
        format!(
            "binary search matches the oracle on {agree}/{both} completed random programs; {completed}/{RANDOM_INSTANCES} completed within {} s",
            RANDOM_LIMIT_MS / 1000.0
        ),
    );

    let configs = [
        (CutMode::None, Strategy::Binary),
        (CutMode::Leaves, Strategy::Binary),
        (CutMode::Hierarchical, Strategy::Binary),
        (CutMode::None, Strategy::CutOrdered),
        (CutMode::Leaves, Strategy::CutOrdered),
        (CutMode::Hierarchical, Strategy::CutOrdered),
    ];
    let results = smtwcet::par::map(Exec::Parallel, &seeds, |&seed| {
        let (p, costs) = random_program(seed, RandomSpec::default());
        configs
            .iter()
            .map(|&(cuts, strategy)| {
                let opts = AnalysisOptions {
                    cuts,
                    strategy,
                    ..AnalysisOptions::default()
                };
                match analyze(&p, &costs, opts, &solver) {
                    Ok(a) if a.result.sound => Some(Some(a.result.wcet)),
                    Err(OmtError::Infeasible) => Some(None),
                    _ => None,
                }
            })
            .collect::<Vec<_>>()
    });
    let mut mismatched = Vec::new();
    let mut runs = 0;
    for (seed, row) in seeds.iter().zip(&results) {
        let done: Vec<_> = row.iter().flatten().collect();
        runs += done.len();
        if done.windows(2).any(|w| w[0] != w[1]) {
            mismatched.push(seed.to_string());
        }
    }

    let mut models = 0;
    let mut violations = Vec::new();
    let mut indecisive = 0;
    for seed in 0..SAMPLED_INSTANCES {
        let (p, costs) = random_program(seed, RandomSpec::default());
        let f = formula(&p, &costs, CutMode::Hierarchical);
        let max = syntactic_bound(&p, &costs, Scope::Whole).unwrap();
        let c = check_cuts_on_samples(&f, &f.cut_vars, MODELS_PER_INSTANCE, seed, &solver, max);
        models += c.models;
        indecisive += c.indecisive;
        violations.extend(
            c.violations
                .into_iter()
                .map(|v| format!("seed {seed}: {v}")),
        );
    }
    r.line(
        "6",
        mismatched.is_empty() && violations.is_empty() && indecisive == 0,
        format!(
            "wcet identical across 3 cut modes x 2 strategies on {}/{} instances ({runs} completed runs){}; \
             {models} sampled models over {SAMPLED_INSTANCES} instances, {} cut violations, {indecisive} indecisive samples",
            RANDOM_INSTANCES as usize - mismatched.len(),
            RANDOM_INSTANCES,
            if mismatched.is_empty() {
                String::new()
            } else {
                format!(", differing seeds {}", mismatched.join(" "))
            },
            violations.len()
        ),
    );
    for v in violations.iter().take(5) {
        r.info(v);
    }
}

fn criterion_7(r: &mut Report) {
    let mut idom_bad = Vec::new();
    let mut bound_bad = Vec::new();
    let mut portions = 0;
    for seed in 0..DAGS {
        let (p, costs) = random_dag(seed, 12, 9);
        let dt = immediate_dominators(&p);
        let brute = brute_idoms(&p);
        if p.block_ids().any(|b| dt.idom(b) != brute[b.0]) {
            idom_bad.push(seed);
        }
        let mut good =
            syntactic_bound(&p, &costs, Scope::Whole).unwrap() == brute_bound(&p, &costs, None);
        for q in find_portions(&p, &dt).unwrap() {
            portions += 1;
            good &= syntactic_bound(&p, &costs, q.scope()).unwrap()
                == brute_bound(&p, &costs, Some((&q.edges, &q.blocks)));
        }
        if !good {
            bound_bad.push(seed);
        }
    }
    r.line(
        "7",
        idom_bad.is_empty() && bound_bad.is_empty(),
        format!(
            "{DAGS} random DAGs: idoms differ on {idom_bad:?}, syntactic bounds (whole and {portions} portions) differ on {bound_bad:?}"
        ),
    );
}

#[test]
fn acceptance() {
    let mut r = Report { failed: Vec::new() };
    criterion_1(&mut r);
    criterion_2(&mut r);
    criterion_7(&mut r);
    criteria_5_and_6(&mut r);
    let hundred = criterion_3(&mut r);
    criterion_4(&mut r, hundred);
    println!(
        "NOT REPRODUCIBLE criterion 8: the benchmark rows of the industrial and Malardalen/Papabench tables need the \
         original LLVM and OTAWA toolchain and sources; criteria 1-7 stand in for them"
    );
    assert!(
        r.failed.is_empty(),
        "failing criteria: {}",
        r.failed.join(", ")
    );
}
