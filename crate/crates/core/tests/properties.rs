mod common;

use proptest::prelude::*;

use smtwcet::bench::{oracle_wcet, random_dag, random_program, RandomSpec};
use smtwcet::cfgkit::{find_portions, immediate_dominators, syntactic_bound, Scope};
use smtwcet::encode::CutMode;
use smtwcet::omt::{analyze, AnalysisOptions, OmtError, Strategy};

use common::{brute_bound, brute_idoms, check_cuts_on_samples, formula, solver};

proptest! {
    #[test]
    fn dominators_match_the_removal_definition(seed in any::<u64>(), size in 2usize..=12) {
        let (p, _) = random_dag(seed, size, 9);
        let dt = immediate_dominators(&p);
        let brute = brute_idoms(&p);
        for b in p.block_ids() {
            prop_assert_eq!(dt.idom(b), brute[b.0], "block {}", p.block(b).name);
        }
    }

    #[test]
    fn syntactic_bounds_are_longest_paths(seed in any::<u64>(), size in 2usize..=12) {
        let (p, costs) = random_dag(seed, size, 9);
        prop_assert_eq!(syntactic_bound(&p, &costs, Scope::Whole).unwrap(), brute_bound(&p, &costs, None));
        let dt = immediate_dominators(&p);
        for q in find_portions(&p, &dt).unwrap() {
            let part = Some((&q.edges, &q.blocks));
            prop_assert_eq!(syntactic_bound(&p, &costs, q.scope()).unwrap(), brute_bound(&p, &costs, part));
        }
    }

    #[test]
    fn random_programs_stay_within_their_limits(seed in any::<u64>()) {
        let (p, costs) = random_program(seed, RandomSpec::default());
        prop_assert!(p.num_blocks() <= 12);
        prop_assert!(costs.check(&p).is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn optimizer_matches_the_oracle(seed in any::<u64>()) {
        let (p, costs) = random_program(seed, RandomSpec::default());
        let solver = solver(20_000);
        let oracle = oracle_wcet(&p, &costs, &solver).unwrap();
        for (cuts, strategy) in [
            (CutMode::None, Strategy::Binary),
            (CutMode::Hierarchical, Strategy::Binary),
            (CutMode::Leaves, Strategy::CutOrdered),
        ] {
            let opts = AnalysisOptions { cuts, strategy, ..AnalysisOptions::default() };
            match analyze(&p, &costs, opts, &solver) {
                Ok(a) => {
                    prop_assert!(a.result.sound);
                    prop_assert_eq!(Some(a.result.wcet), oracle.wcet());
                    let w = a.result.witness.as_ref().unwrap();
                    prop_assert_eq!(w.cost, a.result.wcet);
                }
                Err(OmtError::Infeasible) => prop_assert_eq!(oracle.wcet(), None),
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }

    #[test]
    fn cut_constraints_hold_in_sampled_models(seed in any::<u64>()) {
        let (p, costs) = random_program(seed, RandomSpec::default());
        let f = formula(&p, &costs, CutMode::Hierarchical);
        let max = syntactic_bound(&p, &costs, Scope::Whole).unwrap();
        let check = check_cuts_on_samples(&f, &f.cut_vars, 10, seed, &solver(20_000), max);
        prop_assert!(check.violations.is_empty(), "{:?}", check.violations);
        prop_assert_eq!(check.indecisive, 0);
    }
}

#[test]
fn sampling_catches_a_cut_that_is_too_tight() {
    let text = include_str!("../testdata/rate_limiter.json");
    let (p, costs) = smtwcet::ir::parse_cfg_file(text).unwrap();
    let f = formula(&p, &costs, CutMode::Leaves);
    let mut tight = f.cut_vars.clone();
    for c in &mut tight {
        c.bound = c.bound.saturating_sub(10);
    }
    let check = check_cuts_on_samples(&f, &tight, 8, 1, &solver(20_000), 39);
    assert!(check.models > 0);
    assert!(!check.violations.is_empty());
    let sound = check_cuts_on_samples(&f, &f.cut_vars, 8, 1, &solver(20_000), 39);
    assert_eq!(sound.models, 8);
    assert!(sound.violations.is_empty(), "{:?}", sound.violations);
}
