use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use smtwcet::bench::{
    gen_diamond, oracle_wcet_with, random_program, DiamondSpec, RandomSpec, DEFAULT_PATH_LIMIT,
};
use smtwcet::omt::{analyze, AnalysisOptions};
use smtwcet::par::{self, Exec};
use smtwcet::solve::SolverConfig;

const EXECS: [(&str, Exec); 2] = [
    ("parallel", Exec::Parallel),
    ("sequential", Exec::Sequential),
];

fn solver() -> SolverConfig {
    SolverConfig::detect(60_000).expect("solver configuration")
}

fn oracle_paths(c: &mut Criterion) {
    let solver = solver();
    let (p, costs) = gen_diamond(DiamondSpec::new(4)).expect("diamond");
    let mut group = c.benchmark_group("oracle diamond4");
    group
        .sample_size(10)
        .measurement_time(Duration::from_secs(10));
    for (name, exec) in EXECS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                black_box(
                    oracle_wcet_with(&p, &costs, &solver, DEFAULT_PATH_LIMIT, exec)
                        .expect("oracle"),
                )
            })
        });
    }
    group.finish();
}

fn analyze_batch(c: &mut Criterion) {
    let solver = solver();
    let programs: Vec<_> = (0..8)
        .map(|seed| random_program(seed, RandomSpec::default()))
        .collect();
    let mut group = c.benchmark_group("analyze 8 random programs");
    group
        .sample_size(10)
        .measurement_time(Duration::from_secs(10));
    for (name, exec) in EXECS {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                black_box(par::map(exec, &programs, |(p, costs)| {
                    analyze(p, costs, AnalysisOptions::default(), &solver)
                        .map(|a| a.result.wcet)
                        .ok()
                }))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, oracle_paths, analyze_batch);
criterion_main!(benches);
