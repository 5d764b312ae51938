use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use periodk::gen::Bounds;
use periodk::oracle::{differential_check_with, standard_evaluators};
use periodk::Execution;

fn differential(c: &mut Criterion) {
    let mut group = c.benchmark_group("differential");
    group.sample_size(10);
    let evaluators = standard_evaluators();
    let bounds = Bounds {
        max_tuples: 6,
        max_ticks: 32,
        ..Bounds::default()
    };
    let seeds = 200u64;
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_function(BenchmarkId::new(name, seeds), |b| {
            b.iter(|| {
                let reports = differential_check_with(0..seeds, black_box(&bounds), &evaluators, exec);
                assert!(reports.iter().all(|r| r.passed()));
                reports
            })
        });
    }
    group.finish();
}

criterion_group!(benches, differential);
criterion_main!(benches);
