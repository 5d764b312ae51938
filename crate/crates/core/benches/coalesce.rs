use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use periodk::bench::synthetic_relation;
use periodk::physical::{coalesce_op_with, split_op_with};
use periodk::Execution;

fn coalesce(c: &mut Criterion) {
    let mut group = c.benchmark_group("coalesce");
    group.sample_size(20);
    for n in [10_000usize, 100_000] {
        let input = synthetic_relation(n, 42);
        group.throughput(Throughput::Elements(n as u64));
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, n), &input, |b, r| {
                b.iter(|| coalesce_op_with(black_box(r), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn split(c: &mut Criterion) {
    let mut group = c.benchmark_group("split");
    group.sample_size(20);
    let n = 50_000;
    let input = synthetic_relation(n, 7);
    group.throughput(Throughput::Elements(n as u64));
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::new(name, n), &input, |b, r| {
            b.iter(|| split_op_with(black_box(r), r, &[0], exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, coalesce, split);
criterion_main!(benches);
