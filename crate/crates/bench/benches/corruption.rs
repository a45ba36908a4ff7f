use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use paramprobe::{solve_constrained_max, top_n, CorruptionConstraint, NormOrder};
use paramprobe_bench::gaussian;
use std::hint::black_box;

fn solver(c: &mut Criterion) {
    let k = 100_000;
    let v = gaussian(k, 1);
    let mut group = c.benchmark_group("solve_constrained_max");
    for p in ["1", "2", "3", "inf"] {
        let cons = CorruptionConstraint::full(p.parse::<NormOrder>().unwrap(), 0.1, k / 10, k).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(p), &cons, |b, cons| {
            b.iter(|| solve_constrained_max(black_box(&v), cons).unwrap())
        });
    }
    group.finish();
}

fn selection(c: &mut Criterion) {
    let v = gaussian(100_000, 2);
    let mut group = c.benchmark_group("top_n");
    for n in [10, 1000, 100_000] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| top_n(black_box(&v), n).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, solver, selection);
criterion_main!(benches);
