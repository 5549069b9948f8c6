use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use scalebench_core::rng::SeededRng;
use scalebench_core::{friedman, wilcoxon_signed_rank};
use std::hint::black_box;

fn tests(c: &mut Criterion) {
    let mut rng = SeededRng::new(3);
    let mut group = c.benchmark_group("wilcoxon");
    // 25 pairs is the largest exact case; 200 uses the normal approximation
    for n in [12usize, 25, 200] {
        let a: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &(a, b), |bench, (a, b)| {
            bench.iter(|| wilcoxon_signed_rank(black_box(a), black_box(b), 0.01).unwrap())
        });
    }
    group.finish();

    let table = Array2::from_shape_fn((30, 13), |_| (rng.uniform() * 20.0).round() / 20.0);
    c.bench_function("friedman_30x13", |b| {
        b.iter(|| friedman(black_box(table.view()), 0.01).unwrap())
    });
}

criterion_group!(benches, tests);
criterion_main!(benches);
