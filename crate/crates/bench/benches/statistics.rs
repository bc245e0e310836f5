use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use maxproj::geometry::{make_cover, sample_uniform};
use maxproj::harness::Battery;
use maxproj::limit_sim::kernel_factor;
use maxproj::rng::seeded;
use maxproj::statistics::projection_maxima;
use std::hint::black_box;

fn projection(c: &mut Criterion) {
    let mut g = c.benchmark_group("projection_maxima");
    for (d, n, m) in [(2, 100, 5000), (3, 100, 5000), (5, 100, 20000)] {
        let mut rng = seeded(1);
        let sample = sample_uniform(d, n, &mut rng).unwrap();
        let cover = make_cover(d, m, 2).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(format!("d{d}_n{n}_m{m}")), &(), |b, _| {
            b.iter(|| projection_maxima(black_box(&sample), &cover, 6).unwrap())
        });
    }
    g.finish();
}

fn battery(c: &mut Criterion) {
    let mut g = c.benchmark_group("battery");
    for d in [2, 3] {
        let b = Battery::new(d, &[1, 2, 3, 4, 5, 6], 5000, true);
        let mut rng = seeded(3);
        let sample = sample_uniform(d, 100, &mut rng).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(format!("d{d}_n100")), &(), |bench, _| {
            bench.iter(|| b.evaluate(black_box(&sample), &mut rng).unwrap())
        });
    }
    g.finish();
}

fn limit_factor(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernel_factor");
    g.sample_size(10);
    for beta in [1, 6] {
        let cover = make_cover(2, 1000, 4).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(format!("beta{beta}_m1000")), &(), |b, _| {
            b.iter(|| kernel_factor(beta, black_box(&cover)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, projection, battery, limit_factor);
criterion_main!(benches);
