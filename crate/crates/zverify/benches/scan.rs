use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use zverify::multipliers::log_grid;
use zverify::par;
use zverify::spectral::{connection_coefficients, OpKind};

fn point(xi: f64) -> f64 {
    connection_coefficients(OpKind::L, &[xi], 1e-10).unwrap()[0].norm()
}

fn scan(c: &mut Criterion) {
    let xs = log_grid(1e-2, 1e1, 8);
    let mut g = c.benchmark_group("connection_scan");
    g.sample_size(10);
    g.bench_function("par_map", |b| b.iter(|| par::map(black_box(&xs), |&x| point(x))));
    g.bench_function("map_seq", |b| b.iter(|| par::map_seq(black_box(&xs), |&x| point(x))));
    g.finish();
}

criterion_group!(benches, scan);
criterion_main!(benches);
