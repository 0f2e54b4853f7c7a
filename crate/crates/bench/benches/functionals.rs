use affcap_bench::{seeded, zoo};
use affcap_core::affine::{phi, phi_curve};
use affcap_core::capacity::profile_optimize;
use affcap_core::generate::GenKind;
use affcap_core::verify::verify_chain;
use affcap_core::{RuleSpec, SphereRule};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn rule(spec: &str, n: usize) -> SphereRule {
    spec.parse::<RuleSpec>().unwrap().build(n, None).unwrap()
}

fn bench_phi(c: &mut Criterion) {
    let r = rule("fibonacci:2000", 3);
    let mut group = c.benchmark_group("phi");
    group.sample_size(20);
    for (name, body) in zoo() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &body, |b, body| {
            b.iter(|| phi(black_box(body), 1.5, 0.3, &r).unwrap())
        });
    }
    group.finish();
}

fn bench_tau_curve(c: &mut Criterion) {
    let r = rule("fibonacci:2000", 3);
    let taus: Vec<f64> = (0..9).map(|i| -1.0 + 0.25 * i as f64).collect();
    let body = seeded(GenKind::GlSimplex, 3);
    c.bench_function("tau_curve/gl-simplex", |b| {
        b.iter(|| phi_curve(black_box(&body), 2.0, &taus, &r).unwrap())
    });
}

fn bench_polygon(c: &mut Criterion) {
    let r = SphereRule::default_for(2).unwrap();
    let body = seeded(GenKind::GlCube, 2);
    c.bench_function("phi/gl-square", |b| {
        b.iter(|| phi(black_box(&body), 1.5, -0.4, &r).unwrap())
    });
}

fn bench_chain(c: &mut Criterion) {
    let r = rule("fibonacci:2000", 3);
    let mut group = c.benchmark_group("verify_chain");
    group.sample_size(10);
    for (name, body) in zoo() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &body, |b, body| {
            b.iter(|| verify_chain(black_box(body), 2.0, 0.7, &r).unwrap())
        });
    }
    group.finish();
}

fn bench_profile(c: &mut Criterion) {
    let mut group = c.benchmark_group("profile_optimize");
    group.sample_size(10);
    for m in [500, 2000] {
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| profile_optimize(3, 2.0, m, 200.0).unwrap())
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_phi,
    bench_tau_curve,
    bench_polygon,
    bench_chain,
    bench_profile
);
criterion_main!(benches);
