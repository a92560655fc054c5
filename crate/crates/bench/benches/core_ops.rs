//! Hot-path benchmarks: the monotone envelope, the rearrangement, the
//! iterated operator, a full certificate evaluation, and the oracle seeding
//! pass.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use cesaro_bench::{log_grid, monotone_step, positive_step, sparse_step};
use cesaro_core::{
    apply_t, ibp_a, lower_bound, random_instance, rearrange, suffix_sup, OracleConfig,
    ProblemSpec, SpecInput, TargetNorm, Theorem,
};

fn bench_envelope(c: &mut Criterion) {
    let mut group = c.benchmark_group("suffix_envelope");
    for n in [512usize, 4096] {
        let grid = log_grid(n);
        let f = sparse_step(&grid, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| suffix_sup(black_box(f)))
        });
    }
    group.finish();
}

fn bench_rearrange(c: &mut Criterion) {
    let mut group = c.benchmark_group("rearrange");
    for n in [512usize, 4096] {
        let grid = log_grid(n);
        let f = sparse_step(&grid, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| rearrange(black_box(f)).unwrap())
        });
    }
    group.finish();
}

fn bench_iterated_operator(c: &mut Criterion) {
    let grid = log_grid(2048);
    let u = positive_step(&grid, 3);
    let bw = positive_step(&grid, 4);
    let h = monotone_step(&grid, 5);
    c.bench_function("iterated_operator_2048", |b| {
        b.iter(|| apply_t(black_box(&u), black_box(&bw), black_box(&h)).unwrap())
    });
}

fn bench_parts_identity(c: &mut Criterion) {
    let grid = log_grid(2048);
    let inst = random_instance(1.5, 9, &grid).unwrap();
    c.bench_function("parts_identity_2048", |b| {
        b.iter(|| ibp_a(black_box(&inst)).unwrap())
    });
}

fn certificate_spec(n: usize) -> ProblemSpec {
    ProblemSpec::build(SpecInput {
        theorem: Theorem::Thm61,
        p: 2.0,
        q: 3.0,
        t_min: 1e-4,
        t_max: 1e4,
        n,
        u: Some("t^0.3".to_string()),
        v: "t".to_string(),
        w: "t^-2.5 * chi(0, 1)".to_string(),
        a: None,
        b: Some("1".to_string()),
        gamma_over_n: None,
    })
    .unwrap()
}

fn bench_certificate(c: &mut Criterion) {
    let mut group = c.benchmark_group("certificate_terms");
    group.sample_size(20);
    for n in [256usize, 512] {
        let spec = certificate_spec(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &spec, |b, spec| {
            b.iter(|| spec.evaluate_once().unwrap())
        });
    }
    group.finish();
}

fn bench_oracle_seeding(c: &mut Criterion) {
    let spec = certificate_spec(257);
    let cfg = OracleConfig { subsample: 8, ascent_iters: 0, seed: 7 };
    c.bench_function("oracle_seed_pass_257", |b| {
        b.iter(|| lower_bound(black_box(&spec), &cfg, TargetNorm::Cesaro).unwrap())
    });
}

criterion_group!(
    benches,
    bench_envelope,
    bench_rearrange,
    bench_iterated_operator,
    bench_parts_identity,
    bench_certificate,
    bench_oracle_seeding
);
criterion_main!(benches);
