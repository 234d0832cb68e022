use std::hint::black_box;

use biortho_core::charpoly::{avg_charpoly, McConfig, QuadratureOracle};
use biortho_core::chgue::{
    chgue_kernel, chgue_kernel_data, chgue_type_one, chgue_type_two, confluent_kernel, rank_decomposition,
    ChgueKernel, URoute,
};
use biortho_core::ensemble::build_kernel;
use biortho_core::{ChgueParams, ConfluentSpec, EnsembleSpec, SourceModel};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn sources(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.5 - 0.3 * i as f64).collect()
}

fn kernel_routes(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernel_eval");
    for n in [2, 4, 8] {
        let p = ChgueParams::new(1.0, sources(n)).unwrap();
        let closed = chgue_kernel(&p).unwrap();
        let quad = ChgueKernel::new(&p, URoute::Quadrature).unwrap();
        let generic = chgue_kernel_data(&p).unwrap();
        g.bench_with_input(BenchmarkId::new("closed_auto", n), &n, |b, _| {
            b.iter(|| closed.eval(black_box(1.3), black_box(2.7)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("closed_quadrature", n), &n, |b, _| {
            b.iter(|| quad.eval(black_box(1.3), black_box(2.7)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("gram_inverse", n), &n, |b, _| {
            b.iter(|| generic.kernel_eval(black_box(1.3), black_box(2.7)))
        });
    }
    g.finish();
}

fn kernel_setup(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernel_setup");
    for n in [2, 4, 8] {
        let p = ChgueParams::new(1.0, sources(n)).unwrap();
        g.bench_with_input(BenchmarkId::new("closed_form", n), &p, |b, p| {
            b.iter(|| chgue_kernel(p).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("laguerre_gram", n), &n, |b, &n| {
            b.iter(|| build_kernel(&EnsembleSpec::laguerre(n, 1.0).unwrap()).unwrap())
        });
        let spec = ConfluentSpec::new(vec![1.5, 0.0], vec![n / 2, n - n / 2]).unwrap();
        g.bench_with_input(BenchmarkId::new("confluent", n), &spec, |b, s| {
            b.iter(|| confluent_kernel(s, 1.0).unwrap())
        });
    }
    g.finish();
}

fn polynomials(c: &mut Criterion) {
    let p = ChgueParams::new(0.5, sources(4)).unwrap();
    let q = chgue_type_one(&p).unwrap();
    let pp = chgue_type_two(&p).unwrap();
    c.bench_function("type_one_eval", |b| b.iter(|| q.eval(black_box(3.1)).unwrap()));
    c.bench_function("type_two_eval", |b| b.iter(|| pp.eval(black_box(3.1)).unwrap()));
    let r = ChgueParams::new(1.0, vec![1.2, 0.5, 0.0, 0.0]).unwrap();
    c.bench_function("rank_decomposition", |b| {
        b.iter(|| rank_decomposition(&r, 2, black_box(1.0), black_box(2.0)).unwrap())
    });
}

fn averages(c: &mut Criterion) {
    let m = SourceModel::chiral(1.0, vec![0.3, 1.1]).unwrap();
    let mut g = c.benchmark_group("charpoly");
    g.sample_size(10);
    g.bench_function("monte_carlo_10k", |b| {
        b.iter(|| avg_charpoly(&m, black_box(2.0), &McConfig::new(10_000, 1).with_workers(1)).unwrap())
    });
    g.bench_function("quadrature_oracle_setup", |b| b.iter(|| QuadratureOracle::new(&m).unwrap()));
    let oracle = QuadratureOracle::new(&m).unwrap();
    g.bench_function("quadrature_oracle_charpoly", |b| b.iter(|| oracle.charpoly(black_box(2.0))));
    g.finish();
}

criterion_group!(benches, kernel_routes, kernel_setup, polynomials, averages);
criterion_main!(benches);
