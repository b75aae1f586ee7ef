use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use imcf_bench::{flat_lattice, log_radius_field, schwarzschild_limit};
use imcf_core::imcf::mesh::level_measure;
use imcf_core::imcf::{flow_report, TGrid};
use imcf_core::metrics::Metric;
use imcf_core::pharmonic::{grid_green, radial_green, SolverConfig};
use imcf_core::WarpedMetric;

fn radial(c: &mut Criterion) {
    let e = WarpedMetric::euclidean(10.0);
    c.bench_function("radial_green p=1.5", |b| {
        b.iter(|| radial_green(&e, 1.5, 10.0).unwrap())
    });
    let (m, f) = schwarzschild_limit(100.0);
    let m = Metric::Warped(m);
    let grid = TGrid::default().levels(&f, &m).unwrap();
    c.bench_function("flow_report schwarzschild", |b| {
        b.iter(|| flow_report(&f, &m, &grid, 0.0).unwrap())
    });
}

fn lattice(c: &mut Criterion) {
    let mut g = c.benchmark_group("lattice");
    g.sample_size(10);
    for n in [32usize, 48] {
        let m = flat_lattice(n, 2.4 / n as f64);
        let w = log_radius_field(&m);
        g.bench_with_input(BenchmarkId::new("level_measure", n), &n, |b, _| {
            b.iter(|| level_measure(&m, &w, 0.0, None).unwrap())
        });
    }
    let m = flat_lattice(29, 0.1);
    let cfg = SolverConfig {
        eps_inner: 0.31,
        ..SolverConfig::default()
    };
    g.bench_function("grid_green 29^3 p=1.5", |b| {
        b.iter(|| grid_green(&m, [0.0; 3], 1.5, 1.28, &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, radial, lattice);
criterion_main!(benches);
