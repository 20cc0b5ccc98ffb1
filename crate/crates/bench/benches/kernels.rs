use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;
use normhol_core::transport::parallel_transport_normal;
use normhol_core::{build_orbit, eigh, holonomy_algebra, matrix_exp, probe_rng, OrbitCurve, VeroneseOrbit};

fn spd(n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
    &a + a.transpose()
}

fn kernels(c: &mut Criterion) {
    let mut g = c.benchmark_group("dense");
    for n in [6, 15, 28] {
        let s = spd(n);
        g.bench_with_input(BenchmarkId::new("eigh", n), &s, |b, s| b.iter(|| eigh(black_box(s), 1e-9)));
        let x = (&s - s.transpose()) * 0.5 + DMatrix::from_fn(n, n, |i, j| if i < j { 0.3 } else if i > j { -0.3 } else { 0.0 });
        g.bench_with_input(BenchmarkId::new("matrix_exp", n), &x, |b, x| b.iter(|| matrix_exp(black_box(x), 1.0).unwrap()));
    }
    g.finish();
}

fn orbits(c: &mut Criterion) {
    let mut g = c.benchmark_group("orbit");
    for n in [2, 3, 4, 5] {
        let v = VeroneseOrbit::new(n).unwrap();
        let rep = v.orbit.rep().clone();
        let point = v.orbit.point().clone();
        g.bench_function(BenchmarkId::new("build_orbit", n), |b| b.iter(|| build_orbit(&rep, black_box(&point)).unwrap()));
        g.bench_function(BenchmarkId::new("holonomy_algebra", n), |b| b.iter(|| holonomy_algebra(black_box(&v.orbit)).unwrap()));
    }
    g.finish();
}

fn transport(c: &mut Criterion) {
    let v = VeroneseOrbit::new(3).unwrap();
    let m = &v.orbit;
    let curve = OrbitCurve::random(m.rep(), 3, 0.3, &mut probe_rng(1));
    c.bench_function("transport/v3_h1e-3", |b| {
        b.iter(|| parallel_transport_normal(m.rep(), &curve, m.point(), m.normal().basis(), 1e-3, 0).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = kernels, orbits, transport
}
criterion_main!(benches);
