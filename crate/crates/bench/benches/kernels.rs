use criterion::{criterion_group, criterion_main, Criterion};
use leafsim_bench::{linear_model, shipped};
use leafsim_core::brownian::sample_path;
use leafsim_core::integrate::flow;
use leafsim_core::projection::{IftConfig, ProjectionFrame};
use leafsim_core::{Complex64, SamplerConfig};
use std::hint::black_box;

fn bench_flow(c: &mut Criterion) {
    let (f, p) = shipped("p2_degree2");
    let zeta = Complex64::new(0.1, 0.05);
    c.bench_function("flow/p2_degree2", |b| b.iter(|| flow(&f, black_box(&p), zeta, 1e-11).unwrap()));
    let (f, p) = shipped("p3_degree2");
    c.bench_function("flow/p3_degree2", |b| b.iter(|| flow(&f, black_box(&p), zeta, 1e-11).unwrap()));
}

fn bench_sample_path(c: &mut Criterion) {
    let (f, p) = shipped("p3_degree2");
    let cfg = SamplerConfig { h: 0.01, horizon: 1.0, ..Default::default() };
    let mut stream = 0;
    c.bench_function("sample_path/p3_degree2_100_steps", |b| {
        b.iter(|| {
            stream += 1;
            sample_path(&f, black_box(&p), &cfg, stream).unwrap()
        })
    });
}

fn bench_solve_xi(c: &mut Criterion) {
    let ift = IftConfig::default();
    let (f, p) = linear_model();
    let frame = ProjectionFrame::new(&f, &p).unwrap();
    let (t, u, zeta) = (Complex64::new(0.05, 0.02), Complex64::new(0.03, 0.0), Complex64::new(0.1, -0.05));
    c.bench_function("solve_xi/linear_model", |b| b.iter(|| frame.solve_xi(black_box(t), u, zeta, &ift).unwrap()));
    let (f, p) = shipped("p2_degree2");
    let frame = ProjectionFrame::new(&f, &p).unwrap();
    let t = Complex64::new(0.01, 0.005);
    c.bench_function("solve_xi/p2_degree2", |b| b.iter(|| frame.solve_xi(black_box(t), Complex64::new(0.0, 0.0), zeta, &ift).unwrap()));
}

criterion_group!(benches, bench_flow, bench_sample_path, bench_solve_xi);
criterion_main!(benches);
