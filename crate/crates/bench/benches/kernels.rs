use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use stgibbs_bench::{hybrid, pattern};
use stgibbs_core::infer::{fit_regular, FitOptions};
use stgibbs_core::model::cond_intensity;
use stgibbs_core::simulate::run_birth_death;
use stgibbs_core::summaries::estimate_gpcf_with;
use stgibbs_core::{Bandwidths, MhConfig, RngStream, StPoint, StWindow, TrendModel};

fn bench_cond_intensity(c: &mut Criterion) {
    let mut group = c.benchmark_group("cond_intensity");
    for rate in [70.0, 280.0] {
        let model = hybrid(rate);
        let p = pattern(rate, 1);
        let u = StPoint::new(0.5, 0.5, 0.5);
        group.bench_with_input(BenchmarkId::from_parameter(p.len()), &p, |b, p| {
            b.iter(|| cond_intensity(&model, &u, p.points()).unwrap())
        });
    }
    group.finish();
}

fn bench_birth_death(c: &mut Criterion) {
    let model = hybrid(70.0);
    let w = StWindow::unit_cube();
    let cfg = MhConfig::new(20_000, 1_000, 3).unwrap();
    c.bench_function("birth_death/20k_steps", |b| {
        b.iter(|| run_birth_death(&model, &w, &cfg, &mut RngStream::new(3)).unwrap())
    });
}

fn bench_gpcf(c: &mut Criterion) {
    let grid: Vec<f64> = (0..9).map(|k| 0.05 + 0.025 * k as f64).collect();
    let mut group = c.benchmark_group("gpcf_9x9");
    for rate in [70.0, 280.0] {
        let p = pattern(rate, 2);
        let lam = vec![p.mean_intensity(); p.len()];
        let bw = Bandwidths::silverman(&p, 0.25, 0.25).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(p.len()), &p, |b, p| {
            b.iter(|| estimate_gpcf_with(p, &lam, &grid, &grid, bw).unwrap())
        });
    }
    group.finish();
}

fn bench_fit(c: &mut Criterion) {
    let structure = hybrid(70.0)
        .with_regular(TrendModel::homogeneous(1.0), &[1.0, 1.0])
        .unwrap();
    let p = pattern(70.0, 4);
    c.bench_function("fit_regular/hybrid", |b| {
        b.iter(|| fit_regular(&p, &structure, &FitOptions::new(5)).unwrap())
    });
}

criterion_group!(benches, bench_cond_intensity, bench_birth_death, bench_gpcf, bench_fit);
criterion_main!(benches);
