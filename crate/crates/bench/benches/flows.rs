use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use specflow_bench::random_signal;
use specflow_core::equivalence::taut_string_prox;
use specflow_core::extinction::dual_norm;
use specflow_core::flow::{run_event_driven, FlowOptions};
use specflow_core::functionals::{grid_divergence, tv1d, GridSpec};
use specflow_core::minsub::{min_norm_subgradient, MinSubOptions};
use specflow_core::spectral::{band_filter, spectral_measure};

fn bench_event_flow(c: &mut Criterion) {
    let functional = tv1d(256).unwrap();
    let sig = random_signal(256, 1);
    c.bench_function("event_flow_tv1d_256", |b| {
        b.iter(|| {
            let traj = run_event_driven(&functional, black_box(&sig), &FlowOptions::default()).unwrap();
            black_box(traj.segments())
        })
    });

    let grid = grid_divergence(GridSpec::new(6, 6).unwrap()).unwrap();
    let field = random_signal(72, 2);
    c.bench_function("event_flow_grid_6x6", |b| {
        b.iter(|| {
            let traj = run_event_driven(&grid, black_box(&field), &FlowOptions::default()).unwrap();
            black_box(traj.segments())
        })
    });
}

fn bench_taut_string(c: &mut Criterion) {
    let sig = random_signal(4096, 3);
    c.bench_function("taut_string_4096", |b| {
        b.iter(|| black_box(taut_string_prox(black_box(sig.values()), 0.5)))
    });
}

fn bench_min_norm_subgradient(c: &mut Criterion) {
    let functional = tv1d(128).unwrap();
    let sig = random_signal(128, 4);
    let opts = MinSubOptions::default();
    c.bench_function("min_norm_subgradient_tv1d_128", |b| {
        b.iter(|| black_box(min_norm_subgradient(&functional, black_box(sig.values()), &opts).unwrap()))
    });
}

fn bench_spectral_pipeline(c: &mut Criterion) {
    let functional = tv1d(128).unwrap();
    let sig = random_signal(128, 5);
    let traj = run_event_driven(&functional, &sig, &FlowOptions::default()).unwrap();
    c.bench_function("spectral_measure_and_filter_128", |b| {
        b.iter(|| {
            let m = spectral_measure(black_box(&traj)).unwrap();
            black_box(band_filter(&m, 0.1, 1.0))
        })
    });
}

fn bench_dual_norm(c: &mut Criterion) {
    let functional = tv1d(64).unwrap();
    let sig = random_signal(64, 6);
    c.bench_function("dual_norm_tv1d_64", |b| {
        b.iter(|| black_box(dual_norm(&functional, black_box(sig.values()), None).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_event_flow,
    bench_taut_string,
    bench_min_norm_subgradient,
    bench_spectral_pipeline,
    bench_dual_norm
);
criterion_main!(benches);
