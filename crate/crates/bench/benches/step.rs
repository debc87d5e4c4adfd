use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use qzak_bench::fixture;
use qzak_core::model::energy_report;
use qzak_core::{integrate, step_reference_rk4, IntegrateOptions, SplitStepper};

fn split_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("split_step");
    for modes in [16, 32, 64, 128] {
        let (basis, params, state) = fixture(modes);
        let stepper = SplitStepper::new(&params, &basis, 1e-3).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(modes), &state, |b, s| {
            b.iter(|| stepper.step(black_box(s)).unwrap())
        });
    }
    group.finish();
}

fn rk4_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("rk4_step");
    for modes in [16, 32] {
        let (basis, params, state) = fixture(modes);
        group.bench_with_input(BenchmarkId::from_parameter(modes), &state, |b, s| {
            b.iter(|| step_reference_rk4(black_box(s), &params, &basis, 2e-6).unwrap())
        });
    }
    group.finish();
}

fn diagnostics(c: &mut Criterion) {
    let (basis, params, state) = fixture(64);
    c.bench_function("energy_report/64", |b| {
        b.iter(|| energy_report(black_box(&state), &params, &basis, None).unwrap())
    });
    let opts = IntegrateOptions {
        cadence: 10,
        semi_strong: true,
        ..Default::default()
    };
    c.bench_function("integrate_semi_strong/64/100_steps", |b| {
        b.iter(|| integrate(black_box(&state), &params, &basis, 1e-3, 0.1, opts).unwrap())
    });
}

criterion_group!(benches, split_step, rk4_step, diagnostics);
criterion_main!(benches);
