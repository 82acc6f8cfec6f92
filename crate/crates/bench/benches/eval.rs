use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use selval::calibrate::fit_temperature;
use selval::cost::{value_at, CostSpec};
use selval::harness::{run_curve, CurveConfig, Rule};
use selval::metrics::abece;
use selval::threshold::{empirical_threshold, theoretical_threshold, SearchMode};
use selval_bench::{impulse_fixture, search_fixture};

fn bench_value_at(c: &mut Criterion) {
    let mut group = c.benchmark_group("value_at");
    for items in [1_000, 10_000, 100_000] {
        let data = impulse_fixture(items, 7);
        let spec = CostSpec::uniform(4.0);
        let policy = theoretical_threshold(&spec).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(items), &items, |b, _| {
            b.iter(|| value_at(&data, &spec, &policy).unwrap())
        });
    }
    group.finish();
}

fn bench_empirical_threshold(c: &mut Criterion) {
    let mut group = c.benchmark_group("empirical_threshold");
    for items in [1_000, 10_000] {
        let data = search_fixture(items, 11);
        let spec = CostSpec::uniform(2.0);
        group.bench_with_input(BenchmarkId::from_parameter(items), &items, |b, _| {
            b.iter(|| empirical_threshold(&data, &spec, SearchMode::Global).unwrap())
        });
    }
    group.finish();
}

fn bench_abece(c: &mut Criterion) {
    let data = impulse_fixture(2_000, 3);
    c.bench_function("abece_n20_1000samples", |b| {
        b.iter(|| abece(&data, 20, 1_000, 42).unwrap())
    });
}

fn bench_fit_temperature(c: &mut Criterion) {
    let data = search_fixture(10_000, 5);
    c.bench_function("fit_temperature_10k", |b| {
        b.iter(|| fit_temperature(&data).unwrap())
    });
}

fn bench_curve(c: &mut Criterion) {
    let tune = search_fixture(2_000, 1);
    let test = search_fixture(2_000, 2);
    let config = CurveConfig {
        rules: vec![Rule::Theoretical, Rule::EmpiricalTune],
        ..CurveConfig::default()
    };
    c.bench_function("curve_2rules_41points_2k", |b| {
        b.iter(|| run_curve(Some(&tune), &test, &config).unwrap())
    });
}

criterion_group!(
    benches,
    bench_value_at,
    bench_empirical_threshold,
    bench_abece,
    bench_fit_temperature,
    bench_curve
);
criterion_main!(benches);
