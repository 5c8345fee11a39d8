use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dagrta::gen::{generate_taskset, GenParams};
use dagrta::graph::timing_profile;
use dagrta::rta::{analyze, AnalysisConfig, Method};
use dagrta::sim::{simulate, Scenario};
use dagrta::workload::{RequestBounds, WorkloadContext};
use dagrta::{TaskSet, Time};

fn task_set(cores: usize, seed: u64) -> TaskSet {
    let params = GenParams { n_tasks: cores + 2, cores, utilization: 0.5 * cores as f64, seed, ..GenParams::default() };
    generate_taskset(&params).expect("benchmark parameters are feasible")
}

fn workload(c: &mut Criterion) {
    let set = task_set(4, 1);
    let task = set.task(0);
    let profile = timing_profile(task, 4);
    let ctx = WorkloadContext::new(task, &profile, profile.r_isolated.clone()).unwrap();
    let delta = task.period() * &Time::new(7, 3);
    c.bench_function("window_max/carry_in", |b| b.iter(|| ctx.window_max(black_box(&delta))));
    let nc = ctx.no_carry_in();
    c.bench_function("window_max/no_carry_in", |b| b.iter(|| nc.window_max(black_box(&delta))));
}

fn analysis(c: &mut Criterion) {
    let mut group = c.benchmark_group("analyze");
    for cores in [2, 4, 8] {
        let set = task_set(cores, 7);
        for method in [Method::Basic, Method::LimitedCarryIn] {
            let config = AnalysisConfig::with_method(method);
            group.bench_with_input(BenchmarkId::new(method.name(), cores), &set, |b, set| {
                b.iter(|| analyze(black_box(set), &config).unwrap())
            });
        }
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let set = task_set(4, 3);
    let horizon = set.tasks().iter().map(|t| t.period().clone()).max().unwrap() * Time::from(2usize);
    let synchronous = Scenario::synchronous(horizon.clone());
    let sporadic = Scenario::sporadic(5, horizon).with_random_costs(5);
    c.bench_function("simulate/synchronous", |b| b.iter(|| simulate(black_box(&set), &synchronous).unwrap()));
    c.bench_function("simulate/sporadic_random", |b| b.iter(|| simulate(black_box(&set), &sporadic).unwrap()));
}

criterion_group!(benches, workload, analysis, simulation);
criterion_main!(benches);
