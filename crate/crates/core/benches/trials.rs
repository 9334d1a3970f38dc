//! Sequential vs thread-pool execution of the same small sweep.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ghz_router::harness::{run_experiment, ExperimentConfig};
use ghz_router::parallel::Execution;

fn sweep(c: &mut Criterion) {
    let mut config = ExperimentConfig::default();
    config.set("m", "1,4,inf").unwrap();
    config.set("trials", "16").unwrap();
    config.set("slots", "500").unwrap();

    let mut group = c.benchmark_group("sweep_grid10");
    group.sample_size(10);
    for execution in [Execution::Sequential, Execution::Parallel] {
        config.execution = execution;
        group.bench_with_input(BenchmarkId::from_parameter(format!("{execution:?}")), &config, |b, cfg| {
            b.iter(|| run_experiment(cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
