use criterion::{criterion_group, criterion_main, Criterion};
use rough_scl::exec::Exec;
use rough_scl::harness::suite::sweep_config;
use rough_scl::harness::{run_experiment, ExperimentConfig};

fn seed_sweep(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        seeds: 8,
        n_cells: 200,
        n_outputs: 5,
        ..sweep_config("solve")
    };
    let mut group = c.benchmark_group("solve sweep, 8 seeds");
    group.sample_size(10);
    for (label, exec) in [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)] {
        group.bench_function(label, |b| b.iter(|| run_experiment(&cfg, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, seed_sweep);
criterion_main!(benches);
