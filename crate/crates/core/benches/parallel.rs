use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use entropy_uq::dataset::synthetic_blobs;
use entropy_uq::models::{accuracy, Architecture, Model};
use entropy_uq::perturbation::{run_perturbed_pass, PassConfig, PerturbMode};
use entropy_uq::rng::RngStream;
use entropy_uq::Exec;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench(c: &mut Criterion) {
    let root = RngStream::new(1);
    let data = synthetic_blobs(10, 784, 100, 4.0, &root.child(0)).unwrap();
    let linear = Model::init(Architecture::linear(784, 10), &root.child(1)).unwrap();
    let mlp = Model::init(Architecture::mlp(784, 128, 10), &root.child(2)).unwrap();
    let batch: Vec<usize> = (0..256).collect();

    let mut g = c.benchmark_group("perturbed_pass");
    g.sample_size(10);
    for mode in PerturbMode::ALL {
        for (name, exec) in POLICIES {
            let cfg = PassConfig { exec, ..PassConfig::new(0.5, mode, 10) };
            g.bench_with_input(BenchmarkId::new(name, mode), &cfg, |b, cfg| {
                b.iter(|| run_perturbed_pass(&linear, &data, cfg, &root).unwrap())
            });
        }
    }
    g.finish();

    let mut g = c.benchmark_group("mlp_gradients");
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| mlp.gradients(&data, black_box(&batch), exec).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("mlp_accuracy");
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| accuracy(&mlp, &data, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
