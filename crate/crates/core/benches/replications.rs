use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use tts_ac::estimator::q_sample;
use tts_ac::experiments::{run_replications_on, ExperimentSpec, ExponentPair};
use tts_ac::par::{map_indexed, Execution};
use tts_ac::rng::stream;
use tts_ac::{fixtures, Algorithm, TabularPolicy};

fn replications(c: &mut Criterion) {
    let mdp = fixtures::grid4();
    let spec = ExperimentSpec::new(
        "grid4.json",
        Algorithm::Ac,
        vec![ExponentPair { sigma: 0.6, nu: 0.4 }],
        vec![1e-2],
        5_000,
        8,
        0,
    );
    let mut group = c.benchmark_group("replications");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::new(name, 8), &exec, |b, &exec| {
            b.iter(|| run_replications_on(&mdp, &spec, exec).unwrap())
        });
    }
    group.finish();
}

fn q_sampling(c: &mut Criterion) {
    let mdp = fixtures::grid4();
    let policy = TabularPolicy::uniform(mdp.n_states(), mdp.n_actions());
    let mut group = c.benchmark_group("q_sample_batches");
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_with_input(BenchmarkId::new(name, 64), &exec, |b, &exec| {
            b.iter(|| {
                map_indexed(64, exec, |i| {
                    let mut rng = stream(7, i as u64);
                    (0..2_000)
                        .map(|_| q_sample(&mdp, &policy, 0, 0, &mut rng).unwrap().q_hat)
                        .sum::<f64>()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, replications, q_sampling);
criterion_main!(benches);
