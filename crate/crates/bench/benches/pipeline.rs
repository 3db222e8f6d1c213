use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

use somdagmm::compression::{AutoencoderConfig, CompressionNet, ReconstructionMode};
use somdagmm::estimation::{EstimationConfig, EstimationNet};
use somdagmm::numeric::{Matrix, Tape};
use somdagmm::som::{train_som, SomConfig};
use somdagmm::synth::far_anomalies;
use somdagmm::trainer::{record_objective, train, ModelConfig, TrainConfig};

const DIM: usize = 122;

/// Rows squashed into [0, 1] like preprocessed features.
fn rows(n: usize, seed: u64) -> Matrix {
    far_anomalies(n, 0.1, DIM, 6.0, seed)
        .0
        .map(|v| 0.5 + 0.5 * (v / 4.0).tanh())
}

fn som_training(c: &mut Criterion) {
    let data = rows(2000, 1);
    let cfg = SomConfig {
        iterations: Some(20_000),
        ..SomConfig::default()
    };
    let mut group = c.benchmark_group("som");
    group.sample_size(10);
    group.throughput(Throughput::Elements(20_000));
    group.bench_function("train 10x10, 20k steps", |b| b.iter(|| train_som(&data, &cfg).unwrap()));
    group.finish();
}

fn objective_step(c: &mut Criterion) {
    let x = rows(1024, 2);
    let som = train_som(
        &x,
        &SomConfig {
            iterations: Some(5000),
            ..SomConfig::default()
        },
    )
    .unwrap();
    let z_s = som.encode_batch(&x).unwrap();
    let comp = CompressionNet::new(&AutoencoderConfig::for_input(DIM)).unwrap();
    let est = EstimationNet::new(&EstimationConfig::default(), 5).unwrap();
    let cfg = TrainConfig::default();
    let mut group = c.benchmark_group("objective");
    group.throughput(Throughput::Elements(1024));
    group.bench_function("forward+backward, batch 1024", |b| {
        b.iter_batched(
            Tape::new,
            |mut tape| {
                let cv = comp.register(&mut tape);
                let ev = est.register(&mut tape);
                let o =
                    record_objective(&mut tape, &cv, &ev, &x, Some(&z_s), ReconstructionMode::Both, &[], &cfg).unwrap();
                tape.backward(o.total).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn energy_scoring(c: &mut Criterion) {
    let x = rows(4096, 3);
    let mut model = ModelConfig::for_input(DIM);
    model.som.iterations = Some(5000);
    let trained = train(
        &x,
        &model,
        &TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let mut group = c.benchmark_group("scoring");
    group.throughput(Throughput::Elements(x.rows() as u64));
    group.bench_function("score_batch 4096 rows", |b| b.iter(|| trained.score_batch(&x).unwrap()));
    group.finish();
}

criterion_group!(benches, som_training, objective_step, energy_scoring);
criterion_main!(benches);
