use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use signdet::pose_features::extract_features;
use signdet::streaming::{random_frames, EngineConfig, EngineSession};
use signdet::{Classifier, LinearClassifier, LstmClassifier, PointSubset, PoseSequence, SourceId};

fn lstm(subset: PointSubset) -> LstmClassifier {
    LstmClassifier::random(subset.dim(), 64, &mut ChaCha8Rng::seed_from_u64(1))
}

fn lstm_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("lstm_step");
    for subset in PointSubset::ALL {
        let model = lstm(subset);
        let x = vec![0.3; subset.dim()];
        let mut state = model.initial_state();
        group.bench_function(BenchmarkId::from_parameter(subset), |b| {
            b.iter(|| model.step_in_place(&mut state, black_box(&x)).unwrap())
        });
    }
    group.finish();
}

fn engine_step(c: &mut Criterion) {
    let frames = random_frames(1000, 3);
    let mut group = c.benchmark_group("engine_step");
    for subset in PointSubset::ALL {
        let model = Classifier::Lstm(lstm(subset));
        let mut session = EngineSession::new(&model, EngineConfig::trailing(subset, 50.0, 50)).unwrap();
        let mut i = 0;
        group.bench_function(BenchmarkId::new("lstm", subset), |b| {
            b.iter(|| {
                i = (i + 1) % frames.len();
                session.step(black_box(&frames[i])).unwrap()
            })
        });
    }
    for w in [1, 25, 50] {
        let model = Classifier::Linear(LinearClassifier::zeros(w, 25));
        let mut session =
            EngineSession::new(&model, EngineConfig::trailing(PointSubset::PoseBody, 50.0, 50)).unwrap();
        let mut i = 0;
        group.bench_function(BenchmarkId::new("linear", w), |b| {
            b.iter(|| {
                i = (i + 1) % frames.len();
                session.step(black_box(&frames[i])).unwrap()
            })
        });
    }
    group.finish();
}

fn features(c: &mut Criterion) {
    let seq = PoseSequence::new(random_frames(1000, 4), 50.0, SourceId::new("bench", "a")).unwrap();
    let mut group = c.benchmark_group("extract_features");
    group.throughput(Throughput::Elements(seq.len() as u64));
    for subset in PointSubset::ALL {
        group.bench_function(BenchmarkId::from_parameter(subset), |b| {
            b.iter(|| extract_features(black_box(&seq), subset).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, lstm_step, engine_step, features);
criterion_main!(benches);
