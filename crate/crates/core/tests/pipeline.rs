//! End-to-end: synthetic poses on disk -> features -> training -> model
//! file -> evaluation and streaming.

use signdet::dataio::{load_feature_dir, load_pose_file, save_pose_file, synth_corpus, PoseFileHeader};
use signdet::evaluation::{classify_errors, error_report, frame_accuracy};
use signdet::streaming::{EngineConfig, EngineSession};
use signdet::training::{corpus_accuracy, split_corpus, train};
use signdet::{Classifier, Detector, GlossSegments, LabeledSequence, NormalizationMode, PointSubset, SynthConfig, TrainConfig};

#[test]
fn disk_round_trip_train_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let synth = synth_corpus(&SynthConfig {
        seed: 3,
        sequences: 12,
        duration_s: 10.0,
        ..SynthConfig::default()
    });

    let feat_dir = dir.path().join("features");
    std::fs::create_dir(&feat_dir).unwrap();
    for s in &synth {
        let stem = s.poses.source.file_stem();
        let pose_path = dir.path().join(format!("{stem}.pose.json"));
        save_pose_file(&s.poses, &PoseFileHeader::default(), &pose_path).unwrap();
        s.gloss.save(dir.path().join(format!("{stem}.csv"))).unwrap();

        let poses = load_pose_file(&pose_path, None).unwrap();
        assert_eq!(poses, s.poses);
        let gloss = GlossSegments::load(dir.path().join(format!("{stem}.csv"))).unwrap();
        let seq =
            LabeledSequence::from_poses(&poses, &gloss, PointSubset::PoseBody, NormalizationMode::PerSequence).unwrap();
        assert_eq!(seq.labels, s.labels);
        seq.save(feat_dir.join(format!("{stem}.sgnf"))).unwrap();
    }

    let corpus = load_feature_dir(&feat_dir).unwrap();
    assert_eq!(corpus.len(), synth.len());
    let split = split_corpus(corpus);
    assert_eq!(split.train.len() + split.dev.len() + split.test.len(), synth.len());

    let cfg = TrainConfig {
        epochs: 3,
        hidden_dim: 16,
        ..TrainConfig::default()
    };
    let outcome = train(&split.train, &split.dev, &cfg).unwrap();
    let det = Detector::new(Classifier::Lstm(outcome.model), PointSubset::PoseBody, NormalizationMode::PerSequence);
    let model_path = dir.path().join("m.sgns");
    det.save(&model_path).unwrap();
    let det = Detector::load(&model_path).unwrap();

    // pooled accuracy equals the per-sequence recomputation
    let acc = corpus_accuracy(&det.classifier, &split.test).unwrap();
    let (mut ok, mut total) = (0.0, 0.0);
    for s in &split.test {
        let pred = det.classifier.predict_labels(s.features.view()).unwrap();
        ok += frame_accuracy(&pred, &s.labels).unwrap() * s.len() as f64;
        total += s.len() as f64;
        let events = classify_errors(&s.labels, &pred, s.fps).unwrap();
        let mismatches = pred.iter().zip(&s.labels).filter(|(a, b)| a != b).count();
        assert_eq!(events.iter().map(|e| e.span.len()).sum::<usize>(), mismatches);
        assert_eq!(error_report(&events).total(), events.len());
    }
    assert!((acc - ok / total).abs() < 1e-12);

    // streaming replay of a stored pose file reproduces the stored features'
    // predictions
    let s = &synth[0];
    let seq = LabeledSequence::load(feat_dir.join(format!("{}.sgnf", s.poses.source.file_stem()))).unwrap();
    let offline = det.classifier.predict_labels(seq.features.view()).unwrap();
    let cfg = EngineConfig::for_sequence(det.subset, &s.poses, NormalizationMode::PerSequence).unwrap();
    let mut session = EngineSession::new(&det.classifier, cfg).unwrap();
    let streamed: Vec<u8> = s.poses.frames.iter().map(|f| session.step(f).unwrap().label).collect();
    // features on disk are f32, so allow the odd flip right at the boundary
    let agree = streamed.iter().zip(&offline).filter(|(a, b)| a == b).count();
    assert!(agree as f64 >= 0.99 * offline.len() as f64);
}
