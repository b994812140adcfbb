use std::path::Path;
use std::process::{Command, Output};

use signdet::dataio::{load_pose_file, synth_corpus};
use signdet::streaming::frame_to_stream_line;
use signdet::{Detector, GlossSegments, LabeledSequence, NormalizationMode, PointSubset, SynthConfig};

fn signdet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signdet"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Small synthetic corpus with pose-body features in `corpus/features`.
fn corpus(dir: &Path) {
    ok(&signdet(
        &["synth", "--sequences", "8", "--duration", "6", "--seed", "5", "--features", "pose-body", "--out", "corpus"],
        dir,
    ));
}

fn train_small(dir: &Path, extra: &[&str], out: &str) -> String {
    let mut args = vec!["train", "--data", "corpus/features", "--epochs", "2", "--hidden", "8", "--out", out];
    args.extend_from_slice(extra);
    ok(&signdet(&args, dir))
}

#[test]
fn extract_writes_subset_width() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    for (subset, d) in [("pose-body", 25u32), ("bbox", 8), ("pose-hands", 42), ("pose-all", 137)] {
        ok(&signdet(
            &[
                "extract",
                "--poses",
                "corpus/synth0000__a.pose.json",
                "--labels",
                "corpus/synth0000__a.csv",
                "--subset",
                subset,
                "--out",
                "x.sgnf",
            ],
            dir.path(),
        ));
        let bytes = std::fs::read(dir.path().join("x.sgnf")).unwrap();
        assert_eq!(&bytes[..4], b"SGNF");
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), d);
    }
}

#[test]
fn data_errors_exit_2_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("nofps.json"), r#"{"frames":[{"people":[]}]}"#).unwrap();
    let out = signdet(&["extract", "--poses", "nofps.json", "--out", "x.sgnf"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nofps.json") && err.contains("frame rate"), "{err}");

    let bad = r#"{"fps":50,"frames":[{"people":[]},{"people":[{"pose_keypoints_2d":[1,2]}]}]}"#;
    std::fs::write(dir.path().join("bad.json"), bad).unwrap();
    let out = signdet(&["extract", "--poses", "bad.json", "--out", "x.sgnf"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("frame 1"), "{err}");

    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let out = signdet(&["train", "--data", "empty", "--out", "m.sgns"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = signdet(&["train", "--bogus-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_is_deterministic_and_linear_sizes_match() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let log = train_small(dir.path(), &["--seed", "9"], "a.sgns");
    assert!(log.contains("epoch   1") && log.contains("dev_acc"));
    train_small(dir.path(), &["--seed", "9"], "b.sgns");
    let a = std::fs::read(dir.path().join("a.sgns")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.sgns")).unwrap());

    let log = train_small(dir.path(), &["--model", "linear", "--window", "50"], "l50.sgns");
    assert!(log.contains("1250 parameters"), "{log}");

    train_small(dir.path(), &["--model", "linear", "--window", "1"], "l1.sgns");
    let inspect = ok(&signdet(&["inspect", "--model", "l1.sgns"], dir.path()));
    let rows = inspect.lines().skip_while(|l| !l.contains("landmark")).skip(1).count();
    assert_eq!(rows, 25);
    assert!(inspect.contains("right_wrist"));
}

#[test]
fn eval_report_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    train_small(dir.path(), &[], "m.sgns");
    let text = ok(&signdet(
        &["eval", "--model", "m.sgns", "--data", "corpus/features", "--report", "r.csv"],
        dir.path(),
    ));
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with("type,count,mean_s,std_s\n"));

    let det = Detector::load(dir.path().join("m.sgns")).unwrap();
    let data = signdet::dataio::load_feature_dir(dir.path().join("corpus/features")).unwrap();
    let acc = signdet::training::corpus_accuracy(&det.classifier, &data).unwrap();
    assert!(text.contains(&format!("frame accuracy {acc:.4}")), "{text}");
}

#[test]
fn stream_replay_reproduces_offline_labels() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    train_small(dir.path(), &[], "m.sgns");
    let poses = load_pose_file(dir.path().join("corpus/synth0001__b.pose.json"), None).unwrap();
    let lines: String = poses
        .frames
        .iter()
        .enumerate()
        .map(|(t, f)| frame_to_stream_line(t as u64, f) + "\n")
        .collect();
    std::fs::write(dir.path().join("in.jsonl"), lines).unwrap();
    let out = ok(&signdet(
        &["stream", "--model", "m.sgns", "--per-sequence", "--fps", "50", "--input", "in.jsonl"],
        dir.path(),
    ));
    let streamed: Vec<u8> = out
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["signing"].as_u64().unwrap() as u8)
        .collect();

    let det = Detector::load(dir.path().join("m.sgns")).unwrap();
    let gloss = GlossSegments::load(dir.path().join("corpus/synth0001__b.csv")).unwrap();
    let seq = LabeledSequence::from_poses(&poses, &gloss, PointSubset::PoseBody, NormalizationMode::PerSequence).unwrap();
    assert_eq!(streamed, det.classifier.predict_labels(seq.features.view()).unwrap());

    // trailing mode: one output line per input line, in order
    let out = ok(&signdet(&["stream", "--model", "m.sgns", "--input", "in.jsonl"], dir.path()));
    let ts: Vec<u64> = out
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["t"].as_u64().unwrap())
        .collect();
    assert_eq!(ts, (0..poses.len() as u64).collect::<Vec<_>>());
}

#[test]
fn synth_matches_library_generator() {
    let dir = tempfile::tempdir().unwrap();
    corpus(dir.path());
    let lib = synth_corpus(&SynthConfig {
        seed: 5,
        sequences: 8,
        duration_s: 6.0,
        ..SynthConfig::default()
    });
    let p = load_pose_file(dir.path().join("corpus/synth0003__b.pose.json"), None).unwrap();
    assert_eq!(p, lib[7].poses);
}

#[test]
fn bench_reports_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&signdet(
        &["bench", "--subset", "bbox", "--frames", "1000", "--reps", "3", "--csv", "b.csv"],
        dir.path(),
    ));
    assert!(out.contains("pooled"));
    let csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let out = signdet(&["bench", "--frames", "10"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
