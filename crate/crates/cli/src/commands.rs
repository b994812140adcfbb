use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use signdet::dataio::{load_feature_dir, load_pose_file, save_pose_file, synth_corpus, PoseFileHeader};
use signdet::evaluation::{classify_errors, error_report, extract_spans, frame_accuracy, DurationStats};
use signdet::models::DEFAULT_HIDDEN;
use signdet::streaming::{self, format_stream_line, parse_stream_line, EngineConfig, EngineNormalization, EngineSession};
use signdet::training::{corpus_accuracy, split_corpus, train_linear, EpochRecord};
use signdet::{
    Classifier, Detector, GlossSegments, LabeledSequence, LstmClassifier, PointSubset, PoseFrame, PoseSequence,
    SourceId, SynthConfig, TrainConfig,
};

use crate::{
    BenchArgs, EvalArgs, ExtractArgs, InspectArgs, ModelKind, SplitChoice, StreamArgs, SynthArgs, TrainArgs,
    UsageError,
};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn signing_fraction(labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().map(|&l| l as f64).sum::<f64>() / labels.len() as f64
}

fn extract_one(poses: &PoseSequence, gloss: &GlossSegments, args: &ExtractArgs, out: &Path) -> Result<()> {
    let seq = LabeledSequence::from_poses(poses, gloss, args.subset, args.normalization)
        .with_context(|| format!("extracting features for {}", poses.source))?;
    seq.save(out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{}: {} frames x {} features, {:.1}% signing",
        out.display(),
        seq.len(),
        seq.dim(),
        100.0 * signing_fraction(&seq.labels)
    );
    Ok(())
}

pub fn extract(args: ExtractArgs) -> Result<()> {
    if let Some(dir) = &args.corpus {
        fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
        let mut pose_files: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_string_lossy().ends_with(".pose.json"))
            .collect();
        pose_files.sort();
        if pose_files.is_empty() {
            return Err(usage(format!("no *.pose.json files in {}", dir.display())));
        }
        for p in &pose_files {
            let stem = p.to_string_lossy().trim_end_matches(".pose.json").to_string();
            let poses = load_pose_file(p, args.fps).with_context(|| format!("reading {}", p.display()))?;
            let gloss_path = format!("{stem}.csv");
            let gloss = GlossSegments::load(&gloss_path).with_context(|| format!("reading {gloss_path}"))?;
            let out = args.out.join(format!("{}.sgnf", poses.source.file_stem()));
            extract_one(&poses, &gloss, &args, &out)?;
        }
        return Ok(());
    }
    let path = args.poses.as_ref().expect("clap requires --poses or --corpus");
    let poses = load_pose_file(path, args.fps).with_context(|| format!("reading {}", path.display()))?;
    let gloss = match &args.labels {
        Some(p) => GlossSegments::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => GlossSegments::default(),
    };
    extract_one(&poses, &gloss, &args, &args.out)
}

fn load_corpus(dir: &Path) -> Result<Vec<LabeledSequence>> {
    let corpus = load_feature_dir(dir).with_context(|| format!("loading features from {}", dir.display()))?;
    if corpus.is_empty() {
        return Err(anyhow::Error::new(signdet::Error::EmptyCorpus).context(format!("no *.sgnf files in {}", dir.display())));
    }
    Ok(corpus)
}

fn print_history(history: &[EpochRecord]) {
    for r in history {
        println!("{r}");
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let corpus = load_corpus(&args.data)?;
    let dim = corpus[0].dim();
    let subset = match args.subset {
        Some(s) => s,
        None => PointSubset::from_dim(dim)
            .ok_or_else(|| usage(format!("feature width {dim} matches no point subset; pass --subset")))?,
    };
    let split = split_corpus(corpus);
    println!(
        "split: {} train / {} dev / {} test sequences",
        split.train.len(),
        split.dev.len(),
        split.test.len()
    );
    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        chunk_len: args.chunk,
        patience: args.patience,
        seed: args.seed,
        subset,
        hidden_dim: args.hidden,
    };
    let (classifier, best_epoch, dev_acc) = match args.model {
        ModelKind::Lstm => {
            let o = signdet::training::train(&split.train, &split.dev, &cfg)?;
            print_history(&o.history);
            let acc = o.best_dev_accuracy();
            (Classifier::Lstm(o.model), o.best_epoch, acc)
        }
        ModelKind::Linear => {
            if subset != PointSubset::PoseBody {
                return Err(usage("linear models use the 25 pose-body points; pass pose-body features"));
            }
            let o = train_linear(&split.train, &split.dev, args.window, &cfg)?;
            print_history(&o.history);
            let acc = o.best_dev_accuracy();
            (Classifier::Linear(o.model), o.best_epoch, acc)
        }
    };
    println!("best epoch {best_epoch}: dev_acc {dev_acc:.4}");
    if !split.test.is_empty() {
        println!("test_acc {:.4}", corpus_accuracy(&classifier, &split.test)?);
    }
    let detector = Detector::new(classifier, subset, args.normalization);
    detector
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} ({}, {} parameters)",
        args.out.display(),
        detector.classifier.kind_name(),
        detector.classifier.param_count()
    );
    Ok(())
}

fn load_detector(path: &Path) -> Result<Detector> {
    Detector::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn fmt_stats(name: &str, s: &DurationStats) -> String {
    let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}s"));
    format!("{name}: {} spans, mean {}, std {}", s.count, f(s.mean_s), f(s.std_s))
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let detector = load_detector(&args.model)?;
    let corpus = load_corpus(&args.data)?;
    let data = match args.split {
        SplitChoice::All => corpus,
        part => {
            let s = split_corpus(corpus);
            match part {
                SplitChoice::Train => s.train,
                SplitChoice::Dev => s.dev,
                _ => s.test,
            }
        }
    };
    if data.is_empty() {
        return Err(usage("the selected split holds no sequences"));
    }
    let mut preds = Vec::with_capacity(data.len());
    let mut events = Vec::new();
    for s in &data {
        let pred = detector
            .classifier
            .predict_labels(s.features.view())
            .with_context(|| format!("classifying {}", s.source))?;
        events.extend(classify_errors(&s.labels, &pred, s.fps)?);
        preds.push(pred);
    }
    let gold_all: Vec<u8> = data.iter().flat_map(|s| s.labels.iter().copied()).collect();
    let pred_all: Vec<u8> = preds.iter().flatten().copied().collect();
    let acc = frame_accuracy(&pred_all, &gold_all)?;
    println!("{} sequences, {} frames", data.len(), gold_all.len());
    println!("frame accuracy {acc:.4}");

    // span statistics pooled over sequences
    let pooled = |labels: &mut dyn Iterator<Item = (&[u8], f64)>, value: u8| -> DurationStats {
        let d: Vec<f64> = labels
            .flat_map(|(l, fps)| {
                extract_spans(l)
                    .into_iter()
                    .filter(|sp| sp.label == value)
                    .map(move |sp| sp.len() as f64 / fps)
            })
            .collect();
        DurationStats::from_durations(&d)
    };
    for (name, value) in [("signing", 1u8), ("not-signing", 0)] {
        let mut gold = data.iter().map(|s| (s.labels.as_slice(), s.fps));
        println!("{}", fmt_stats(&format!("gold {name}"), &pooled(&mut gold, value)));
        let mut pred = preds.iter().zip(&data).map(|(p, s)| (p.as_slice(), s.fps));
        println!("{}", fmt_stats(&format!("predicted {name}"), &pooled(&mut pred, value)));
    }
    println!();
    let report = error_report(&events);
    print!("{report}");
    if let Some(p) = &args.report {
        fs::write(p, report.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let (classifier, subset) = match &args.model {
        Some(p) => {
            let d = load_detector(p)?;
            (d.classifier, d.subset)
        }
        None => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
            let m = LstmClassifier::random(args.subset.dim(), DEFAULT_HIDDEN, &mut rng);
            (Classifier::Lstm(m), args.subset)
        }
    };
    let report = streaming::bench(&classifier, subset, args.frames, args.reps)?;
    print!("{}", report.to_text());
    println!();
    print!("{}", report.to_csv());
    if let Some(p) = &args.csv {
        fs::write(p, report.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn read_frames(input: Box<dyn BufRead>) -> impl Iterator<Item = Result<(u64, PoseFrame)>> {
    input.lines().enumerate().filter_map(|(n, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => return Some(Err(e.into())),
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(parse_stream_line(&line).with_context(|| format!("input line {}", n + 1)))
    })
}

pub fn stream(args: StreamArgs) -> Result<()> {
    let detector = load_detector(&args.model)?;
    let input: Box<dyn BufRead> = match &args.input {
        Some(p) => Box::new(BufReader::new(
            fs::File::open(p).with_context(|| format!("opening {}", p.display()))?,
        )),
        None => Box::new(BufReader::new(io::stdin())),
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    if args.per_sequence {
        let frames: Vec<(u64, PoseFrame)> = read_frames(input).collect::<Result<_>>()?;
        if frames.is_empty() {
            return Ok(());
        }
        let seq = PoseSequence::new(
            frames.iter().map(|(_, f)| f.clone()).collect(),
            args.fps,
            SourceId::new("stdin", ""),
        )?;
        let cfg = EngineConfig::for_sequence(detector.subset, &seq, signdet::NormalizationMode::PerSequence)?;
        let mut session = EngineSession::new(&detector.classifier, cfg)?;
        for (t, f) in &frames {
            let o = session.step(f)?;
            writeln!(out, "{}", format_stream_line(*t, &o))?;
        }
        return Ok(());
    }
    let cfg = EngineConfig {
        subset: detector.subset,
        fps: args.fps,
        normalization: EngineNormalization::TrailingWindow(args.window),
    };
    let mut session = EngineSession::new(&detector.classifier, cfg)?;
    for frame in read_frames(input) {
        let (t, f) = frame?;
        let o = session.step(&f)?;
        writeln!(out, "{}", format_stream_line(t, &o))?;
        out.flush()?;
    }
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    if !(args.fps.is_finite() && args.fps > 0.0 && args.duration.is_finite() && args.duration > 0.0) {
        return Err(usage("--fps and --duration must be positive"));
    }
    let cfg = SynthConfig {
        seed: args.seed,
        sequences: args.sequences,
        duration_s: args.duration,
        fps: args.fps,
        ..SynthConfig::default()
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let feature_dir = args.out.join("features");
    if args.features.is_some() {
        fs::create_dir_all(&feature_dir)?;
    }
    let corpus = synth_corpus(&cfg);
    let mut frames = 0;
    for s in &corpus {
        let stem = s.poses.source.file_stem();
        save_pose_file(&s.poses, &PoseFileHeader::default(), args.out.join(format!("{stem}.pose.json")))?;
        s.gloss.save(args.out.join(format!("{stem}.csv")))?;
        if let Some(subset) = args.features {
            let seq = LabeledSequence::from_poses(&s.poses, &s.gloss, subset, signdet::NormalizationMode::PerSequence)?;
            seq.save(feature_dir.join(format!("{stem}.sgnf")))?;
        }
        frames += s.poses.len();
    }
    let signing: usize = corpus.iter().map(|s| s.labels.iter().filter(|&&l| l == 1).count()).sum();
    println!(
        "wrote {} sequences ({} frames, {:.1}% signing) to {}",
        corpus.len(),
        frames,
        100.0 * signing as f64 / frames.max(1) as f64,
        args.out.display()
    );
    Ok(())
}

pub fn inspect(args: InspectArgs) -> Result<()> {
    let d = load_detector(&args.model)?;
    println!("model          {}", d.classifier.kind_name());
    println!("subset         {} ({} points)", d.subset, d.subset.dim());
    println!("normalization  {}", d.normalization);
    println!("parameters     {}", d.classifier.param_count());
    let (label, weights): (&str, Vec<f64>) = match &d.classifier {
        Classifier::Linear(m) => ("|coefficient|", m.landmark_importance()),
        Classifier::Lstm(m) => {
            let (dim, w) = (m.input_dim(), m.w_ih());
            let norms = (0..dim)
                .map(|p| w.iter().skip(p).step_by(dim).map(|v| v * v).sum::<f64>().sqrt())
                .collect();
            ("input weight norm", norms)
        }
    };
    let names = d.subset.point_names();
    let mut rows: Vec<(usize, f64)> = weights.into_iter().enumerate().collect();
    if let Some(n) = args.top {
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        rows.truncate(n);
    }
    println!();
    println!("{:>4}  {:<24}{:>18}", "idx", "landmark", label);
    for (i, w) in rows {
        println!("{i:>4}  {:<24}{w:>18.6}", names[i]);
    }
    Ok(())
}
