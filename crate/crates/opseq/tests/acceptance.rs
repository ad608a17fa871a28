//! End-to-end acceptance suite. Each test prints one pass/fail line; run
//! with `cargo test --test acceptance -- --nocapture` to see them.

use std::fs;
use std::path::Path;
use std::time::Instant;

use opseq::commands::{
    cmd_ingest, cmd_pipeline, cmd_sweep_ngram, cmd_synth, RunConfig, RUN_FORMAT_VERSION,
};
use opseq::eval::report::EvalReport;
use opseq::eval::{aggregate_runs, anova_oneway, confusion, incomplete_beta, metrics};
use opseq::features::{
    assemble_input, bow_vector, build_vocabulary, concat_x, onehot_vector, read_feature_file,
    read_vocabulary, tfidf_vector, write_feature_file, write_vocabulary, FeatureKind,
    FeatureVector, Standardizer,
};
use opseq::ngram::{count_grams, extract_ngrams, NGram};
use opseq::nn::checkpoint::{read_checkpoint, write_checkpoint};
use opseq::nn::gradcheck::{run_all, REL_TOLERANCE};
use opseq::nn::tensor::Tensor;
use opseq::nn::train::{train, Sample};
use opseq::nn::ModelConfig;
use opseq::rng::CounterRng;
use opseq::trace::{FamilyLabel, Token, TraceDocument};

fn pass(line: &str) {
    println!("[PASS] {line}");
}

// ---------------------------------------------------------------------
// Criterion 1: gradient checks, every layer plus the composed network,
// max relative error < 1e-5 at f64, finishing within 60 s single-threaded.
// ---------------------------------------------------------------------
#[test]
fn criterion_1_gradient_checks() {
    let started = Instant::now();
    let reports = run_all(1234);
    let elapsed = started.elapsed();
    let expected = [
        "conv2d",
        "elu",
        "maxpool",
        "flatten",
        "dense",
        "lstm_cell_bptt",
        "lstm_stack",
        "softmax_cross_entropy",
        "composed_cnn_lstm",
    ];
    assert_eq!(
        reports.iter().map(|r| r.layer.as_str()).collect::<Vec<_>>(),
        expected
    );
    for report in &reports {
        assert!(
            report.pass() && report.max_rel_err < REL_TOLERANCE,
            "{} relative error {}",
            report.layer,
            report.max_rel_err
        );
    }
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "gradient checks took {elapsed:?}"
    );
    pass(&format!(
        "criterion 1: all {} gradient checks < 1e-5 in {:.1?}",
        reports.len(),
        elapsed
    ));
}

// ---------------------------------------------------------------------
// Criterion 2: TF-IDF / BoW / one-hot equal an independent brute-force
// reimplementation to 1e-12 relative on 20 random corpora; idf(df=N) = 0.
// ---------------------------------------------------------------------

fn random_docs(rng: &CounterRng, base: u64, num_docs: usize, alphabet: usize) -> Vec<TraceDocument> {
    (0..num_docs)
        .map(|i| {
            let len = 3 + (rng.u64_at(base + i as u64) % 198) as usize;
            let tokens: Vec<Token> = (0..len)
                .map(|j| {
                    let t = rng.u64_at(base + 1000 + (i * 1000 + j) as u64) % alphabet as u64;
                    Token::new(&format!("t{t}")).unwrap()
                })
                .collect();
            TraceDocument {
                doc_id: format!("d{i}"),
                label: FamilyLabel {
                    name: "x".to_string(),
                    index: 0,
                },
                tokens,
            }
        })
        .collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[test]
fn criterion_2_vectorizer_oracle_equivalence() {
    let rng = CounterRng::new(20202);
    for corpus in 0..20u64 {
        let base = corpus * 10_000_000;
        let num_docs = 2 + (rng.u64_at(base) % 49) as usize;
        let n = 1 + (rng.u64_at(base + 1) % 4) as usize;
        let docs = random_docs(&rng, base + 2, num_docs, 7);
        let vocab = build_vocabulary(&docs, n, 128).unwrap();

        // Independent oracle: per-term window scans over every document.
        let windows: Vec<Vec<String>> = docs
            .iter()
            .map(|d| {
                extract_ngrams(&d.tokens, n)
                    .unwrap()
                    .iter()
                    .map(NGram::canonical)
                    .collect()
            })
            .collect();
        for (di, doc) in docs.iter().enumerate() {
            let counts = count_grams(&extract_ngrams(&doc.tokens, n).unwrap()).unwrap();
            let bow = bow_vector(&counts, &vocab).unwrap();
            let tfidf = tfidf_vector(&counts, &vocab).unwrap();
            let onehot = onehot_vector(&counts, &vocab).unwrap();
            for i in 0..vocab.len() {
                let term = vocab.term(i);
                let tf = windows[di].iter().filter(|w| w.as_str() == term).count() as f64;
                let df = windows
                    .iter()
                    .filter(|ws| ws.iter().any(|w| w == term))
                    .count() as f64;
                let idf = (num_docs as f64 / df).ln();
                assert!(rel_err(bow.values[i], tf) < 1e-12);
                assert!(rel_err(tfidf.values[i], tf * idf) < 1e-12);
                assert!(rel_err(onehot.values[i], if tf > 0.0 { 1.0 } else { 0.0 }) < 1e-12);
                if df as u32 == vocab.num_docs() {
                    assert_eq!(tfidf.values[i], 0.0, "idf(df=N) must be exactly zero");
                }
            }
        }
    }
    pass("criterion 2: TF-IDF/BoW/one-hot match brute force to 1e-12 on 20 corpora");
}

// ---------------------------------------------------------------------
// Criterion 3: window-count law over 1e4 random (L, n) cases plus the
// bridging property on concatenations.
// ---------------------------------------------------------------------
#[test]
fn criterion_3_ngram_law() {
    let rng = CounterRng::new(33);
    let mut checked_bridges = 0;
    for case in 0..10_000u64 {
        let len = (rng.u64_at(3 * case) % 64) as usize;
        let n = 1 + (rng.u64_at(3 * case + 1) % 10) as usize;
        let tokens: Vec<Token> = (0..len)
            .map(|i| Token::new(&format!("w{}", rng.u64_at(3 * case + 2) % 5 + i as u64)).unwrap())
            .collect();
        let grams = extract_ngrams(&tokens, n).unwrap();
        let expected = if len >= n { len - n + 1 } else { 0 };
        assert_eq!(grams.len(), expected, "L={len} n={n}");

        if case % 100 == 0 && len >= n && len >= 2 {
            let mid = len / 2;
            let (a, b) = tokens.split_at(mid);
            if a.len() >= n && b.len() >= n {
                let ga = extract_ngrams(a, n).unwrap();
                let gb = extract_ngrams(b, n).unwrap();
                assert_eq!(grams.len(), ga.len() + gb.len() + (n - 1));
                assert_eq!(&grams[..ga.len()], &ga[..]);
                assert_eq!(&grams[grams.len() - gb.len()..], &gb[..]);
                checked_bridges += 1;
            }
        }
    }
    assert!(checked_bridges > 10);
    pass("criterion 3: |extract_ngrams| = max(0, L-n+1) over 1e4 cases; bridging holds");
}

// ---------------------------------------------------------------------
// Criteria 4 and 5 share a corpus: 8 families x 100 docs x 200 tokens.
// 4: pipeline with the --small config at n = 8 reaches >= 0.95 held-out
//    accuracy within 10 minutes on one core.
// 5: mean accuracy at n = 8 beats n = 1 by >= 0.05 over 3 runs.
// ---------------------------------------------------------------------

fn synth_dataset(dir: &Path) -> std::path::PathBuf {
    let manifest = cmd_synth(8, 100, 200, 632, 42, dir).unwrap();
    let dataset = dir.join("dataset.bin");
    cmd_ingest(&manifest, &dataset, 42, 1).unwrap();
    dataset
}

fn small_run_config(dataset: &Path, runs: usize, seed: u64) -> RunConfig {
    RunConfig {
        format_version: RUN_FORMAT_VERSION,
        subcommand: "pipeline".to_string(),
        dataset: dataset.display().to_string(),
        n: 8,
        max_terms: 512,
        test_fraction: 0.2,
        runs,
        seed,
        threads: 1,
        model: ModelConfig::small(8, seed),
    }
}

#[test]
fn criterion_4_desk_scale_end_to_end() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let dataset = synth_dataset(dir.path());
    let config = small_run_config(&dataset, 1, 42);
    let outcome = cmd_pipeline(&dataset, &dir.path().join("run"), &config, 1).unwrap();
    let elapsed = started.elapsed();
    assert!(
        outcome.report.accuracy >= 0.95,
        "held-out accuracy {}",
        outcome.report.accuracy
    );
    assert!(
        elapsed.as_secs_f64() <= 600.0,
        "end-to-end run took {elapsed:?}"
    );
    pass(&format!(
        "criterion 4: held-out accuracy {:.4} >= 0.95 in {:.1?}",
        outcome.report.accuracy, elapsed
    ));
}

#[test]
fn criterion_5_ngram_sweep_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = synth_dataset(dir.path());
    let config = ModelConfig::small(8, 42);
    let rows = cmd_sweep_ngram(&dataset, &[1, 8], 3, 42, &config, 512, 0.2, None, 1).unwrap();
    assert_eq!(rows.len(), 2);
    let mean_1 = rows[0].mean_acc;
    let mean_8 = rows[1].mean_acc;
    assert!(
        mean_8 - mean_1 >= 0.05,
        "n=8 mean {mean_8} vs n=1 mean {mean_1}"
    );
    pass(&format!(
        "criterion 5: mean accuracy n=8 {mean_8:.4} exceeds n=1 {mean_1:.4} by {:.4} >= 0.05",
        mean_8 - mean_1
    ));
}

// ---------------------------------------------------------------------
// Criterion 6: metric equations on the binary fixture and exact agreement
// with direct pair counting on 1e3 random prediction sets.
// ---------------------------------------------------------------------
#[test]
fn criterion_6_metrics() {
    // Fixture TP=8, TN=90, FP=1, FN=1 on the positive class.
    let mut preds = vec![1usize; 8];
    let mut truths = vec![1usize; 8];
    preds.extend(vec![0; 90]);
    truths.extend(vec![0; 90]);
    preds.push(1);
    truths.push(0);
    preds.push(0);
    truths.push(1);
    let cm = confusion(&preds, &truths, 2).unwrap();
    let m = metrics(&cm).unwrap();
    let expected = 8.0 / 9.0;
    assert!((m.accuracy - 0.98).abs() < 1e-12);
    assert!((m.per_class[1].precision - expected).abs() < 1e-12);
    assert!((m.per_class[1].recall - expected).abs() < 1e-12);
    assert!((m.per_class[1].f1 - expected).abs() < 1e-12);

    // Random prediction sets: matrix-derived metrics equal direct counting.
    let rng = CounterRng::new(606);
    for set in 0..1000u64 {
        let k = 2 + (rng.u64_at(set) % 5) as usize;
        let len = 10 + (rng.u64_at(set + 7_000_000) % 90) as usize;
        let preds: Vec<usize> = (0..len)
            .map(|i| (rng.u64_at(set * 1000 + i as u64) % k as u64) as usize)
            .collect();
        let truths: Vec<usize> = (0..len)
            .map(|i| (rng.u64_at(set * 1000 + 500 + i as u64) % k as u64) as usize)
            .collect();
        let cm = confusion(&preds, &truths, k).unwrap();
        let m = metrics(&cm).unwrap();

        let correct = preds.iter().zip(&truths).filter(|(p, t)| p == t).count();
        assert_eq!(m.accuracy, correct as f64 / len as f64);
        for class in 0..k {
            let tp = preds
                .iter()
                .zip(&truths)
                .filter(|(p, t)| **p == class && **t == class)
                .count() as f64;
            let fp = preds
                .iter()
                .zip(&truths)
                .filter(|(p, t)| **p == class && **t != class)
                .count() as f64;
            let fn_ = preds
                .iter()
                .zip(&truths)
                .filter(|(p, t)| **p != class && **t == class)
                .count() as f64;
            let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
            let recall = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
            let f1 = if 2.0 * tp + fp + fn_ == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fn_)
            };
            assert_eq!(m.per_class[class].precision, precision);
            assert_eq!(m.per_class[class].recall, recall);
            assert_eq!(m.per_class[class].f1, f1);
        }
    }
    pass("criterion 6: fixture metrics exact; multiclass matches pair counting on 1e3 sets");
}

// ---------------------------------------------------------------------
// Criterion 7: ANOVA example, p-value against independent quadrature,
// affine and permutation invariance, incomplete-beta symmetry.
// ---------------------------------------------------------------------

// Composite Simpson quadrature. The F density and its normalizing beta
// function are both evaluated by integration (no shared special-function
// code with the implementation under test).
fn simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        acc += f(lo + i as f64 * h) * if i % 2 == 0 { 2.0 } else { 4.0 };
    }
    acc * h / 3.0
}

// B(a, b) = 2 * integral of v^(2a-1) (1-v^2)^(b-1) dv over [0, 1],
// smooth at 0 for a >= 0.5 and at 1 for b >= 1.
fn beta_by_quadrature(a: f64, b: f64) -> f64 {
    let g = |v: f64| 2.0 * v.powf(2.0 * a - 1.0) * (1.0 - v * v).powf(b - 1.0);
    simpson(&g, 0.0, 1.0, 200_000)
}

fn f_cdf_by_quadrature(x: f64, d1: u64, d2: u64) -> f64 {
    let (d1f, d2f) = (d1 as f64, d2 as f64);
    let a = d1f / 2.0;
    let b = d2f / 2.0;
    let beta = beta_by_quadrature(a, b);
    let pdf = |t: f64| {
        (d1f / d2f).powf(a) * t.powf(a - 1.0) * (1.0 + d1f * t / d2f).powf(-(a + b)) / beta
    };
    if d1 % 2 == 1 {
        // u^2 substitution smooths the t^(a-1) endpoint for odd d1.
        let g = move |u: f64| {
            if u == 0.0 && d1 == 1 {
                2.0 * (d1f / d2f).sqrt() / beta
            } else if u == 0.0 {
                0.0
            } else {
                2.0 * u * pdf(u * u)
            }
        };
        simpson(&g, 0.0, x.sqrt(), 200_000)
    } else {
        let g = move |t: f64| if t == 0.0 && a == 1.0 { (d1f / d2f) / beta } else { pdf(t) };
        simpson(&g, 0.0, x, 200_000)
    }
}

#[test]
fn criterion_7_anova() {
    // Hand-computed example: F = 1.5 with df (1, 4).
    let result = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]]).unwrap();
    assert!((result.f - 1.5).abs() < 1e-12);
    assert_eq!((result.df_between, result.df_within), (1, 4));

    // p against independent numeric integration of the F density.
    let p_oracle = 1.0 - f_cdf_by_quadrature(1.5, 1, 4);
    assert!(
        (result.p - p_oracle).abs() < 1e-9,
        "p {} vs quadrature {}",
        result.p,
        p_oracle
    );

    // Affine invariance to 1e-10 and permutation invariance.
    let rng = CounterRng::new(777);
    let groups: Vec<Vec<f64>> = (0..4)
        .map(|g| (0..6).map(|i| rng.unit_f64_at(g * 100 + i)).collect())
        .collect();
    let base = anova_oneway(&groups).unwrap();
    let affine: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| g.iter().map(|x| 3.75 * x - 11.0).collect())
        .collect();
    let transformed = anova_oneway(&affine).unwrap();
    assert!((transformed.f - base.f).abs() <= 1e-10 * base.f.max(1.0));
    assert!((transformed.p - base.p).abs() <= 1e-10);

    let mut permuted: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| g.iter().rev().copied().collect())
        .collect();
    permuted.rotate_left(1);
    let perm = anova_oneway(&permuted).unwrap();
    assert!((perm.f - base.f).abs() <= 1e-10 * base.f.max(1.0));
    assert!((perm.p - base.p).abs() <= 1e-10);

    // Incomplete beta symmetry identity to 1e-12.
    for i in 0..1000u64 {
        let a = 0.5 + rng.unit_f64_at(900_000 + 3 * i) * 19.5;
        let b = 0.5 + rng.unit_f64_at(900_001 + 3 * i) * 19.5;
        let x = rng.unit_f64_at(900_002 + 3 * i).clamp(1e-9, 1.0 - 1e-9);
        let total = incomplete_beta(a, b, x) + incomplete_beta(b, a, 1.0 - x);
        assert!((total - 1.0).abs() < 1e-12, "a={a} b={b} x={x}");
    }
    pass("criterion 7: F=1.5 at df (1,4); p matches quadrature to 1e-9; invariances hold");
}

// ---------------------------------------------------------------------
// Criterion 8: memorization sanity — 8 samples, tiny config, <= 200 steps
// reach 100% training accuracy.
// ---------------------------------------------------------------------
#[test]
fn criterion_8_overfit_sanity() {
    let config = ModelConfig {
        conv_filters: [2, 2, 2],
        conv_kernel: 3,
        lstm_hidden: 8,
        lstm_depth: 1,
        dropout: 0.0,
        classes: 8,
        epochs: 200, // batch 8 over 8 samples = one step per epoch
        batch: 8,
        lr: 0.01,
        ..ModelConfig::cnn_lstm3(8, 5)
    };
    let rng = CounterRng::new(88);
    let samples: Vec<Sample<f32>> = (0..8)
        .map(|i| {
            let len = 2 * 27 * 27;
            let data: Vec<f32> = (0..len)
                .map(|j| (rng.unit_f64_at((i * len + j) as u64) - 0.5) as f32)
                .collect();
            Sample {
                label: i as u32,
                input: Tensor::from_vec(&[2, 27, 27], data),
            }
        })
        .collect();
    let (state, logs) = train(&samples, &config, 2, 1).unwrap();
    assert!(state.step <= 200, "took {} steps", state.step);
    let final_acc = logs.last().unwrap().train_acc;
    assert_eq!(final_acc, 1.0, "training accuracy {final_acc}");
    pass(&format!(
        "criterion 8: 100% training accuracy after {} steps",
        state.step
    ));
}

// ---------------------------------------------------------------------
// Criterion 9: bitwise determinism of checkpoints and metrics JSON for an
// identical root seed at --threads 1.
// ---------------------------------------------------------------------
#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = cmd_synth(4, 20, 100, 64, 9, dir.path()).unwrap();
    let dataset = dir.path().join("dataset.bin");
    cmd_ingest(&manifest, &dataset, 9, 1).unwrap();

    let mut model = ModelConfig::small(4, 17);
    model.epochs = 2;
    let config = RunConfig {
        format_version: RUN_FORMAT_VERSION,
        subcommand: "pipeline".to_string(),
        dataset: dataset.display().to_string(),
        n: 8,
        max_terms: 512,
        test_fraction: 0.2,
        runs: 1,
        seed: 17,
        threads: 1,
        model,
    };
    let run_a = dir.path().join("run_a");
    let run_b = dir.path().join("run_b");
    cmd_pipeline(&dataset, &run_a, &config, 1).unwrap();
    cmd_pipeline(&dataset, &run_b, &config, 1).unwrap();

    for artifact in ["model_run0.ckpt", "metrics.json", "features.train.bin", "vocab.tsv"] {
        let a = fs::read(run_a.join(artifact)).unwrap();
        let b = fs::read(run_b.join(artifact)).unwrap();
        assert_eq!(a, b, "{artifact} differs between identical runs");
    }
    pass("criterion 9: identical seed gives bitwise-identical checkpoint and metrics JSON");
}

// ---------------------------------------------------------------------
// Criterion 10: vocabulary TSV, feature binary, and checkpoint survive
// write -> read -> write with byte-identical second output.
// ---------------------------------------------------------------------
#[test]
fn criterion_10_format_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let rng = CounterRng::new(1010);

    // Vocabulary TSV plus statistics.
    let docs: Vec<TraceDocument> = (0..12)
        .map(|i| {
            let tokens: Vec<Token> = (0..30)
                .map(|j| Token::new(&format!("t{}", rng.u64_at((i * 100 + j) as u64) % 9)).unwrap())
                .collect();
            TraceDocument {
                doc_id: format!("d{i}"),
                label: FamilyLabel {
                    name: "f".to_string(),
                    index: 0,
                },
                tokens,
            }
        })
        .collect();
    let vocab = build_vocabulary(&docs, 2, 40).unwrap();
    let xs: Vec<FeatureVector> = docs
        .iter()
        .map(|d| {
            let counts = count_grams(&extract_ngrams(&d.tokens, 2).unwrap()).unwrap();
            let bow = bow_vector(&counts, &vocab).unwrap();
            let tfidf = tfidf_vector(&counts, &vocab).unwrap();
            concat_x(&bow, &tfidf).unwrap()
        })
        .collect();
    let std = Standardizer::fit(&xs).unwrap();
    let v1 = dir.path().join("vocab.tsv");
    write_vocabulary(&v1, &vocab, &std).unwrap();
    let (vocab2, std2) = read_vocabulary(&v1).unwrap();
    // Same file name in a sibling directory keeps the embedded statistics
    // reference identical.
    let v2_dir = dir.path().join("second");
    fs::create_dir(&v2_dir).unwrap();
    let v2 = v2_dir.join("vocab.tsv");
    write_vocabulary(&v2, &vocab2, &std2).unwrap();
    assert_eq!(fs::read(&v1).unwrap(), fs::read(&v2).unwrap());

    // Feature binary.
    let onehot = onehot_vector(
        &count_grams(&extract_ngrams(&docs[0].tokens, 2).unwrap()).unwrap(),
        &vocab,
    )
    .unwrap();
    let tensor = assemble_input(&xs[0], &onehot, &std).unwrap();
    assert_eq!(xs[0].kind, FeatureKind::ConcatX);
    let file = opseq::features::FeatureFile::from_tensors(&[(0, tensor)], 2).unwrap();
    let f1 = dir.path().join("feat.bin");
    write_feature_file(&f1, &file).unwrap();
    let loaded = read_feature_file(&f1).unwrap();
    let f2 = dir.path().join("feat2.bin");
    write_feature_file(&f2, &loaded).unwrap();
    assert_eq!(fs::read(&f1).unwrap(), fs::read(&f2).unwrap());

    // Checkpoint, with Adam moments.
    let config = ModelConfig {
        conv_filters: [2, 3, 2],
        conv_kernel: 3,
        lstm_hidden: 4,
        lstm_depth: 2,
        classes: 3,
        ..ModelConfig::cnn_lstm3(3, 3)
    };
    let mut state = opseq::nn::ModelState::<f32>::init(&config, 2, 3).unwrap();
    state.step = 5;
    let c1 = dir.path().join("model.ckpt");
    write_checkpoint(&c1, &state, true).unwrap();
    let loaded = read_checkpoint(&c1).unwrap();
    let c2 = dir.path().join("model2.ckpt");
    write_checkpoint(&c2, &loaded, true).unwrap();
    assert_eq!(fs::read(&c1).unwrap(), fs::read(&c2).unwrap());

    pass("criterion 10: vocab TSV, feature binary, and checkpoint round-trip byte-identically");
}

// ---------------------------------------------------------------------
// Supporting check reused by several criteria: run aggregation matches the
// paper's seven-run averaging protocol shape.
// ---------------------------------------------------------------------
#[test]
fn run_aggregation_shape() {
    let values = [0.91, 0.93, 0.92, 0.95, 0.94, 0.9, 0.96];
    let (mean, max, min) = aggregate_runs(&values).unwrap();
    assert!((mean - values.iter().sum::<f64>() / 7.0).abs() < 1e-15);
    assert_eq!(max, 0.96);
    assert_eq!(min, 0.9);
    // A report carrying runs keeps stable key order on disk.
    let dir = tempfile::tempdir().unwrap();
    let cm = confusion(&[0, 1], &[0, 1], 2).unwrap();
    let m = metrics(&cm).unwrap();
    let mut report = EvalReport::new(&cm, &m, &["a".to_string(), "b".to_string()]);
    report.runs = Some(opseq::eval::report::RunsReport {
        mean,
        max,
        min,
        values: values.to_vec(),
    });
    let path = dir.path().join("report.json");
    report.write(&path).unwrap();
    assert_eq!(EvalReport::read(&path).unwrap(), report);
}
