//! Command implementations behind the `opseq` binary: ingest, synth,
//! featurize, train, eval, sweep-ngram, compare, gradcheck, and the
//! end-to-end pipeline with its self-describing run directory.
//!
//! All randomness flows from one root seed through named substreams
//! ("split", "init", "shuffle", "dropout", "run"), so a run is a pure
//! function of its config snapshot in single-threaded mode.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eval::report::{AnovaReport, EvalReport, RunsReport};
use crate::eval::{aggregate_runs, anova_oneway, confusion, metrics, EvalError};
use crate::features::{
    assemble_input, bow_vector, build_vocabulary, concat_x, onehot_vector, read_feature_file,
    read_vocabulary, tfidf_vector, write_feature_file, write_vocabulary, FeatureFile,
    FeaturesError, InputTensor, Standardizer, Vocabulary,
};
use crate::ngram::{count_grams, extract_ngrams};
use crate::nn::checkpoint::{read_checkpoint, write_checkpoint};
use crate::nn::gradcheck::{run_all, GradCheckReport};
use crate::nn::tensor::Tensor;
use crate::nn::train::{predict, train, EpochLog, Sample};
use crate::nn::{ModelConfig, ModelState, NnError};
use crate::rng::{substream, substream_indexed};
use crate::trace::{
    generate_synthetic_corpus, load_manifest, parse_trace, read_dataset, stratified_split,
    write_dataset, Dataset, FamilyLabel, TraceDocument, TraceError,
};

pub const RUN_FORMAT_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CommandError {
    Trace(TraceError),
    Features(FeaturesError),
    Nn(NnError),
    Eval(EvalError),
    Usage(String),
    Io(std::io::Error),
}

impl CommandError {
    /// Stable machine-parsable code for the `ERROR:<code>:<message>` line.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Trace(e) => match e {
                TraceError::EmptyTrace { .. } => "EmptyTrace",
                TraceError::InvalidEncoding { .. } => "InvalidEncoding",
                TraceError::InvalidToken { .. } => "InvalidToken",
                TraceError::MissingFile { .. } => "MissingFile",
                TraceError::MalformedRow { .. } => "MalformedRow",
                TraceError::DuplicatePath { .. } => "DuplicatePath",
                TraceError::LabelTooSmall { .. } => "LabelTooSmall",
                TraceError::InvalidParams(_) => "InvalidParams",
                TraceError::BadFormat(_) => "BadDatasetFile",
                TraceError::Io(_) => "Io",
            },
            Self::Features(e) => match e {
                FeaturesError::EmptyCorpus => "EmptyCorpus",
                FeaturesError::UnknownTerm(_) => "UnknownTerm",
                FeaturesError::GramOrderMismatch { .. } => "GramOrderMismatch",
                FeaturesError::LengthMismatch { .. } => "LengthMismatch",
                FeaturesError::BadFormat(_) => "BadFeatureFile",
                FeaturesError::Io(_) => "Io",
            },
            Self::Nn(e) => match e {
                NnError::ShapeMismatch(_) => "ShapeMismatch",
                NnError::InputTooSmall { .. } => "InputTooSmall",
                NnError::LabelOutOfRange { .. } => "LabelOutOfRange",
                NnError::NonFiniteGradient => "NonFiniteGradient",
                NnError::EmptyDataset => "EmptyDataset",
                NnError::BadConfig(_) => "BadConfig",
                NnError::BadFormat(_) => "BadCheckpoint",
                NnError::Io(_) => "Io",
            },
            Self::Eval(e) => match e {
                EvalError::LengthMismatch { .. } => "LengthMismatch",
                EvalError::LabelOutOfRange { .. } => "LabelOutOfRange",
                EvalError::EmptyMatrix => "EmptyMatrix",
                EvalError::EmptyList => "EmptyList",
                EvalError::TooFewGroups(_) => "TooFewGroups",
                EvalError::TooFewObservations(_) => "TooFewObservations",
                EvalError::DegenerateGroups => "DegenerateGroups",
                EvalError::InvalidDegrees { .. } => "InvalidDegrees",
                EvalError::Io(_) => "Io",
                EvalError::BadFormat(_) => "BadReport",
            },
            Self::Usage(_) => "Usage",
            Self::Io(_) => "Io",
        }
    }
}

impl fmt::Display for CommandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Trace(e) => write!(f, "{e}"),
            Self::Features(e) => write!(f, "{e}"),
            Self::Nn(e) => write!(f, "{e}"),
            Self::Eval(e) => write!(f, "{e}"),
            Self::Usage(msg) => write!(f, "{msg}"),
            Self::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CommandError {}

impl From<TraceError> for CommandError {
    fn from(e: TraceError) -> Self {
        Self::Trace(e)
    }
}
impl From<FeaturesError> for CommandError {
    fn from(e: FeaturesError) -> Self {
        Self::Features(e)
    }
}
impl From<NnError> for CommandError {
    fn from(e: NnError) -> Self {
        Self::Nn(e)
    }
}
impl From<EvalError> for CommandError {
    fn from(e: EvalError) -> Self {
        Self::Eval(e)
    }
}
impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

/// Run `f` on a rayon pool of the requested width; `threads <= 1` stays on
/// the calling thread.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads <= 1 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

/// `OPSQ_THREADS` overrides the `--threads` flag when set.
pub fn effective_threads(flag: usize) -> usize {
    std::env::var("OPSQ_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(flag)
        .max(1)
}

/// Write synthetic trace files plus a `path,label` manifest into `out_dir`.
pub fn cmd_synth(
    families: usize,
    docs: usize,
    len: usize,
    vocab: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<PathBuf, CommandError> {
    let corpus = generate_synthetic_corpus(families, docs, len, vocab, seed)?;
    let traces = out_dir.join("traces");
    fs::create_dir_all(&traces)?;
    let mut manifest = String::from("path,label\n");
    for doc in &corpus {
        let rel = format!("traces/{}.txt", doc.doc_id);
        fs::write(out_dir.join(&rel), doc.to_text())?;
        manifest.push_str(&format!("{rel},{}\n", doc.label.name));
    }
    let manifest_path = out_dir.join("manifest.csv");
    fs::write(&manifest_path, manifest)?;
    Ok(manifest_path)
}

/// Parse every manifest entry (in manifest order, parallel across files)
/// into a dataset file.
pub fn cmd_ingest(
    manifest_path: &Path,
    out: &Path,
    seed: u64,
    threads: usize,
) -> Result<Dataset, CommandError> {
    let manifest = load_manifest(manifest_path, seed)?;
    let dataset = ingest_manifest(&manifest, threads)?;
    write_dataset(out, &dataset)?;
    Ok(dataset)
}

fn ingest_manifest(
    manifest: &crate::trace::DatasetManifest,
    threads: usize,
) -> Result<Dataset, CommandError> {
    use rayon::prelude::*;
    let parse_one = |(path, label_name): &(PathBuf, String)| -> Result<TraceDocument, CommandError> {
        let bytes = fs::read(path).map_err(|_| {
            CommandError::Trace(TraceError::MissingFile {
                path: path.clone(),
            })
        })?;
        let doc_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Ok(parse_trace(
            &bytes,
            &doc_id,
            FamilyLabel {
                name: label_name.clone(),
                index: 0,
            },
        )?)
    };
    let docs: Vec<TraceDocument> = if threads > 1 {
        with_threads(threads, || {
            manifest
                .entries
                .par_iter()
                .map(parse_one)
                .collect::<Result<_, _>>()
        })?
    } else {
        manifest
            .entries
            .iter()
            .map(parse_one)
            .collect::<Result<_, _>>()?
    };
    Ok(Dataset::from_docs(docs, manifest.seed))
}

/// Vocabulary, standardizer, and assembled tensors for one train/test
/// split.
pub struct FeaturizedSplit {
    pub vocab: Vocabulary,
    pub standardizer: Standardizer,
    pub train: Vec<(u32, InputTensor)>,
    pub test: Vec<(u32, InputTensor)>,
    pub num_classes: u32,
}

fn doc_vectors(
    doc: &TraceDocument,
    vocab: &Vocabulary,
) -> Result<(crate::features::FeatureVector, crate::features::FeatureVector), FeaturesError> {
    let grams = extract_ngrams(&doc.tokens, vocab.order())
        .map_err(|e| FeaturesError::BadFormat(e.to_string()))?;
    let counts = count_grams(&grams).map_err(|e| FeaturesError::BadFormat(e.to_string()))?;
    let bow = bow_vector(&counts, vocab)?;
    let tfidf = tfidf_vector(&counts, vocab)?;
    let onehot = onehot_vector(&counts, vocab)?;
    let x = concat_x(&bow, &tfidf)?;
    Ok((x, onehot))
}

/// Build the vocabulary and statistics on the training documents only, then
/// assemble both splits into 2-channel tensors.
pub fn featurize_split(
    train_docs: &[TraceDocument],
    test_docs: &[TraceDocument],
    n: usize,
    max_terms: usize,
    num_classes: u32,
    threads: usize,
) -> Result<FeaturizedSplit, CommandError> {
    use rayon::prelude::*;
    let vocab = build_vocabulary(train_docs, n, max_terms)?;

    let vectors_for = |docs: &[TraceDocument]| -> Result<
        Vec<(crate::features::FeatureVector, crate::features::FeatureVector)>,
        FeaturesError,
    > {
        if threads > 1 {
            with_threads(threads, || {
                docs.par_iter().map(|d| doc_vectors(d, &vocab)).collect()
            })
        } else {
            docs.iter().map(|d| doc_vectors(d, &vocab)).collect()
        }
    };

    let train_vecs = vectors_for(train_docs)?;
    let test_vecs = vectors_for(test_docs)?;

    let train_xs: Vec<crate::features::FeatureVector> =
        train_vecs.iter().map(|(x, _)| x.clone()).collect();
    let standardizer = Standardizer::fit(&train_xs)?;

    let assemble = |docs: &[TraceDocument],
                    vecs: &[(crate::features::FeatureVector, crate::features::FeatureVector)]|
     -> Result<Vec<(u32, InputTensor)>, FeaturesError> {
        docs.iter()
            .zip(vecs)
            .map(|(doc, (x, y))| {
                Ok((doc.label.index as u32, assemble_input(x, y, &standardizer)?))
            })
            .collect()
    };
    let train = assemble(train_docs, &train_vecs)?;
    let test = assemble(test_docs, &test_vecs)?;
    Ok(FeaturizedSplit {
        vocab,
        standardizer,
        train,
        test,
        num_classes,
    })
}

/// Sibling path with `.test` inserted before the extension:
/// `feat.bin` -> `feat.test.bin`.
pub fn test_features_path(out: &Path) -> PathBuf {
    match out.extension() {
        Some(ext) => out.with_extension(format!("test.{}", ext.to_string_lossy())),
        None => out.with_extension("test"),
    }
}

/// Split the dataset, build the vocabulary artifact, and write the train
/// and test feature files (`--out` and its `.test` sibling).
pub fn cmd_featurize(
    dataset_path: &Path,
    n: usize,
    max_terms: usize,
    vocab_out: &Path,
    out: &Path,
    test_fraction: f64,
    seed: Option<u64>,
    threads: usize,
) -> Result<(usize, usize), CommandError> {
    let dataset = read_dataset(dataset_path)?;
    let root = seed.unwrap_or(dataset.seed);
    let (train_docs, test_docs) =
        stratified_split(&dataset.docs, test_fraction, substream(root, "split"))?;
    let split = featurize_split(
        &train_docs,
        &test_docs,
        n,
        max_terms,
        dataset.num_classes() as u32,
        threads,
    )?;
    write_vocabulary(vocab_out, &split.vocab, &split.standardizer)?;
    let train_file = FeatureFile::from_tensors(&split.train, split.num_classes)?;
    write_feature_file(out, &train_file)?;
    let test_file = FeatureFile::from_tensors(&split.test, split.num_classes)?;
    write_feature_file(&test_features_path(out), &test_file)?;
    Ok((split.train.len(), split.test.len()))
}

pub fn samples_from_feature_file(file: &FeatureFile) -> Vec<Sample<f32>> {
    (0..file.samples.len())
        .map(|i| {
            let t = file.tensor(i);
            Sample {
                label: file.samples[i].label,
                input: Tensor::from_vec(&[t.channels, t.height, t.width], t.data),
            }
        })
        .collect()
}

fn write_train_log(path: &Path, logs: &[EpochLog]) -> Result<(), CommandError> {
    let mut out = String::from("epoch,loss,train_acc\n");
    for l in logs {
        out.push_str(&format!("{},{},{}\n", l.epoch, l.loss, l.train_acc));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Train on a feature file and write the checkpoint (and optional log CSV).
#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    features: &Path,
    config: &ModelConfig,
    out: &Path,
    log: Option<&Path>,
    resume_capable: bool,
    threads: usize,
) -> Result<Vec<EpochLog>, CommandError> {
    let file = read_feature_file(features)?;
    if file.num_classes as usize != config.classes {
        return Err(CommandError::Usage(format!(
            "feature file has {} classes but model config expects {}",
            file.num_classes, config.classes
        )));
    }
    let samples = samples_from_feature_file(&file);
    let (state, logs) = with_threads(threads, || {
        train(&samples, config, file.channels as usize, threads)
    })?;
    write_checkpoint(out, &state, resume_capable)?;
    if let Some(log_path) = log {
        write_train_log(log_path, &logs)?;
    }
    Ok(logs)
}

fn evaluate_checkpoint(
    state: &ModelState<f32>,
    file: &FeatureFile,
    labels: &[String],
    threads: usize,
) -> Result<EvalReport, CommandError> {
    let samples = samples_from_feature_file(file);
    let preds = with_threads(threads, || predict(state, &samples, threads))?;
    let truths: Vec<usize> = samples.iter().map(|s| s.label as usize).collect();
    let cm = confusion(&preds, &truths, file.num_classes as usize)?;
    let m = metrics(&cm)?;
    Ok(EvalReport::new(&cm, &m, labels))
}

/// Evaluate a checkpoint against a feature file and write the JSON report.
pub fn cmd_eval(
    model: &Path,
    features: &Path,
    report_out: &Path,
    labels: Option<Vec<String>>,
    threads: usize,
) -> Result<EvalReport, CommandError> {
    let state = read_checkpoint(model)?;
    let file = read_feature_file(features)?;
    let labels = labels.unwrap_or_else(|| {
        (0..file.num_classes).map(|i| i.to_string()).collect()
    });
    let report = evaluate_checkpoint(&state, &file, &labels, threads)?;
    report.write(report_out)?;
    Ok(report)
}

/// Re-evaluate a run directory using only the paths recorded in its
/// `manifest.json`.
pub fn cmd_eval_run_dir(run_dir: &Path, threads: usize) -> Result<EvalReport, CommandError> {
    let manifest = RunManifest::read(&run_dir.join("manifest.json"))?;
    let state = read_checkpoint(&run_dir.join(&manifest.checkpoints[0]))?;
    let file = read_feature_file(&run_dir.join(&manifest.features_test))?;
    let report = evaluate_checkpoint(&state, &file, &manifest.labels, threads)?;
    report.write(&run_dir.join("metrics_reeval.json"))?;
    Ok(report)
}

/// One row of the n-gram sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub mean_acc: f64,
    pub max_acc: f64,
    pub min_acc: f64,
}

/// Train `runs` independently seeded models per gram order and aggregate
/// held-out accuracies. The split is fixed across orders and runs so rows
/// are comparable.
#[allow(clippy::too_many_arguments)]
pub fn cmd_sweep_ngram(
    dataset_path: &Path,
    n_values: &[usize],
    runs: usize,
    root_seed: u64,
    base_config: &ModelConfig,
    max_terms: usize,
    test_fraction: f64,
    out_csv: Option<&Path>,
    threads: usize,
) -> Result<Vec<SweepRow>, CommandError> {
    if n_values.is_empty() {
        return Err(CommandError::Usage(
            "sweep-ngram needs at least one value in --n-values".to_string(),
        ));
    }
    if runs == 0 {
        return Err(CommandError::Usage("--runs must be >= 1".to_string()));
    }
    let dataset = read_dataset(dataset_path)?;
    let (train_docs, test_docs) = stratified_split(
        &dataset.docs,
        test_fraction,
        substream(root_seed, "split"),
    )?;

    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let split = featurize_split(
            &train_docs,
            &test_docs,
            n,
            max_terms,
            dataset.num_classes() as u32,
            threads,
        )?;
        let train_samples: Vec<Sample<f32>> = split
            .train
            .iter()
            .map(|(label, t)| Sample {
                label: *label,
                input: Tensor::from_vec(&[t.channels, t.height, t.width], t.data.clone()),
            })
            .collect();
        let test_samples: Vec<Sample<f32>> = split
            .test
            .iter()
            .map(|(label, t)| Sample {
                label: *label,
                input: Tensor::from_vec(&[t.channels, t.height, t.width], t.data.clone()),
            })
            .collect();

        let mut accuracies = Vec::with_capacity(runs);
        for run in 0..runs {
            let mut config = base_config.clone();
            config.seed = substream_indexed(root_seed, "run", run as u64);
            let (state, _) = with_threads(threads, || {
                train(&train_samples, &config, 2, threads)
            })?;
            let preds = with_threads(threads, || predict(&state, &test_samples, threads))?;
            let correct = preds
                .iter()
                .zip(&test_samples)
                .filter(|(p, s)| **p == s.label as usize)
                .count();
            accuracies.push(correct as f64 / test_samples.len() as f64);
        }
        let (mean, max, min) = aggregate_runs(&accuracies)?;
        rows.push(SweepRow {
            n,
            mean_acc: mean,
            max_acc: max,
            min_acc: min,
        });
    }

    if let Some(path) = out_csv {
        let mut out = String::from("n,mean_acc,max_acc,min_acc\n");
        for row in &rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.n, row.mean_acc, row.max_acc, row.min_acc
            ));
        }
        fs::write(path, out)?;
    }
    Ok(rows)
}

/// Model-comparison output for `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareGroup {
    pub name: String,
    pub mean: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub models: Vec<CompareGroup>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anova: Option<AnovaReport>,
}

/// One-way ANOVA across the per-run accuracy groups of saved reports.
pub fn cmd_compare(
    report_paths: &[PathBuf],
    with_anova: bool,
    out: Option<&Path>,
) -> Result<CompareReport, CommandError> {
    if report_paths.len() < 2 {
        return Err(CommandError::Usage(
            "compare needs at least two --reports".to_string(),
        ));
    }
    let mut groups = Vec::with_capacity(report_paths.len());
    for path in report_paths {
        let report = EvalReport::read(path)?;
        let runs = report.runs.ok_or_else(|| {
            CommandError::Usage(format!(
                "report {} carries no per-run accuracies",
                path.display()
            ))
        })?;
        groups.push(CompareGroup {
            name: path.display().to_string(),
            mean: runs.mean,
            values: runs.values,
        });
    }
    let anova = if with_anova {
        let observations: Vec<Vec<f64>> = groups.iter().map(|g| g.values.clone()).collect();
        Some(AnovaReport::from(&anova_oneway(&observations)?))
    } else {
        None
    };
    let report = CompareReport {
        models: groups,
        anova,
    };
    if let Some(path) = out {
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| CommandError::Usage(format!("serialization failed: {e}")))?;
        fs::write(path, json + "\n")?;
    }
    Ok(report)
}

/// Run every finite-difference check; the bool is the overall verdict.
pub fn cmd_gradcheck(seed: u64) -> (Vec<GradCheckReport>, bool) {
    let reports = run_all(seed);
    let ok = reports.iter().all(GradCheckReport::pass);
    (reports, ok)
}

/// Serialized snapshot of everything a run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub format_version: u32,
    pub subcommand: String,
    pub dataset: String,
    pub n: usize,
    pub max_terms: usize,
    pub test_fraction: f64,
    pub runs: usize,
    pub seed: u64,
    pub threads: usize,
    pub model: ModelConfig,
}

/// Artifact index written into every run directory; paths are relative to
/// the directory so it stays self-describing when moved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub labels: Vec<String>,
    pub config: String,
    pub vocabulary: String,
    pub features_train: String,
    pub features_test: String,
    pub checkpoints: Vec<String>,
    pub training_logs: Vec<String>,
    pub metrics: String,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<(), CommandError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CommandError::Usage(format!("serialization failed: {e}")))?;
        fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CommandError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CommandError::Usage(format!("manifest parse failed: {e}")))
    }
}

pub struct PipelineOutcome {
    pub report: EvalReport,
    pub run_dir: PathBuf,
}

/// End-to-end run: split, featurize, train (`runs` times with run-indexed
/// seeds), evaluate, and persist every artifact plus a `manifest.json`
/// index. Failures leave a `FAILED` marker in the directory.
pub fn cmd_pipeline(
    dataset_path: &Path,
    out_dir: &Path,
    run_config: &RunConfig,
    threads: usize,
) -> Result<PipelineOutcome, CommandError> {
    fs::create_dir_all(out_dir)?;
    match pipeline_inner(dataset_path, out_dir, run_config, threads) {
        Ok(outcome) => Ok(outcome),
        Err(e) => {
            let _ = fs::write(
                out_dir.join("FAILED"),
                format!("ERROR:{}:{}\n", e.code(), e),
            );
            Err(e)
        }
    }
}

fn pipeline_inner(
    dataset_path: &Path,
    out_dir: &Path,
    run_config: &RunConfig,
    threads: usize,
) -> Result<PipelineOutcome, CommandError> {
    let root = run_config.seed;
    let dataset = read_dataset(dataset_path)?;
    if dataset.num_classes() != run_config.model.classes {
        return Err(CommandError::Usage(format!(
            "dataset has {} classes but model config expects {}",
            dataset.num_classes(),
            run_config.model.classes
        )));
    }

    let config_rel = "config.json".to_string();
    let config_json = serde_json::to_string_pretty(run_config)
        .map_err(|e| CommandError::Usage(format!("serialization failed: {e}")))?;
    fs::write(out_dir.join(&config_rel), config_json + "\n")?;

    let (train_docs, test_docs) = stratified_split(
        &dataset.docs,
        run_config.test_fraction,
        substream(root, "split"),
    )?;
    let split = featurize_split(
        &train_docs,
        &test_docs,
        run_config.n,
        run_config.max_terms,
        dataset.num_classes() as u32,
        threads,
    )?;

    let vocab_rel = "vocab.tsv".to_string();
    write_vocabulary(&out_dir.join(&vocab_rel), &split.vocab, &split.standardizer)?;
    let train_rel = "features.train.bin".to_string();
    let test_rel = "features.test.bin".to_string();
    let train_file = FeatureFile::from_tensors(&split.train, split.num_classes)?;
    write_feature_file(&out_dir.join(&train_rel), &train_file)?;
    let test_file = FeatureFile::from_tensors(&split.test, split.num_classes)?;
    write_feature_file(&out_dir.join(&test_rel), &test_file)?;

    let train_samples = samples_from_feature_file(&train_file);
    let test_samples = samples_from_feature_file(&test_file);
    let truths: Vec<usize> = test_samples.iter().map(|s| s.label as usize).collect();

    let mut checkpoints = Vec::with_capacity(run_config.runs);
    let mut logs_rel = Vec::with_capacity(run_config.runs);
    let mut accuracies = Vec::with_capacity(run_config.runs);
    let mut first_report: Option<EvalReport> = None;

    for run in 0..run_config.runs {
        let mut config = run_config.model.clone();
        config.seed = substream_indexed(root, "run", run as u64);
        let (state, logs) = with_threads(threads, || {
            train(&train_samples, &config, train_file.channels as usize, threads)
        })?;

        let ckpt_rel = format!("model_run{run}.ckpt");
        write_checkpoint(&out_dir.join(&ckpt_rel), &state, false)?;
        let log_rel = format!("train_log_run{run}.csv");
        write_train_log(&out_dir.join(&log_rel), &logs)?;

        let preds = with_threads(threads, || predict(&state, &test_samples, threads))?;
        let cm = confusion(&preds, &truths, dataset.num_classes())?;
        let m = metrics(&cm)?;
        accuracies.push(m.accuracy);
        if first_report.is_none() {
            first_report = Some(EvalReport::new(&cm, &m, &dataset.labels));
        }
        checkpoints.push(ckpt_rel);
        logs_rel.push(log_rel);
    }

    let (mean, max, min) = aggregate_runs(&accuracies)?;
    let mut report = first_report.expect("at least one run");
    report.runs = Some(RunsReport {
        mean,
        max,
        min,
        values: accuracies,
    });

    let metrics_rel = "metrics.json".to_string();
    report.write(&out_dir.join(&metrics_rel))?;

    RunManifest {
        format_version: RUN_FORMAT_VERSION,
        labels: dataset.labels.clone(),
        config: config_rel,
        vocabulary: vocab_rel,
        features_train: train_rel,
        features_test: test_rel,
        checkpoints,
        training_logs: logs_rel,
        metrics: metrics_rel,
    }
    .write(&out_dir.join("manifest.json"))?;

    Ok(PipelineOutcome {
        report,
        run_dir: out_dir.to_path_buf(),
    })
}

/// Vocabulary loading helper for inspection paths (examples, tooling).
pub fn load_vocabulary(path: &Path) -> Result<(Vocabulary, Standardizer), CommandError> {
    Ok(read_vocabulary(path)?)
}
