//! Thin command-line front end over [`opseq::commands`].
//!
//! Every subcommand exits 0 on success and prints a single
//! `ERROR:<code>:<message>` line on failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use opseq::commands::{
    cmd_compare, cmd_eval, cmd_eval_run_dir, cmd_featurize, cmd_gradcheck, cmd_ingest,
    cmd_pipeline, cmd_sweep_ngram, cmd_synth, cmd_train, effective_threads, CommandError,
    RunConfig, RUN_FORMAT_VERSION,
};
use opseq::nn::ModelConfig;

#[derive(Parser)]
#[command(
    name = "opseq",
    version,
    about = "Malware family classification from opcode/API-call traces: \
             n-gram features, a from-scratch CNN-LSTM, and ANOVA model comparison"
)]
struct Cli {
    /// Worker threads (1 = fully deterministic mode). The OPSQ_THREADS
    /// environment variable overrides this flag.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

/// Model hyperparameter flags shared by train/sweep-ngram/pipeline.
/// Defaults are the CNN-LSTM-3 configuration.
#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Desk-scale preset: filters 4,8,8, hidden 16, 20 epochs, batch 8,
    /// lr 0.002, no dropout.
    #[arg(long)]
    small: bool,
    /// Convolution filter counts for the three stages [default: 32,64,128].
    #[arg(long, value_delimiter = ',', num_args = 3)]
    filters: Option<Vec<usize>>,
    /// Convolution kernel size (square, odd) [default: 9].
    #[arg(long)]
    kernel: Option<usize>,
    /// LSTM hidden units per layer [default: 512].
    #[arg(long)]
    hidden: Option<usize>,
    /// LSTM depth [default: 3].
    #[arg(long)]
    depth: Option<usize>,
    /// Inter-layer LSTM dropout rate [default: 0.3].
    #[arg(long)]
    dropout: Option<f64>,
    /// Maximum LSTM sequence length [default: 200].
    #[arg(long)]
    window: Option<usize>,
    /// Training epochs [default: 200].
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size [default: 64].
    #[arg(long)]
    batch: Option<usize>,
    /// Adam learning rate [default: 0.001].
    #[arg(long)]
    lr: Option<f64>,
}

impl ModelArgs {
    /// Start from the preset (CNN-LSTM-3 or --small) and apply only the
    /// flags the user actually passed.
    fn build(&self, classes: usize, seed: u64) -> ModelConfig {
        let mut config = if self.small {
            ModelConfig::small(classes, seed)
        } else {
            ModelConfig::cnn_lstm3(classes, seed)
        };
        if let Some(f) = &self.filters {
            config.conv_filters = [f[0], f[1], f[2]];
        }
        if let Some(k) = self.kernel {
            config.conv_kernel = k;
        }
        if let Some(h) = self.hidden {
            config.lstm_hidden = h;
        }
        if let Some(d) = self.depth {
            config.lstm_depth = d;
        }
        if let Some(d) = self.dropout {
            config.dropout = d;
        }
        if let Some(w) = self.window {
            config.window = w;
        }
        if let Some(e) = self.epochs {
            config.epochs = e;
        }
        if let Some(b) = self.batch {
            config.batch = b;
        }
        if let Some(lr) = self.lr {
            config.lr = lr;
        }
        config
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a path,label manifest of trace files into a dataset container.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Default split seed stored with the dataset.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a synthetic labeled corpus of trace files plus a manifest.
    Synth {
        #[arg(long)]
        families: usize,
        #[arg(long)]
        docs: usize,
        #[arg(long)]
        len: usize,
        #[arg(long)]
        vocab: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Split a dataset, build the n-gram vocabulary on the training side,
    /// and write train (--out) and test (.test sibling) feature files.
    Featurize {
        #[arg(long)]
        dataset: PathBuf,
        /// Gram order (1..=10).
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 2048)]
        max_terms: usize,
        #[arg(long)]
        vocab_out: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        /// Split seed; defaults to the seed stored in the dataset.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the CNN-LSTM on a feature file and write a checkpoint.
    Train {
        #[arg(long)]
        features: PathBuf,
        /// Root seed for init/shuffle/dropout substreams.
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss/accuracy CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Store Adam moments so training can resume from the checkpoint.
        #[arg(long)]
        resume_capable: bool,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Evaluate a checkpoint on a feature file (or re-evaluate a run
    /// directory) and write a metrics JSON report.
    Eval {
        #[arg(long, required_unless_present = "run_dir")]
        model: Option<PathBuf>,
        #[arg(long, required_unless_present = "run_dir")]
        features: Option<PathBuf>,
        #[arg(long, required_unless_present = "run_dir")]
        report: Option<PathBuf>,
        /// Self-describing run directory produced by `pipeline`.
        #[arg(long, conflicts_with_all = ["model", "features", "report"])]
        run_dir: Option<PathBuf>,
    },
    /// Train independently seeded models per gram order and tabulate
    /// mean/max/min held-out accuracy.
    SweepNgram {
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated gram orders, each in 1..=10.
        #[arg(long, value_delimiter = ',', required = true)]
        n_values: Vec<usize>,
        #[arg(long, default_value_t = 7)]
        runs: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 2048)]
        max_terms: usize,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        /// Output CSV (n,mean_acc,max_acc,min_acc).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// One-way ANOVA across the per-run accuracies of saved reports.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        /// Compute the F statistic and p-value.
        #[arg(long)]
        anova: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference gradient checks for every layer and the composed
    /// network; nonzero exit on any failure.
    Gradcheck {
        #[arg(long, default_value_t = 1234)]
        seed: u64,
    },
    /// End-to-end run: split, featurize, train, evaluate, and persist all
    /// artifacts into a self-describing run directory.
    Pipeline {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 2048)]
        max_terms: usize,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        /// Independently seeded training runs to aggregate.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        model: ModelArgs,
    },
}

fn run(cli: Cli) -> Result<(), CommandError> {
    let threads = effective_threads(cli.threads);
    match cli.command {
        Command::Ingest { manifest, out, seed } => {
            let dataset = cmd_ingest(&manifest, &out, seed, threads)?;
            println!(
                "ingested {} documents across {} labels into {}",
                dataset.docs.len(),
                dataset.num_classes(),
                out.display()
            );
            Ok(())
        }
        Command::Synth {
            families,
            docs,
            len,
            vocab,
            seed,
            out_dir,
        } => {
            let manifest = cmd_synth(families, docs, len, vocab, seed, &out_dir)?;
            println!(
                "wrote {} trace files and {}",
                families * docs,
                manifest.display()
            );
            Ok(())
        }
        Command::Featurize {
            dataset,
            n,
            max_terms,
            vocab_out,
            out,
            test_fraction,
            seed,
        } => {
            let (n_train, n_test) = cmd_featurize(
                &dataset,
                n,
                max_terms,
                &vocab_out,
                &out,
                test_fraction,
                seed,
                threads,
            )?;
            println!("featurized {n_train} train / {n_test} test samples");
            Ok(())
        }
        Command::Train {
            features,
            seed,
            out,
            log,
            resume_capable,
            model,
        } => {
            let file = opseq::features::read_feature_file(&features)
                .map_err(CommandError::Features)?;
            let config = model.build(file.num_classes as usize, seed);
            let logs = cmd_train(
                &features,
                &config,
                &out,
                log.as_deref(),
                resume_capable,
                threads,
            )?;
            let last = logs.last().expect("at least one epoch");
            println!(
                "trained {} epochs: final loss {:.6}, train accuracy {:.4}",
                logs.len(),
                last.loss,
                last.train_acc
            );
            Ok(())
        }
        Command::Eval {
            model,
            features,
            report,
            run_dir,
        } => {
            let result = if let Some(dir) = run_dir {
                cmd_eval_run_dir(&dir, threads)?
            } else {
                cmd_eval(
                    &model.expect("clap enforces"),
                    &features.expect("clap enforces"),
                    &report.expect("clap enforces"),
                    None,
                    threads,
                )?
            };
            println!("accuracy {:.4}", result.accuracy);
            Ok(())
        }
        Command::SweepNgram {
            dataset,
            n_values,
            runs,
            seed,
            max_terms,
            test_fraction,
            out,
            model,
        } => {
            let ds = opseq::trace::read_dataset(&dataset).map_err(CommandError::Trace)?;
            let config = model.build(ds.num_classes(), seed);
            let rows = cmd_sweep_ngram(
                &dataset,
                &n_values,
                runs,
                seed,
                &config,
                max_terms,
                test_fraction,
                Some(&out),
                threads,
            )?;
            for row in &rows {
                println!(
                    "n={}: mean {:.4} max {:.4} min {:.4}",
                    row.n, row.mean_acc, row.max_acc, row.min_acc
                );
            }
            Ok(())
        }
        Command::Compare { reports, anova, out } => {
            let result = cmd_compare(&reports, anova, out.as_deref())?;
            for group in &result.models {
                println!("{}: mean accuracy {:.4}", group.name, group.mean);
            }
            if let Some(a) = &result.anova {
                println!(
                    "ANOVA: F = {:.6}, df = ({}, {}), p = {:.6}",
                    a.f, a.df1, a.df2, a.p
                );
            }
            Ok(())
        }
        Command::Gradcheck { seed } => {
            let (reports, ok) = cmd_gradcheck(seed);
            for r in &reports {
                println!(
                    "{:<22} worst relative error {:.3e}  [{}]",
                    r.layer,
                    r.max_rel_err,
                    if r.pass() { "PASS" } else { "FAIL" }
                );
            }
            if ok {
                Ok(())
            } else {
                Err(CommandError::Usage(
                    "gradient check failed; see per-layer report above".to_string(),
                ))
            }
        }
        Command::Pipeline {
            dataset,
            out_dir,
            n,
            max_terms,
            test_fraction,
            runs,
            seed,
            model,
        } => {
            let ds = opseq::trace::read_dataset(&dataset).map_err(CommandError::Trace)?;
            let run_config = RunConfig {
                format_version: RUN_FORMAT_VERSION,
                subcommand: "pipeline".to_string(),
                dataset: dataset.display().to_string(),
                n,
                max_terms,
                test_fraction,
                runs,
                seed,
                threads,
                model: model.build(ds.num_classes(), seed),
            };
            let outcome = cmd_pipeline(&dataset, &out_dir, &run_config, threads)?;
            println!(
                "run directory {} — held-out accuracy {:.4}",
                outcome.run_dir.display(),
                outcome.report.accuracy
            );
            if let Some(runs) = &outcome.report.runs {
                println!(
                    "runs: mean {:.4} max {:.4} min {:.4}",
                    runs.mean, runs.max, runs.min
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR:{}:{}", e.code(), e);
            ExitCode::FAILURE
        }
    }
}
