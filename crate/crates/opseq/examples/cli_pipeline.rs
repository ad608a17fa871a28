//! Drive the full CLI-equivalent pipeline through the library: synth ->
//! ingest -> pipeline run directory, then re-evaluate the run directory
//! from its own manifest, demonstrating the self-describing layout.
//!
//! ```bash
//! cargo run --release --example cli_pipeline
//! ```

use opseq::commands::{
    cmd_eval_run_dir, cmd_ingest, cmd_pipeline, cmd_synth, RunConfig, RUN_FORMAT_VERSION,
};
use opseq::nn::ModelConfig;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = cmd_synth(4, 60, 200, 560, 21, dir.path()).unwrap();
    println!("synth corpus + manifest at {}", manifest.display());

    let dataset = dir.path().join("dataset.bin");
    let ds = cmd_ingest(&manifest, &dataset, 21, 1).unwrap();
    println!("ingested {} docs, labels {:?}", ds.docs.len(), ds.labels);

    let model = ModelConfig::small(ds.num_classes(), 21);
    let config = RunConfig {
        format_version: RUN_FORMAT_VERSION,
        subcommand: "pipeline".to_string(),
        dataset: dataset.display().to_string(),
        n: 8,
        max_terms: 512,
        test_fraction: 0.2,
        runs: 2,
        seed: 21,
        threads: 1,
        model,
    };
    let run_dir = dir.path().join("run");
    let outcome = cmd_pipeline(&dataset, &run_dir, &config, 1).unwrap();
    println!(
        "\npipeline finished: accuracy {:.4} (runs mean {:.4})",
        outcome.report.accuracy,
        outcome.report.runs.as_ref().unwrap().mean
    );

    println!("\nrun directory contents:");
    let mut names: Vec<String> = std::fs::read_dir(&run_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        println!("  {name}");
    }

    // Re-evaluation needs nothing beyond the directory path.
    let report = cmd_eval_run_dir(&run_dir, 1).unwrap();
    println!("\nre-evaluated from manifest.json: accuracy {:.4}", report.accuracy);
}
