//! One-way ANOVA over per-run accuracy groups, the model-comparison
//! protocol behind the `compare` subcommand: F = MS_between / MS_within and
//! the right-tail p-value from the F distribution.
//!
//! ```bash
//! cargo run --example anova_compare
//! ```

use opseq::eval::{aggregate_runs, anova_oneway, f_cdf};

fn main() {
    // Per-run held-out accuracies for three models, seven runs each.
    let models = [
        ("cnn-lstm-3", vec![0.991, 0.994, 0.990, 0.993, 0.992, 0.989, 0.995]),
        ("gru-baseline", vec![0.902, 0.893, 0.911, 0.887, 0.905, 0.899, 0.896]),
        ("rnn-baseline", vec![0.861, 0.847, 0.852, 0.870, 0.858, 0.849, 0.866]),
    ];

    println!("per-model run aggregation (mean / max / min):");
    for (name, runs) in &models {
        let (mean, max, min) = aggregate_runs(runs).unwrap();
        println!("  {name:<14} {mean:.4} / {max:.4} / {min:.4}");
    }

    let groups: Vec<Vec<f64>> = models.iter().map(|(_, runs)| runs.clone()).collect();
    let result = anova_oneway(&groups).unwrap();
    println!(
        "\none-way ANOVA: F = {:.3}, df = ({}, {}), p = {:.3e}",
        result.f, result.df_between, result.df_within, result.p
    );
    if result.p < 0.01 {
        println!("the mean accuracies differ significantly (p < 0.01)");
    }

    // The underlying CDF is available directly.
    println!(
        "\nF-distribution sanity: CDF(1.0; 1, 4) = {:.6}",
        f_cdf(1.0, 1, 4).unwrap()
    );
}
