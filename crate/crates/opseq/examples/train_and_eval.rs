//! Desk-scale end-to-end run through the library API: synthesize a corpus,
//! split it, featurize at n = 8, train the small CNN-LSTM, and print the
//! held-out metrics report.
//!
//! ```bash
//! cargo run --release --example train_and_eval
//! ```

use opseq::commands::featurize_split;
use opseq::eval::report::EvalReport;
use opseq::eval::{confusion, metrics};
use opseq::nn::tensor::Tensor;
use opseq::nn::train::{predict, train, Sample};
use opseq::nn::ModelConfig;
use opseq::rng::substream;
use opseq::trace::{generate_synthetic_corpus, stratified_split, Dataset};

fn to_samples(tensors: &[(u32, opseq::features::InputTensor)]) -> Vec<Sample<f32>> {
    tensors
        .iter()
        .map(|(label, t)| Sample {
            label: *label,
            input: Tensor::from_vec(&[t.channels, t.height, t.width], t.data.clone()),
        })
        .collect()
}

fn main() {
    let seed = 11;
    let corpus = generate_synthetic_corpus(4, 60, 200, 560, seed).unwrap();
    let dataset = Dataset::from_docs(corpus, seed);
    let (train_docs, test_docs) =
        stratified_split(&dataset.docs, 0.2, substream(seed, "split")).unwrap();
    println!(
        "{} train / {} test documents across {} families",
        train_docs.len(),
        test_docs.len(),
        dataset.num_classes()
    );

    let split = featurize_split(&train_docs, &test_docs, 8, 512, 4, 1).unwrap();
    println!(
        "vocabulary V={}, grid {}x{}",
        split.vocab.len(),
        split.train[0].1.height,
        split.train[0].1.width
    );

    let config = ModelConfig::small(dataset.num_classes(), seed);
    let train_samples = to_samples(&split.train);
    let test_samples = to_samples(&split.test);

    let (state, logs) = train(&train_samples, &config, 2, 1).unwrap();
    for log in logs.iter().step_by(4) {
        println!(
            "epoch {:>2}: loss {:.4}, train accuracy {:.3}",
            log.epoch, log.loss, log.train_acc
        );
    }

    let preds = predict(&state, &test_samples, 1).unwrap();
    let truths: Vec<usize> = test_samples.iter().map(|s| s.label as usize).collect();
    let cm = confusion(&preds, &truths, dataset.num_classes()).unwrap();
    let m = metrics(&cm).unwrap();
    let report = EvalReport::new(&cm, &m, &dataset.labels);
    println!(
        "\nheld-out accuracy {:.4}, macro F1 {:.4}",
        report.accuracy, report.macro_avg.f1
    );
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
