//! Generate a synthetic labeled trace corpus and inspect its structure:
//! family sizes, signature-token mass, and a sample document.
//!
//! ```bash
//! cargo run --example synth_corpus
//! ```

use opseq::trace::generate_synthetic_corpus;

fn main() {
    let families = 4;
    let docs_per_family = 25;
    let doc_length = 120;
    let vocab_size = 200;
    let corpus =
        generate_synthetic_corpus(families, docs_per_family, doc_length, vocab_size, 7).unwrap();

    println!(
        "generated {} documents ({} families x {} docs, {} tokens each)\n",
        corpus.len(),
        families,
        docs_per_family,
        doc_length
    );

    for f in 0..families {
        let docs: Vec<_> = corpus.iter().filter(|d| d.label.index == f).collect();
        let sig_prefix = format!("sig{f:03}_");
        let total: usize = docs.iter().map(|d| d.tokens.len()).sum();
        let sig: usize = docs
            .iter()
            .map(|d| {
                d.tokens
                    .iter()
                    .filter(|t| t.text().starts_with(&sig_prefix))
                    .count()
            })
            .sum();
        println!(
            "{}: {} docs, signature mass {:.1}% (target 40%)",
            docs[0].label.name,
            docs.len(),
            100.0 * sig as f64 / total as f64
        );
    }

    let doc = &corpus[0];
    let preview: Vec<&str> = doc.tokens.iter().take(24).map(|t| t.text()).collect();
    println!("\nfirst 24 tokens of {}:", doc.doc_id);
    println!("  {}", preview.join(" "));
}
