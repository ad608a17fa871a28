//! Walk one document through the feature pipeline by hand: parse the trace,
//! extract 2-grams, build a vocabulary over a tiny corpus, compute BoW,
//! TF-IDF, and one-hot vectors, concatenate X = [BoW ‖ TF-IDF], and
//! assemble the 2-channel input grid.
//!
//! ```bash
//! cargo run --example featurize_traces
//! ```

use opseq::features::{
    assemble_input, bow_vector, build_vocabulary, concat_x, onehot_vector, tfidf_vector,
    Standardizer,
};
use opseq::ngram::{count_grams, extract_ngrams};
use opseq::trace::{parse_trace, FamilyLabel};

fn main() {
    let label = |name: &str, index| FamilyLabel {
        name: name.to_string(),
        index,
    };
    let traces: [(&str, &[u8]); 3] = [
        ("ransom_a", b"NtCreateFile NtWriteFile NtClose NtCreateFile NtWriteFile"),
        ("ransom_b", b"NtCreateFile NtWriteFile NtEncryptKey NtClose"),
        ("benign_a", b"NtOpenKey NtQueryValueKey NtClose push mov call"),
    ];
    let docs: Vec<_> = traces
        .iter()
        .enumerate()
        .map(|(i, (id, bytes))| parse_trace(bytes, id, label("sample", i % 2)).unwrap())
        .collect();

    let n = 2;
    let vocab = build_vocabulary(&docs, n, 32).unwrap();
    println!("vocabulary over {} docs at n={n}: V={}", docs.len(), vocab.len());
    for i in 0..vocab.len().min(6) {
        println!(
            "  [{i}] df={} {}",
            vocab.df_at(i),
            vocab.term(i).replace('\u{1f}', " → ")
        );
    }

    let counts = count_grams(&extract_ngrams(&docs[0].tokens, n).unwrap()).unwrap();
    let bow = bow_vector(&counts, &vocab).unwrap();
    let tfidf = tfidf_vector(&counts, &vocab).unwrap();
    let onehot = onehot_vector(&counts, &vocab).unwrap();
    let x = concat_x(&bow, &tfidf).unwrap();

    println!("\ndocument {}:", docs[0].doc_id);
    println!("  bow     = {:?}", &bow.values);
    println!("  tfidf   = {:?}", &tfidf.values);
    println!("  one-hot = {:?}", &onehot.values);
    println!("  |X| = 2V = {}", x.len());

    let tensor = assemble_input(&x, &onehot, &Standardizer::Identity).unwrap();
    println!(
        "\ninput tensor: {} channels, {}x{} grid (ceil sqrt 2V), {} values",
        tensor.channels,
        tensor.height,
        tensor.width,
        tensor.data.len()
    );
}
