//! Feature construction over an n-gram vocabulary: document frequencies,
//! TF-IDF (tf · ln(N/df)), bag-of-words counts, one-hot presence vectors,
//! the concatenated X = [BoW ‖ TF-IDF] vector, and the 2-channel input grid
//! consumed by the classifier.

mod io;
mod tensorize;

pub use io::{
    read_feature_file, read_vocabulary, write_feature_file, write_vocabulary, FeatureFile,
    FeatureSample, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use tensorize::{assemble_input, InputTensor, Standardizer};

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::ngram::{extract_ngrams, GramCounts, NGram};
use crate::trace::TraceDocument;

#[derive(Debug)]
pub enum FeaturesError {
    EmptyCorpus,
    /// Term not present in the vocabulary.
    UnknownTerm(String),
    /// Document gram order differs from the vocabulary's.
    GramOrderMismatch { vocab: usize, doc: usize },
    LengthMismatch { expected: usize, found: usize },
    BadFormat(String),
    Io(std::io::Error),
}

impl fmt::Display for FeaturesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyCorpus => write!(f, "cannot build a vocabulary from zero documents"),
            Self::UnknownTerm(t) => write!(f, "term not in vocabulary: {t:?}"),
            Self::GramOrderMismatch { vocab, doc } => {
                write!(f, "vocabulary is over {vocab}-grams but document holds {doc}-grams")
            }
            Self::LengthMismatch { expected, found } => {
                write!(f, "vector length mismatch: expected {expected}, found {found}")
            }
            Self::BadFormat(msg) => write!(f, "bad feature artifact: {msg}"),
            Self::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for FeaturesError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for FeaturesError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

/// Closed n-gram vocabulary with per-term document frequencies.
///
/// Terms are ranked by descending document frequency with ties broken by
/// ascending canonical string, then truncated to the configured cap, so the
/// vocabulary is a deterministic function of the corpus contents alone.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    terms: Vec<String>,
    df: Vec<u32>,
    num_docs: u32,
    order: usize,
}

impl Vocabulary {
    /// Vocabulary size V.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Corpus document count N.
    pub fn num_docs(&self) -> u32 {
        self.num_docs
    }

    /// Gram order n.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn index_of(&self, canonical: &str) -> Option<usize> {
        self.index.get(canonical).copied()
    }

    /// Canonical term at a dense index.
    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn df_at(&self, index: usize) -> u32 {
        self.df[index]
    }

    /// Used by the TSV loader; validates density and df bounds.
    pub(crate) fn from_parts(
        terms: Vec<String>,
        df: Vec<u32>,
        num_docs: u32,
        order: usize,
    ) -> Result<Self, FeaturesError> {
        if terms.len() != df.len() {
            return Err(FeaturesError::BadFormat(
                "term and df column lengths differ".to_string(),
            ));
        }
        if let Some(bad) = df.iter().find(|&&d| d == 0 || d > num_docs) {
            return Err(FeaturesError::BadFormat(format!(
                "document frequency {bad} outside [1, {num_docs}]"
            )));
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(FeaturesError::BadFormat(format!("duplicate term {t:?}")));
            }
        }
        Ok(Self {
            index,
            terms,
            df,
            num_docs,
            order,
        })
    }
}

/// Dense per-document feature vector tagged with its construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Bow,
    Tfidf,
    OneHot,
    ConcatX,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Rank all n-grams by document frequency and keep the top `max_terms`.
///
/// df counts document SETS: a term occurring five times in one document
/// contributes 1.
pub fn build_vocabulary(
    docs: &[TraceDocument],
    n: usize,
    max_terms: usize,
) -> Result<Vocabulary, FeaturesError> {
    if docs.is_empty() {
        return Err(FeaturesError::EmptyCorpus);
    }
    if max_terms == 0 {
        return Err(FeaturesError::BadFormat("max_terms must be >= 1".to_string()));
    }
    let mut df: HashMap<String, u32> = HashMap::new();
    for doc in docs {
        let grams = extract_ngrams(&doc.tokens, n)
            .map_err(|e| FeaturesError::BadFormat(e.to_string()))?;
        let uniq: HashSet<String> = grams.iter().map(NGram::canonical).collect();
        for g in uniq {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, u32)> = df.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_terms);

    let (terms, df): (Vec<String>, Vec<u32>) = ranked.into_iter().unzip();
    Vocabulary::from_parts(terms, df, docs.len() as u32, n)
}

/// Raw term frequency: occurrences of `t` in the document, 0 if absent.
pub fn tf(doc: &GramCounts, t: &NGram) -> u64 {
    doc.get(t)
}

/// Inverse document frequency ln(N / df(t)). Errors on unknown terms rather
/// than smoothing.
pub fn idf(vocab: &Vocabulary, t: &NGram) -> Result<f64, FeaturesError> {
    let canonical = t.canonical();
    let i = vocab
        .index_of(&canonical)
        .ok_or(FeaturesError::UnknownTerm(canonical))?;
    Ok((f64::from(vocab.num_docs) / f64::from(vocab.df[i])).ln())
}

fn check_order(doc: &GramCounts, vocab: &Vocabulary) -> Result<(), FeaturesError> {
    if let Some(order) = doc.order() {
        if order != vocab.order {
            return Err(FeaturesError::GramOrderMismatch {
                vocab: vocab.order,
                doc: order,
            });
        }
    }
    Ok(())
}

/// TF-IDF vector: values[i] = tf(doc, term_i) · ln(N / df(term_i)).
/// Out-of-vocabulary grams are dropped.
pub fn tfidf_vector(doc: &GramCounts, vocab: &Vocabulary) -> Result<FeatureVector, FeaturesError> {
    check_order(doc, vocab)?;
    let mut values = vec![0.0; vocab.len()];
    for (gram, &count) in doc.counts() {
        if let Some(i) = vocab.index_of(&gram.canonical()) {
            let idf = (f64::from(vocab.num_docs) / f64::from(vocab.df[i])).ln();
            values[i] = count as f64 * idf;
        }
    }
    Ok(FeatureVector {
        kind: FeatureKind::Tfidf,
        values,
    })
}

/// Bag-of-words vector of raw in-vocabulary counts.
pub fn bow_vector(doc: &GramCounts, vocab: &Vocabulary) -> Result<FeatureVector, FeaturesError> {
    check_order(doc, vocab)?;
    let mut values = vec![0.0; vocab.len()];
    for (gram, &count) in doc.counts() {
        if let Some(i) = vocab.index_of(&gram.canonical()) {
            values[i] = count as f64;
        }
    }
    Ok(FeatureVector {
        kind: FeatureKind::Bow,
        values,
    })
}

/// Binary presence vector: values[i] = 1 iff term_i occurs in the document.
pub fn onehot_vector(doc: &GramCounts, vocab: &Vocabulary) -> Result<FeatureVector, FeaturesError> {
    check_order(doc, vocab)?;
    let mut values = vec![0.0; vocab.len()];
    for (gram, &count) in doc.counts() {
        if count > 0 {
            if let Some(i) = vocab.index_of(&gram.canonical()) {
                values[i] = 1.0;
            }
        }
    }
    Ok(FeatureVector {
        kind: FeatureKind::OneHot,
        values,
    })
}

/// X = [BoW ‖ TF-IDF]: length-2V vector, BoW half first.
pub fn concat_x(bow: &FeatureVector, tfidf: &FeatureVector) -> Result<FeatureVector, FeaturesError> {
    if bow.len() != tfidf.len() {
        return Err(FeaturesError::LengthMismatch {
            expected: bow.len(),
            found: tfidf.len(),
        });
    }
    let mut values = Vec::with_capacity(bow.len() * 2);
    values.extend_from_slice(&bow.values);
    values.extend_from_slice(&tfidf.values);
    Ok(FeatureVector {
        kind: FeatureKind::ConcatX,
        values,
    })
}
