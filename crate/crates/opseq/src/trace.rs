//! Trace ingestion: opcode/API-call trace files, dataset manifests, labeled
//! token sequences, stratified splits, and a seeded synthetic corpus
//! generator for desk-scale experiments.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::{chacha, substream_indexed};

pub const DATASET_MAGIC: &[u8; 4] = b"OPSD";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug)]
pub enum TraceError {
    /// A trace produced zero tokens.
    EmptyTrace { doc_id: String },
    /// A trace file was not valid UTF-8.
    InvalidEncoding { doc_id: String },
    /// A token contained whitespace or control bytes.
    InvalidToken { doc_id: String, token: String },
    /// A manifest entry did not resolve to a readable file.
    MissingFile { path: PathBuf },
    /// A manifest row had the wrong column count.
    MalformedRow { line: u64 },
    /// A manifest listed the same path twice.
    DuplicatePath { path: PathBuf },
    /// A label had too few documents for a stratified split.
    LabelTooSmall { label: String, count: usize },
    /// Invalid generator or split parameters.
    InvalidParams(String),
    /// Dataset file carried an unexpected magic or version.
    BadFormat(String),
    Io(io::Error),
}

impl fmt::Display for TraceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyTrace { doc_id } => write!(f, "trace '{doc_id}' contains no tokens"),
            Self::InvalidEncoding { doc_id } => write!(f, "trace '{doc_id}' is not valid UTF-8"),
            Self::InvalidToken { doc_id, token } => {
                write!(f, "trace '{doc_id}' contains invalid token {token:?}")
            }
            Self::MissingFile { path } => write!(f, "trace file not readable: {}", path.display()),
            Self::MalformedRow { line } => {
                write!(f, "manifest row at line {line} has wrong column count")
            }
            Self::DuplicatePath { path } => {
                write!(f, "manifest lists path twice: {}", path.display())
            }
            Self::LabelTooSmall { label, count } => {
                write!(f, "label '{label}' has only {count} document(s); need at least 2")
            }
            Self::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            Self::BadFormat(msg) => write!(f, "bad dataset file: {msg}"),
            Self::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl std::error::Error for TraceError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for TraceError {
    fn from(e: io::Error) -> Self {
        Self::Io(e)
    }
}

/// One opcode mnemonic or API name, preserved byte-for-byte from the input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token {
    text: String,
}

impl Token {
    /// Rejects empty strings and anything containing whitespace or control
    /// characters (the canonical n-gram form depends on both being absent).
    pub fn new(text: &str) -> Result<Self, String> {
        if text.is_empty() {
            return Err("empty token".to_string());
        }
        if text.chars().any(|c| c.is_whitespace() || c.is_control()) {
            return Err(format!("token {text:?} contains whitespace or control bytes"));
        }
        Ok(Self {
            text: text.to_string(),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// A malware family (or benign) label with its dense index.
///
/// Indices are assigned by lexicographic order of the distinct names in a
/// manifest, so they are stable across loads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyLabel {
    pub name: String,
    pub index: usize,
}

/// One sample: an ordered token sequence plus its family label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceDocument {
    pub doc_id: String,
    pub label: FamilyLabel,
    pub tokens: Vec<Token>,
}

impl TraceDocument {
    /// Text form whose `parse_trace` round-trip recovers the token list.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(t.text());
        }
        out
    }
}

/// Parsed `path,label` manifest. Paths are resolved against the manifest's
/// directory and checked for readability at load time.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub entries: Vec<(PathBuf, String)>,
    pub seed: u64,
}

/// An ingested, labeled corpus. Label names are sorted lexicographically and
/// indexed densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub labels: Vec<String>,
    pub docs: Vec<TraceDocument>,
    pub seed: u64,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    /// Builds the dense label table from documents, reindexing labels by
    /// lexicographic name order.
    pub fn from_docs(docs: Vec<TraceDocument>, seed: u64) -> Self {
        let mut names: Vec<String> = docs
            .iter()
            .map(|d| d.label.name.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        names.sort();
        let index: HashMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let docs = docs
            .into_iter()
            .map(|mut d| {
                d.label.index = index[d.label.name.as_str()];
                d
            })
            .collect();
        Self {
            labels: names,
            docs,
            seed,
        }
    }
}

/// Split a UTF-8 trace into its maximal whitespace-delimited token runs.
pub fn parse_trace(
    raw_bytes: &[u8],
    doc_id: &str,
    label: FamilyLabel,
) -> Result<TraceDocument, TraceError> {
    let text = std::str::from_utf8(raw_bytes).map_err(|_| TraceError::InvalidEncoding {
        doc_id: doc_id.to_string(),
    })?;
    let tokens: Vec<Token> = text
        .split_whitespace()
        .map(|t| {
            Token::new(t).map_err(|_| TraceError::InvalidToken {
                doc_id: doc_id.to_string(),
                token: t.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    if tokens.is_empty() {
        return Err(TraceError::EmptyTrace {
            doc_id: doc_id.to_string(),
        });
    }
    Ok(TraceDocument {
        doc_id: doc_id.to_string(),
        label,
        tokens,
    })
}

/// Load a `path,label` CSV manifest. Rejects malformed rows and duplicate
/// paths; verifies every path resolves to a readable file and that each of
/// at least 2 labels has at least 2 documents.
pub fn load_manifest(path: &Path, seed: u64) -> Result<DatasetManifest, TraceError> {
    let file = fs::File::open(path).map_err(|_| TraceError::MissingFile {
        path: path.to_path_buf(),
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    {
        let headers = reader.headers().map_err(|e| csv_error(&e))?;
        if headers.len() != 2 || &headers[0] != "path" || &headers[1] != "label" {
            return Err(TraceError::MalformedRow { line: 1 });
        }
    }

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    let mut label_counts: HashMap<String, usize> = HashMap::new();
    for result in reader.records() {
        let record = result.map_err(|e| csv_error(&e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(TraceError::MalformedRow { line });
        }
        let rel = PathBuf::from(&record[0]);
        let resolved = if rel.is_absolute() {
            rel.clone()
        } else {
            base.join(&rel)
        };
        if !seen.insert(rel.clone()) {
            return Err(TraceError::DuplicatePath { path: rel });
        }
        if !resolved.is_file() {
            return Err(TraceError::MissingFile { path: resolved });
        }
        *label_counts.entry(record[1].to_string()).or_insert(0) += 1;
        entries.push((resolved, record[1].to_string()));
    }

    if label_counts.len() < 2 {
        return Err(TraceError::InvalidParams(format!(
            "manifest needs at least 2 distinct labels, found {}",
            label_counts.len()
        )));
    }
    if let Some((label, count)) = label_counts.iter().find(|(_, c)| **c < 2) {
        return Err(TraceError::LabelTooSmall {
            label: label.clone(),
            count: *count,
        });
    }

    Ok(DatasetManifest { entries, seed })
}

fn csv_error(e: &csv::Error) -> TraceError {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { pos, .. } => TraceError::MalformedRow {
            line: pos.as_ref().map(|p| p.line()).unwrap_or(0),
        },
        _ => TraceError::BadFormat(format!("manifest parse error: {e}")),
    }
}

/// Deterministic stratified split. Per label, `round(test_fraction * count)`
/// documents (clamped to `[1, count - 1]`) go to the test side; relative
/// document order is preserved within each side.
pub fn stratified_split(
    docs: &[TraceDocument],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<TraceDocument>, Vec<TraceDocument>), TraceError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(TraceError::InvalidParams(format!(
            "test_fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut by_label: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, doc) in docs.iter().enumerate() {
        by_label.entry(doc.label.index).or_default().push(i);
    }
    for (_, members) in by_label.iter() {
        if members.len() < 2 {
            let doc = &docs[members[0]];
            return Err(TraceError::LabelTooSmall {
                label: doc.label.name.clone(),
                count: members.len(),
            });
        }
    }

    let mut test_flags = vec![false; docs.len()];
    let mut labels: Vec<usize> = by_label.keys().copied().collect();
    labels.sort_unstable();
    for label in labels {
        let members = &by_label[&label];
        let count = members.len();
        let want = (test_fraction * count as f64).round() as usize;
        let n_test = want.clamp(1, count - 1);
        let mut shuffled = members.clone();
        let mut rng = chacha(substream_indexed(seed, "split-label", label as u64));
        shuffled.shuffle(&mut rng);
        for &idx in shuffled.iter().take(n_test) {
            test_flags[idx] = true;
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, doc) in docs.iter().enumerate() {
        if test_flags[i] {
            test.push(doc.clone());
        } else {
            train.push(doc.clone());
        }
    }
    Ok((train, test))
}

const PHRASE_LEN: usize = 8;
const SIG_PER_FAMILY: usize = 4;
const SIGNATURE_MASS: f64 = 0.4;
/// Signature dictionary sizes by family index. Widths are geometric so
/// per-phrase counts differ by 2x steps, and equal widths sit far apart in
/// the family (hence vocabulary block) order.
const SIG_VARIANT_WIDTHS: [usize; 8] = [3, 3, 3, 3, 3, 3, 3, 3];
const BG_TOKEN_REPEATS: usize = 8;

/// Synthetic labeled corpus for desk-scale experiments.
///
/// Each family owns 4 disjoint signature tokens carrying 40% of its token
/// mass, emitted as 8-token signature phrases from a fixed per-family
/// dictionary. Family f's dictionary holds (f mod 8) + 1 variants, and
/// documents with enough phrase slots contain every variant, so all
/// signature grams of a family share one document frequency and sort as a
/// contiguous lexicographic block in the vocabulary whose width and
/// per-document counts are family-specific. The remaining 60% of positions
/// are filled with phrases from a shared background dictionary (each
/// background token appearing in exactly 8 dictionary slots), which keeps
/// non-signature vocabulary terms dense and family-independent. Recurring
/// signature phrases make families 8-gram-separable by construction, while
/// at the token level the shared background out-ranks the signature tokens
/// on document frequency.
pub fn generate_synthetic_corpus(
    num_families: usize,
    docs_per_family: usize,
    doc_length: usize,
    vocab_size: usize,
    seed: u64,
) -> Result<Vec<TraceDocument>, TraceError> {
    if num_families == 0 || docs_per_family == 0 || doc_length == 0 {
        return Err(TraceError::InvalidParams(
            "family, document, and length counts must all be >= 1".to_string(),
        ));
    }
    let sig_total = num_families * SIG_PER_FAMILY;
    if vocab_size <= sig_total {
        return Err(TraceError::InvalidParams(format!(
            "vocab_size {vocab_size} must exceed {sig_total} \
             (4 signature tokens per family plus at least one background token)"
        )));
    }
    let background: Vec<Token> = (0..vocab_size - sig_total)
        .map(|i| Token::new(&format!("op{i:04}")).unwrap())
        .collect();
    let signatures: Vec<Vec<Token>> = (0..num_families)
        .map(|f| {
            (0..SIG_PER_FAMILY)
                .map(|j| Token::new(&format!("sig{f:03}_{j}")).unwrap())
                .collect()
        })
        .collect();

    let mut rng = chacha(seed);

    // Balanced background phrase dictionary: every background token fills
    // exactly BG_TOKEN_REPEATS shuffled slots, chunked into 8-token phrases.
    let mut slots: Vec<usize> = (0..background.len())
        .flat_map(|i| std::iter::repeat(i).take(BG_TOKEN_REPEATS))
        .collect();
    slots.shuffle(&mut rng);
    let bg_phrases: Vec<Vec<usize>> = slots.chunks(PHRASE_LEN).map(<[usize]>::to_vec).collect();

    // Per-family signature phrase dictionaries: every position uniform over
    // the family's 4 signature tokens; dictionary size follows the width
    // pattern.
    let sig_variants: Vec<Vec<Vec<Token>>> = signatures
        .iter()
        .enumerate()
        .map(|(f, sig)| {
            (0..SIG_VARIANT_WIDTHS[f % SIG_VARIANT_WIDTHS.len()])
                .map(|_| {
                    (0..PHRASE_LEN)
                        .map(|_| sig[rng.gen_range(0..SIG_PER_FAMILY)].clone())
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut docs = Vec::with_capacity(num_families * docs_per_family);
    for (f, variants) in sig_variants.iter().enumerate() {
        let name = format!("family{f:03}");
        for d in 0..docs_per_family {
            let tokens = synth_doc(doc_length, variants, &background, &bg_phrases, &mut rng);
            docs.push(TraceDocument {
                doc_id: format!("family{f:03}_doc{d:05}"),
                label: FamilyLabel {
                    name: name.clone(),
                    index: f,
                },
                tokens,
            });
        }
    }
    Ok(docs)
}

fn synth_doc(
    len: usize,
    variants: &[Vec<Token>],
    background: &[Token],
    bg_phrases: &[Vec<usize>],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<Token> {
    if len < PHRASE_LEN {
        // Too short for a full phrase; cycle signature tokens instead.
        return (0..len)
            .map(|i| variants[0][i % PHRASE_LEN].clone())
            .collect();
    }
    // Phrase count: 40% expected signature mass, stochastic rounding, at
    // least one phrase per document.
    let target = SIGNATURE_MASS * len as f64 / PHRASE_LEN as f64;
    let base = target.floor();
    let mut k = base as usize + usize::from(rng.gen::<f64>() < target - base);
    k = k.clamp(1, len / PHRASE_LEN);

    // Non-overlapping phrase placement by rejection, falling back to a
    // first-fit scan if the document is nearly saturated.
    let mut starts: Vec<usize> = Vec::with_capacity(k);
    let mut attempts = 0;
    while starts.len() < k && attempts < 10_000 {
        attempts += 1;
        let s = rng.gen_range(0..=len - PHRASE_LEN);
        if starts
            .iter()
            .all(|&t| s + PHRASE_LEN <= t || t + PHRASE_LEN <= s)
        {
            starts.push(s);
        }
    }
    let mut scan = 0;
    while starts.len() < k {
        if starts
            .iter()
            .all(|&t| scan + PHRASE_LEN <= t || t + PHRASE_LEN <= scan)
        {
            starts.push(scan);
        }
        scan += PHRASE_LEN;
    }

    // The first 8 placed phrases cover every signature variant once (in
    // seeded order); extras are drawn uniformly.
    let mut variant_order: Vec<usize> = (0..variants.len()).collect();
    variant_order.shuffle(rng);
    let mut covered = vec![false; len];
    let mut tokens: Vec<Option<Token>> = vec![None; len];
    for (event, &s) in starts.iter().enumerate() {
        let v = if event < variant_order.len() {
            variant_order[event]
        } else {
            rng.gen_range(0..variants.len())
        };
        for (j, tok) in variants[v].iter().enumerate() {
            covered[s + j] = true;
            tokens[s + j] = Some(tok.clone());
        }
    }

    // Fill the gaps with background phrases, restarting at each gap so full
    // phrase windows stay aligned; a fresh phrase is drawn whenever the
    // previous one is exhausted.
    let mut i = 0;
    while i < len {
        if covered[i] {
            i += 1;
            continue;
        }
        let mut offset = PHRASE_LEN; // force a draw at gap start
        let mut phrase: &[usize] = &[];
        while i < len && !covered[i] {
            if offset == PHRASE_LEN {
                phrase = &bg_phrases[rng.gen_range(0..bg_phrases.len())];
                offset = 0;
            }
            tokens[i] = Some(background[phrase[offset]].clone());
            offset += 1;
            i += 1;
        }
    }
    tokens.into_iter().map(Option::unwrap).collect()
}

/// Write a dataset in the little-endian `OPSD` container.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<(), TraceError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(DATASET_MAGIC);
    buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    buf.extend_from_slice(&dataset.seed.to_le_bytes());
    buf.extend_from_slice(&(dataset.labels.len() as u32).to_le_bytes());
    for label in &dataset.labels {
        write_str(&mut buf, label);
    }
    buf.extend_from_slice(&(dataset.docs.len() as u32).to_le_bytes());
    for doc in &dataset.docs {
        write_str(&mut buf, &doc.doc_id);
        buf.extend_from_slice(&(doc.label.index as u32).to_le_bytes());
        buf.extend_from_slice(&(doc.tokens.len() as u32).to_le_bytes());
        for tok in &doc.tokens {
            write_str(&mut buf, tok.text());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Read a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<Dataset, TraceError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != DATASET_MAGIC {
        return Err(TraceError::BadFormat(format!(
            "expected magic {DATASET_MAGIC:?}, found {magic:?}"
        )));
    }
    let version = cur.u32()?;
    if version != DATASET_VERSION {
        return Err(TraceError::BadFormat(format!(
            "unsupported dataset version {version}"
        )));
    }
    let seed = cur.u64()?;
    let num_labels = cur.u32()? as usize;
    let mut labels = Vec::with_capacity(num_labels);
    for _ in 0..num_labels {
        labels.push(cur.string()?);
    }
    let num_docs = cur.u32()? as usize;
    let mut docs = Vec::with_capacity(num_docs);
    for _ in 0..num_docs {
        let doc_id = cur.string()?;
        let index = cur.u32()? as usize;
        if index >= labels.len() {
            return Err(TraceError::BadFormat(format!(
                "label index {index} out of range"
            )));
        }
        let num_tokens = cur.u32()? as usize;
        let mut tokens = Vec::with_capacity(num_tokens);
        for _ in 0..num_tokens {
            let text = cur.string()?;
            tokens.push(
                Token::new(&text)
                    .map_err(|e| TraceError::BadFormat(format!("bad stored token: {e}")))?,
            );
        }
        docs.push(TraceDocument {
            doc_id,
            label: FamilyLabel {
                name: labels[index].clone(),
                index,
            },
            tokens,
        });
    }
    Ok(Dataset { labels, docs, seed })
}

fn write_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TraceError> {
        if self.pos + n > self.bytes.len() {
            return Err(TraceError::BadFormat("truncated dataset file".to_string()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, TraceError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, TraceError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, TraceError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| TraceError::BadFormat("non-UTF-8 string in dataset".to_string()))
    }
}
