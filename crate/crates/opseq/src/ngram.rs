//! Sliding-window token n-grams and their occurrence counts.
//!
//! An n-gram here is a contiguous window of `n` trace tokens. A document of
//! `L` tokens yields exactly `L - n + 1` windows (none when `L < n`).

use std::collections::HashMap;
use std::fmt;

use crate::trace::Token;

/// Valid gram orders. Values outside this range are rejected.
pub const MIN_N: usize = 1;
pub const MAX_N: usize = 10;

/// Separator byte used by the canonical string form. Tokens contain no
/// whitespace or control bytes, so joining with 0x1F is unambiguous.
pub const CANONICAL_SEPARATOR: u8 = 0x1F;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NGramError {
    /// `n` outside `[MIN_N, MAX_N]`.
    InvalidN(usize),
    /// A gram list mixed different orders.
    MixedN { expected: usize, found: usize },
}

impl fmt::Display for NGramError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidN(n) => write!(f, "gram order {n} outside [{MIN_N}, {MAX_N}]"),
            Self::MixedN { expected, found } => {
                write!(f, "mixed gram orders: expected {expected}, found {found}")
            }
        }
    }
}

impl std::error::Error for NGramError {}

/// An ordered window of `n` tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NGram {
    terms: Vec<Token>,
}

impl NGram {
    pub fn new(terms: Vec<Token>) -> Result<Self, NGramError> {
        if terms.is_empty() || terms.len() > MAX_N {
            return Err(NGramError::InvalidN(terms.len()));
        }
        Ok(Self { terms })
    }

    pub fn order(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Token] {
        &self.terms
    }

    /// Canonical string form: token texts joined by the 0x1F separator.
    /// Injective because tokens never contain whitespace or control bytes.
    pub fn canonical(&self) -> String {
        let mut out = String::with_capacity(
            self.terms.iter().map(|t| t.text().len()).sum::<usize>() + self.terms.len(),
        );
        for (i, term) in self.terms.iter().enumerate() {
            if i > 0 {
                out.push(CANONICAL_SEPARATOR as char);
            }
            out.push_str(term.text());
        }
        out
    }
}

/// Multiplicity counts for a list of grams of one order.
#[derive(Debug, Clone, PartialEq)]
pub struct GramCounts {
    counts: HashMap<NGram, u64>,
    total: u64,
    order: Option<usize>,
}

impl GramCounts {
    pub fn counts(&self) -> &HashMap<NGram, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Gram order, `None` for an empty count set.
    pub fn order(&self) -> Option<usize> {
        self.order
    }

    pub fn get(&self, gram: &NGram) -> u64 {
        self.counts.get(gram).copied().unwrap_or(0)
    }
}

/// All `L - n + 1` contiguous windows of `tokens`, in order. Empty when
/// `L < n`.
pub fn extract_ngrams(tokens: &[Token], n: usize) -> Result<Vec<NGram>, NGramError> {
    if !(MIN_N..=MAX_N).contains(&n) {
        return Err(NGramError::InvalidN(n));
    }
    if tokens.len() < n {
        return Ok(Vec::new());
    }
    Ok(tokens
        .windows(n)
        .map(|w| NGram { terms: w.to_vec() })
        .collect())
}

/// Tally gram multiplicities. All grams must share one order.
pub fn count_grams(grams: &[NGram]) -> Result<GramCounts, NGramError> {
    let mut counts: HashMap<NGram, u64> = HashMap::new();
    let mut order = None;
    for gram in grams {
        match order {
            None => order = Some(gram.order()),
            Some(expected) if expected != gram.order() => {
                return Err(NGramError::MixedN {
                    expected,
                    found: gram.order(),
                })
            }
            _ => {}
        }
        *counts.entry(gram.clone()).or_insert(0) += 1;
    }
    Ok(GramCounts {
        counts,
        total: grams.len() as u64,
        order,
    })
}
