//! On-disk feature artifacts.
//!
//! Vocabulary: TSV with header `term\tindex\tdf`, one metadata line
//! `#N=<int>\t#n=<int>\t#mu_sigma=<path>`, then one row per term in index
//! order. Canonical 0x1F separators are escaped as `\x1f` (and `\` as
//! `\\`). The standardization statistics live in the sibling file named by
//! the metadata line.
//!
//! Feature matrices: little-endian binary with header (magic `OPSQ`,
//! version u32, count u32, channels u32, H u32, W u32, K u32), then per
//! sample a label u32 followed by channels·H·W float32 values.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::tensorize::{InputTensor, Standardizer};
use super::{FeaturesError, Vocabulary};

pub const FEATURE_MAGIC: &[u8; 4] = b"OPSQ";
pub const FEATURE_VERSION: u32 = 1;
pub const STATS_MAGIC: &[u8; 4] = b"OPSS";
pub const STATS_VERSION: u32 = 1;

fn escape_term(term: &str) -> String {
    let mut out = String::with_capacity(term.len());
    for c in term.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\u{1f}' => out.push_str("\\x1f"),
            other => out.push(other),
        }
    }
    out
}

fn unescape_term(escaped: &str) -> Result<String, FeaturesError> {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('x') => {
                let hex: String = chars.by_ref().take(2).collect();
                if hex != "1f" {
                    return Err(FeaturesError::BadFormat(format!(
                        "unknown escape \\x{hex} in vocabulary term"
                    )));
                }
                out.push('\u{1f}');
            }
            other => {
                return Err(FeaturesError::BadFormat(format!(
                    "unknown escape \\{other:?} in vocabulary term"
                )))
            }
        }
    }
    Ok(out)
}

/// Write the vocabulary TSV and its standardization-statistics sibling.
pub fn write_vocabulary(
    path: &Path,
    vocab: &Vocabulary,
    standardizer: &Standardizer,
) -> Result<(), FeaturesError> {
    let stats_name = format!(
        "{}.musigma",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "vocab".to_string())
    );
    let mut out = String::new();
    out.push_str("term\tindex\tdf\n");
    out.push_str(&format!(
        "#N={}\t#n={}\t#mu_sigma={}\n",
        vocab.num_docs(),
        vocab.order(),
        stats_name
    ));
    for i in 0..vocab.len() {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            escape_term(vocab.term(i)),
            i,
            vocab.df_at(i)
        ));
    }
    fs::write(path, out.as_bytes())?;

    let stats_path = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&stats_name);
    write_stats(&stats_path, standardizer)
}

/// Read a vocabulary TSV and its standardization statistics.
pub fn read_vocabulary(path: &Path) -> Result<(Vocabulary, Standardizer), FeaturesError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| FeaturesError::BadFormat("empty vocabulary file".to_string()))?;
    if header != "term\tindex\tdf" {
        return Err(FeaturesError::BadFormat(format!(
            "unexpected vocabulary header {header:?}"
        )));
    }
    let meta = lines
        .next()
        .ok_or_else(|| FeaturesError::BadFormat("missing metadata line".to_string()))?;
    let mut num_docs = None;
    let mut order = None;
    let mut stats_name: Option<PathBuf> = None;
    for field in meta.split('\t') {
        if let Some(v) = field.strip_prefix("#N=") {
            num_docs = Some(v.parse::<u32>().map_err(|_| {
                FeaturesError::BadFormat(format!("bad #N value {v:?}"))
            })?);
        } else if let Some(v) = field.strip_prefix("#n=") {
            order = Some(v.parse::<usize>().map_err(|_| {
                FeaturesError::BadFormat(format!("bad #n value {v:?}"))
            })?);
        } else if let Some(v) = field.strip_prefix("#mu_sigma=") {
            stats_name = Some(PathBuf::from(v));
        } else {
            return Err(FeaturesError::BadFormat(format!(
                "unknown metadata field {field:?}"
            )));
        }
    }
    let (num_docs, order, stats_name) = match (num_docs, order, stats_name) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(FeaturesError::BadFormat(
                "metadata line must carry #N, #n and #mu_sigma".to_string(),
            ))
        }
    };

    let mut terms = Vec::new();
    let mut df = Vec::new();
    for (row, line) in lines.enumerate() {
        let mut fields = line.split('\t');
        let (term, index, freq) = match (fields.next(), fields.next(), fields.next(), fields.next())
        {
            (Some(t), Some(i), Some(d), None) => (t, i, d),
            _ => {
                return Err(FeaturesError::BadFormat(format!(
                    "vocabulary row {row} does not have 3 columns"
                )))
            }
        };
        let index: usize = index.parse().map_err(|_| {
            FeaturesError::BadFormat(format!("bad index in vocabulary row {row}"))
        })?;
        if index != row {
            return Err(FeaturesError::BadFormat(format!(
                "vocabulary indices must be dense: row {row} carries index {index}"
            )));
        }
        terms.push(unescape_term(term)?);
        df.push(freq.parse().map_err(|_| {
            FeaturesError::BadFormat(format!("bad df in vocabulary row {row}"))
        })?);
    }
    let vocab = Vocabulary::from_parts(terms, df, num_docs, order)?;

    let stats_path = if stats_name.is_absolute() {
        stats_name
    } else {
        path.parent().unwrap_or_else(|| Path::new(".")).join(stats_name)
    };
    let standardizer = read_stats(&stats_path)?;
    Ok((vocab, standardizer))
}

fn write_stats(path: &Path, standardizer: &Standardizer) -> Result<(), FeaturesError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(STATS_MAGIC);
    buf.extend_from_slice(&STATS_VERSION.to_le_bytes());
    match standardizer {
        Standardizer::Identity => buf.push(0),
        Standardizer::Affine { mu, sigma } => {
            buf.push(1);
            buf.extend_from_slice(&(mu.len() as u32).to_le_bytes());
            for v in mu.iter().chain(sigma.iter()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

fn read_stats(path: &Path) -> Result<Standardizer, FeaturesError> {
    let bytes = fs::read(path)?;
    let mut r = Reader::new(&bytes);
    if r.take(4)? != STATS_MAGIC {
        return Err(FeaturesError::BadFormat(
            "bad statistics file magic".to_string(),
        ));
    }
    let version = r.u32()?;
    if version != STATS_VERSION {
        return Err(FeaturesError::BadFormat(format!(
            "unsupported statistics version {version}"
        )));
    }
    match r.take(1)?[0] {
        0 => Ok(Standardizer::Identity),
        1 => {
            let dim = r.u32()? as usize;
            let mut mu = Vec::with_capacity(dim);
            for _ in 0..dim {
                mu.push(r.f64()?);
            }
            let mut sigma = Vec::with_capacity(dim);
            for _ in 0..dim {
                sigma.push(r.f64()?);
            }
            Ok(Standardizer::Affine { mu, sigma })
        }
        k => Err(FeaturesError::BadFormat(format!(
            "unknown standardizer kind {k}"
        ))),
    }
}

/// One labeled sample in the binary feature container.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSample {
    pub label: u32,
    /// channels · H · W values, channel-major row-major.
    pub data: Vec<f32>,
}

/// A set of samples sharing one tensor geometry and class count.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub channels: u32,
    pub height: u32,
    pub width: u32,
    pub num_classes: u32,
    pub samples: Vec<FeatureSample>,
}

impl FeatureFile {
    pub fn from_tensors(
        tensors: &[(u32, InputTensor)],
        num_classes: u32,
    ) -> Result<Self, FeaturesError> {
        let first = tensors
            .first()
            .map(|(_, t)| (t.channels as u32, t.height as u32, t.width as u32))
            .ok_or(FeaturesError::EmptyCorpus)?;
        let mut samples = Vec::with_capacity(tensors.len());
        for (label, t) in tensors {
            if (t.channels as u32, t.height as u32, t.width as u32) != first {
                return Err(FeaturesError::BadFormat(
                    "samples disagree on tensor geometry".to_string(),
                ));
            }
            if *label >= num_classes {
                return Err(FeaturesError::BadFormat(format!(
                    "label {label} out of range for {num_classes} classes"
                )));
            }
            samples.push(FeatureSample {
                label: *label,
                data: t.data.clone(),
            });
        }
        Ok(Self {
            channels: first.0,
            height: first.1,
            width: first.2,
            num_classes,
            samples,
        })
    }

    pub fn tensor(&self, index: usize) -> InputTensor {
        InputTensor {
            channels: self.channels as usize,
            height: self.height as usize,
            width: self.width as usize,
            data: self.samples[index].data.clone(),
        }
    }
}

pub fn write_feature_file(path: &Path, file: &FeatureFile) -> Result<(), FeaturesError> {
    let plane = (file.channels * file.height * file.width) as usize;
    let mut buf = Vec::with_capacity(28 + file.samples.len() * (4 + plane * 4));
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(file.samples.len() as u32).to_le_bytes());
    buf.extend_from_slice(&file.channels.to_le_bytes());
    buf.extend_from_slice(&file.height.to_le_bytes());
    buf.extend_from_slice(&file.width.to_le_bytes());
    buf.extend_from_slice(&file.num_classes.to_le_bytes());
    for sample in &file.samples {
        if sample.data.len() != plane {
            return Err(FeaturesError::BadFormat(format!(
                "sample has {} values; geometry demands {plane}",
                sample.data.len()
            )));
        }
        buf.extend_from_slice(&sample.label.to_le_bytes());
        for v in &sample.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_feature_file(path: &Path) -> Result<FeatureFile, FeaturesError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader::new(&bytes);
    if r.take(4)? != FEATURE_MAGIC {
        return Err(FeaturesError::BadFormat(
            "bad feature file magic".to_string(),
        ));
    }
    let version = r.u32()?;
    if version != FEATURE_VERSION {
        return Err(FeaturesError::BadFormat(format!(
            "unsupported feature file version {version}"
        )));
    }
    let count = r.u32()? as usize;
    let channels = r.u32()?;
    let height = r.u32()?;
    let width = r.u32()?;
    let num_classes = r.u32()?;
    let plane = (channels * height * width) as usize;
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let label = r.u32()?;
        if label >= num_classes {
            return Err(FeaturesError::BadFormat(format!(
                "stored label {label} out of range"
            )));
        }
        let mut data = Vec::with_capacity(plane);
        for _ in 0..plane {
            data.push(r.f32()?);
        }
        samples.push(FeatureSample { label, data });
    }
    Ok(FeatureFile {
        channels,
        height,
        width,
        num_classes,
        samples,
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FeaturesError> {
        if self.pos + n > self.bytes.len() {
            return Err(FeaturesError::BadFormat("truncated file".to_string()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, FeaturesError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, FeaturesError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, FeaturesError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_vocabulary;
    use crate::trace::{FamilyLabel, Token, TraceDocument};

    fn doc_from(texts: &[&str], id: &str) -> TraceDocument {
        TraceDocument {
            doc_id: id.to_string(),
            label: FamilyLabel {
                name: "fam".to_string(),
                index: 0,
            },
            tokens: texts.iter().map(|t| Token::new(t).unwrap()).collect(),
        }
    }

    #[test]
    fn term_escaping_roundtrip() {
        let raw = "mov\u{1f}back\\slash\u{1f}eax";
        let escaped = escape_term(raw);
        assert!(!escaped.contains('\u{1f}'));
        assert_eq!(unescape_term(&escaped).unwrap(), raw);
    }

    #[test]
    fn vocabulary_tsv_roundtrip_is_byte_identical() {
        let docs = vec![
            doc_from(&["mov", "eax", "mov", "ebx"], "d0"),
            doc_from(&["mov", "eax", "call"], "d1"),
            doc_from(&["push", "pop"], "d2"),
        ];
        let vocab = build_vocabulary(&docs, 2, 16).unwrap();
        let std = Standardizer::Affine {
            mu: vec![0.5; 2 * vocab.len()],
            sigma: vec![1.5; 2 * vocab.len()],
        };
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("vocab.tsv");
        write_vocabulary(&p1, &vocab, &std).unwrap();
        let (loaded, loaded_std) = read_vocabulary(&p1).unwrap();
        assert_eq!(loaded, vocab);
        assert_eq!(loaded_std, std);

        let p2 = dir.path().join("vocab2.tsv");
        write_vocabulary(&p2, &loaded, &loaded_std).unwrap();
        let b1 = fs::read(&p1).unwrap();
        let mut b2 = fs::read(&p2).unwrap();
        // The metadata line embeds the stats file name, which differs with
        // the TSV name; normalize before comparing.
        let s2 = String::from_utf8(b2.clone()).unwrap().replace("vocab2.tsv", "vocab.tsv");
        b2 = s2.into_bytes();
        assert_eq!(b1, b2);
    }

    #[test]
    fn feature_file_roundtrip_is_byte_identical() {
        let t = InputTensor {
            channels: 2,
            height: 2,
            width: 2,
            data: vec![1.0, -2.5, 0.0, 3.25, 1.0, 0.0, 1.0, 0.0],
        };
        let file = FeatureFile::from_tensors(&[(0, t.clone()), (1, t)], 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("feat.bin");
        write_feature_file(&p1, &file).unwrap();
        let loaded = read_feature_file(&p1).unwrap();
        assert_eq!(loaded, file);
        let p2 = dir.path().join("feat2.bin");
        write_feature_file(&p2, &loaded).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn corrupt_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("feat.bin");
        fs::write(&p, b"NOPE").unwrap();
        assert!(read_feature_file(&p).is_err());

        let v = dir.path().join("vocab.tsv");
        fs::write(&v, "wrong\theader\n").unwrap();
        assert!(read_vocabulary(&v).is_err());
    }
}
