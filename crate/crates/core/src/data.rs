//! Corpus and dataset types, TSV persistence, and seeded sampling.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

/// A translation direction such as `en-de`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Direction {
    source_lang: String,
    target_lang: String,
}

impl Direction {
    pub fn new(source_lang: &str, target_lang: &str) -> Result<Self> {
        let valid = |code: &str| {
            !code.is_empty()
                && code
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        };
        if !valid(source_lang) || !valid(target_lang) {
            return Err(Error::InvalidInput(format!(
                "language codes must be non-empty lowercase ASCII, got {source_lang:?} and {target_lang:?}"
            )));
        }
        if source_lang == target_lang {
            return Err(Error::InvalidInput(format!(
                "source and target language are both {source_lang:?}"
            )));
        }
        Ok(Self {
            source_lang: source_lang.to_owned(),
            target_lang: target_lang.to_owned(),
        })
    }

    pub fn source_lang(&self) -> &str {
        &self.source_lang
    }

    pub fn target_lang(&self) -> &str {
        &self.target_lang
    }
}

impl Default for Direction {
    /// Placeholder used when data carries no direction tag.
    fn default() -> Self {
        Self {
            source_lang: "src".to_owned(),
            target_lang: "tgt".to_owned(),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source_lang, self.target_lang)
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (src, tgt) = s.split_once('-').ok_or_else(|| {
            Error::InvalidInput(format!("direction must look like `en-de`, got {s:?}"))
        })?;
        Direction::new(src, tgt)
    }
}

impl TryFrom<String> for Direction {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<Direction> for String {
    fn from(d: Direction) -> String {
        d.to_string()
    }
}

/// One aligned source/reference sentence pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub source: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelCorpus {
    pub pairs: Vec<ParallelPair>,
    pub direction: Direction,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<ParallelPair>, direction: Direction) -> Self {
        Self { pairs, direction }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// What a dataset's labels measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    SyntheticTer,
    GoldHter,
    GoldDa,
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic-ter" => Ok(Self::SyntheticTer),
            "gold-hter" => Ok(Self::GoldHter),
            "gold-da" => Ok(Self::GoldDa),
            other => Err(Error::InvalidInput(format!("unknown dataset kind {other:?}"))),
        }
    }
}

/// A (source, hypothesis, label) record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QeTuple {
    pub source: String,
    pub hypothesis: String,
    pub label: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QeDataset {
    pub tuples: Vec<QeTuple>,
    pub kind: DatasetKind,
}

impl QeDataset {
    pub fn new(tuples: Vec<QeTuple>, kind: DatasetKind) -> Self {
        Self { tuples, kind }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.tuples.iter().map(|t| t.label).collect()
    }
}

/// Reads two line-aligned files into a corpus. Pairs where either side is
/// blank are dropped; the number of dropped lines is returned alongside.
pub fn read_parallel_corpus(
    source_path: &Path,
    target_path: &Path,
    direction: Direction,
) -> Result<(ParallelCorpus, usize)> {
    let sources = io::read_lines(source_path)?;
    let targets = io::read_lines(target_path)?;
    if sources.len() != targets.len() {
        return Err(Error::LineCountMismatch {
            left_name: source_path.display().to_string(),
            left: sources.len(),
            right_name: target_path.display().to_string(),
            right: targets.len(),
        });
    }
    let mut skipped = 0;
    let mut pairs = Vec::with_capacity(sources.len());
    for (source, reference) in sources.into_iter().zip(targets) {
        if source.trim().is_empty() || reference.trim().is_empty() {
            skipped += 1;
            continue;
        }
        pairs.push(ParallelPair {
            source: source.replace('\t', " "),
            reference: reference.replace('\t', " "),
        });
    }
    Ok((ParallelCorpus::new(pairs, direction), skipped))
}

/// 0-based column indices for source, hypothesis and label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub source: usize,
    pub hypothesis: usize,
    pub label: usize,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            source: 0,
            hypothesis: 1,
            label: 2,
        }
    }
}

impl FromStr for ColumnMap {
    type Err = Error;

    /// Parses `src,hyp,label`, e.g. `1,2,5`.
    fn from_str(s: &str) -> Result<Self> {
        let idx: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidInput(format!("bad column map {s:?}")))?;
        match idx.as_slice() {
            &[source, hypothesis, label] => Ok(Self {
                source,
                hypothesis,
                label,
            }),
            _ => Err(Error::InvalidInput(format!(
                "column map needs three indices, got {s:?}"
            ))),
        }
    }
}

/// A TSV row whose label may be missing (prediction inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub source: String,
    pub hypothesis: String,
    pub label: Option<f64>,
}

fn parse_label(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads source/hypothesis rows with optional labels. The first row is
/// treated as a header when its label column is present but non-numeric.
/// An empty file yields no rows.
pub fn read_pair_rows(path: &Path, columns: ColumnMap) -> Result<Vec<PairRow>> {
    let lines = io::read_lines(path)?;
    let need = columns.source.max(columns.hypothesis) + 1;
    let mut rows = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let label_field = fields.get(columns.label).copied();
        if i == 0 {
            if let Some(f) = label_field {
                if parse_label(f).is_none() {
                    continue;
                }
            }
        }
        if fields.len() < need {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                message: format!("expected at least {need} tab-separated fields"),
            });
        }
        let label = match label_field {
            None => None,
            Some(f) => Some(parse_label(f).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                message: format!("label {f:?} is not a number"),
            })?),
        };
        rows.push(PairRow {
            source: fields[columns.source].to_owned(),
            hypothesis: fields[columns.hypothesis].to_owned(),
            label,
        });
    }
    Ok(rows)
}

/// Reads a labeled QE dataset (`source<TAB>hypothesis<TAB>label`).
pub fn read_qe_tsv(path: &Path, kind: DatasetKind, direction: &Direction) -> Result<QeDataset> {
    read_qe_tsv_with_columns(path, kind, direction, ColumnMap::default())
}

pub fn read_qe_tsv_with_columns(
    path: &Path,
    kind: DatasetKind,
    direction: &Direction,
    columns: ColumnMap,
) -> Result<QeDataset> {
    let lines = io::read_lines(path)?;
    if lines.is_empty() {
        return Err(Error::Empty(format!("{} is empty", path.display())));
    }
    let need = columns.source.max(columns.hypothesis).max(columns.label) + 1;
    let mut tuples = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row: i + 1,
            message,
        };
        if fields.len() < need.max(3) {
            return Err(parse_err(format!(
                "expected at least {} tab-separated fields, found {}",
                need.max(3),
                fields.len()
            )));
        }
        let raw_label = fields[columns.label];
        let label = match parse_label(raw_label) {
            Some(v) => v,
            None if i == 0 => continue,
            None => return Err(parse_err(format!("label {raw_label:?} is not a number"))),
        };
        tuples.push(QeTuple {
            source: fields[columns.source].to_owned(),
            hypothesis: fields[columns.hypothesis].to_owned(),
            label,
            direction: direction.clone(),
        });
    }
    Ok(QeDataset::new(tuples, kind))
}

fn check_field(field: &str, what: &str, row: usize) -> Result<()> {
    if field.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidInput(format!(
            "row {row}: {what} contains a tab or newline"
        )));
    }
    Ok(())
}

/// Renders a dataset as TSV text, one row per tuple, labels at 6 decimals.
pub fn render_qe_tsv(dataset: &QeDataset) -> Result<String> {
    if dataset.is_empty() {
        return Err(Error::Empty("refusing to write an empty dataset".into()));
    }
    let mut out = String::new();
    for (i, t) in dataset.tuples.iter().enumerate() {
        check_field(&t.source, "source", i + 1)?;
        check_field(&t.hypothesis, "hypothesis", i + 1)?;
        out.push_str(&format!("{}\t{}\t{:.6}\n", t.source, t.hypothesis, t.label));
    }
    Ok(out)
}

pub fn write_qe_tsv(dataset: &QeDataset, path: &Path) -> Result<()> {
    let text = render_qe_tsv(dataset)?;
    io::write_atomic(path, text.as_bytes())
}

/// Number of whitespace tokens; the length-filter proxy for subword counts.
pub fn whitespace_len(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Drops pairs where either side has more than `max_tokens` whitespace
/// tokens, then draws `min(n, remaining)` pairs uniformly without
/// replacement. The result keeps corpus order.
pub fn sample_pairs(
    corpus: &ParallelCorpus,
    n: usize,
    max_tokens: usize,
    seed: u64,
) -> Result<ParallelCorpus> {
    if n == 0 || max_tokens == 0 {
        return Err(Error::InvalidInput(
            "sample size and max_tokens must be at least 1".into(),
        ));
    }
    let eligible: Vec<&ParallelPair> = corpus
        .pairs
        .iter()
        .filter(|p| whitespace_len(&p.source) <= max_tokens && whitespace_len(&p.reference) <= max_tokens)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Empty(format!(
            "no pair has both sides within {max_tokens} tokens"
        )));
    }
    let k = n.min(eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, eligible.len(), k).into_vec();
    picked.sort_unstable();
    let pairs = picked.into_iter().map(|i| eligible[i].clone()).collect();
    Ok(ParallelCorpus::new(pairs, corpus.direction.clone()))
}
