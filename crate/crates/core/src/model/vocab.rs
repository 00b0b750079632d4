use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::QeDataset;
use crate::error::{Error, Result};
use crate::ter::{self, TerConfig};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const CLS: usize = 2;
pub const SEP: usize = 3;
const SPECIALS: [&str; 4] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]"];

/// Word vocabulary with the four special tokens at ids 0..=3.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

/// Lowercased word and punctuation tokens, as used by TER.
pub fn tokenize(text: &str) -> Vec<String> {
    ter::tokenize(text, &TerConfig::default())
}

impl Vocab {
    /// Counts tokens over the sources and hypotheses of `datasets`, keeps
    /// those seen at least `min_count` times, and ranks them by descending
    /// count then lexicographically, up to `max_size` entries in total.
    pub fn build(datasets: &[&QeDataset], max_size: usize, min_count: usize) -> Result<Self> {
        if datasets.is_empty() {
            return Err(Error::Empty("no datasets to build a vocabulary from".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for d in datasets {
            for t in &d.tuples {
                for tok in tokenize(&t.source).into_iter().chain(tokenize(&t.hypothesis)) {
                    *counts.entry(tok).or_insert(0) += 1;
                }
            }
        }
        let mut ranked: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(tok, c)| *c >= min_count.max(1) && !SPECIALS.contains(&tok.as_str()))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size.saturating_sub(SPECIALS.len()));
        if ranked.is_empty() {
            return Err(Error::Empty(format!(
                "no token survives min_count {min_count} and max_size {max_size}"
            )));
        }
        let tokens: Vec<String> = SPECIALS
            .iter()
            .map(|s| (*s).to_owned())
            .chain(ranked.into_iter().map(|(t, _)| t))
            .collect();
        Self::try_from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < SPECIALS.len() || tokens[..SPECIALS.len()] != SPECIALS {
            return Err(Error::Checkpoint("vocabulary must start with the special tokens".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Checkpoint(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}
