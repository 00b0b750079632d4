//! Translation edit rate.
//!
//! TER is the number of word insertions, deletions, substitutions and block
//! shifts needed to turn a hypothesis into its reference, divided by the
//! reference length. Finding the optimal shift sequence is NP-hard, so shifts
//! are searched greedily: at each round the single shift that lowers the
//! remaining Levenshtein distance the most is applied, until no shift helps.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerConfig {
    pub case_sensitive: bool,
    pub split_punctuation: bool,
    /// Longest hypothesis span a single shift may move.
    pub max_shift_span: usize,
    /// Furthest a span may travel, in tokens.
    pub max_shift_distance: usize,
}

impl Default for TerConfig {
    fn default() -> Self {
        Self {
            case_sensitive: false,
            split_punctuation: true,
            max_shift_span: 10,
            max_shift_distance: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditCounts {
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
}

impl EditCounts {
    pub fn total(&self) -> usize {
        self.insertions + self.deletions + self.substitutions
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerResult {
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
    pub shifts: usize,
    pub ref_length: usize,
    pub score: f64,
}

impl TerResult {
    pub fn edits(&self) -> usize {
        self.insertions + self.deletions + self.substitutions + self.shifts
    }
}

/// A block move: `len` tokens starting at `from` are removed and re-inserted
/// so that they start at `to` in the resulting sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shift {
    pub from: usize,
    pub len: usize,
    pub to: usize,
}

impl Shift {
    pub fn apply<T: Clone>(&self, tokens: &[T]) -> Vec<T> {
        let mut rest: Vec<T> = Vec::with_capacity(tokens.len());
        rest.extend_from_slice(&tokens[..self.from]);
        rest.extend_from_slice(&tokens[self.from + self.len..]);
        let span = &tokens[self.from..self.from + self.len];
        rest.splice(self.to..self.to, span.iter().cloned());
        rest
    }
}

fn is_punctuation(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
    )
}

/// Splits on Unicode whitespace, optionally isolating punctuation characters
/// and lowercasing.
pub fn tokenize(text: &str, config: &TerConfig) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        if config.split_punctuation {
            let mut cur = String::new();
            for c in word.chars() {
                if is_punctuation(c) {
                    if !cur.is_empty() {
                        out.push(std::mem::take(&mut cur));
                    }
                    out.push(c.to_string());
                } else {
                    cur.push(c);
                }
            }
            if !cur.is_empty() {
                out.push(cur);
            }
        } else {
            out.push(word.to_owned());
        }
    }
    if !config.case_sensitive {
        for t in &mut out {
            *t = t.to_lowercase();
        }
    }
    out
}

/// Word-level Levenshtein distance with unit costs.
pub fn edit_distance<T: PartialEq>(hyp: &[T], reference: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=reference.len()).collect();
    let mut cur = vec![0; reference.len() + 1];
    for (i, h) in hyp.iter().enumerate() {
        cur[0] = i + 1;
        for (j, r) in reference.iter().enumerate() {
            let diag = prev[j] + usize::from(h != r);
            cur[j + 1] = diag.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[reference.len()]
}

/// Canonical alignment of `hyp` against `reference`: the edit counts plus,
/// per position, whether the token is aligned to an identical token.
struct Alignment {
    counts: EditCounts,
    hyp_matched: Vec<bool>,
    ref_matched: Vec<bool>,
}

fn align<T: PartialEq>(hyp: &[T], reference: &[T]) -> Alignment {
    let (n, m) = (hyp.len(), reference.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        d[i * w] = i;
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + usize::from(hyp[i - 1] != reference[j - 1]);
            d[i * w + j] = diag.min(d[(i - 1) * w + j] + 1).min(d[i * w + j - 1] + 1);
        }
    }

    let mut al = Alignment {
        counts: EditCounts::default(),
        hyp_matched: vec![false; n],
        ref_matched: vec![false; m],
    };
    let (mut i, mut j) = (n, m);
    // Prefer the diagonal, then dropping a hypothesis word, then inserting.
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = hyp[i - 1] == reference[j - 1];
            if d[(i - 1) * w + j - 1] + usize::from(!same) == here {
                if same {
                    al.hyp_matched[i - 1] = true;
                    al.ref_matched[j - 1] = true;
                } else {
                    al.counts.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            al.counts.deletions += 1;
            i -= 1;
        } else {
            al.counts.insertions += 1;
            j -= 1;
        }
    }
    al
}

/// Shift-free edit decomposition (insertions, deletions, substitutions)
/// from the canonical DP traceback.
pub fn edit_counts<T: PartialEq>(hyp: &[T], reference: &[T]) -> EditCounts {
    align(hyp, reference).counts
}

fn intern<'a>(hyp: &'a [String], reference: &'a [String]) -> (Vec<u32>, Vec<u32>) {
    let mut ids: HashMap<&'a str, u32> = HashMap::new();
    let mut id_of = |t: &'a String| {
        let next = ids.len() as u32;
        *ids.entry(t.as_str()).or_insert(next)
    };
    let r: Vec<u32> = reference.iter().map(&mut id_of).collect();
    let h: Vec<u32> = hyp.iter().map(&mut id_of).collect();
    (h, r)
}

fn best_shift_ids(
    hyp: &[u32],
    reference: &[u32],
    max_span: usize,
    max_distance: usize,
) -> Option<(Shift, Vec<u32>, usize)> {
    let al = align(hyp, reference);
    let current = al.counts.total();
    if current == 0 {
        return None;
    }
    // (distance, from, len, to)
    let mut best: Option<(usize, usize, usize, usize, Vec<u32>)> = None;
    for from in 0..hyp.len() {
        for len in 1..=max_span.min(hyp.len() - from) {
            let span = &hyp[from..from + len];
            let hyp_ok = al.hyp_matched[from..from + len].iter().all(|&b| b);
            let matches_misaligned_ref = reference.windows(len).enumerate().any(|(j, w)| {
                w == span && !(hyp_ok && al.ref_matched[j..j + len].iter().all(|&b| b))
            });
            if !matches_misaligned_ref {
                continue;
            }
            let rest_len = hyp.len() - len;
            let lo = from.saturating_sub(max_distance);
            let hi = (from + max_distance).min(rest_len);
            for to in lo..=hi {
                if to == from {
                    continue;
                }
                let shift = Shift { from, len, to };
                let moved = shift.apply(hyp);
                let dist = edit_distance(&moved, reference);
                if dist >= current {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((bd, bf, bl, bt, _)) => (dist, from, len, to) < (*bd, *bf, *bl, *bt),
                };
                if better {
                    best = Some((dist, from, len, to, moved));
                }
            }
        }
    }
    best.map(|(dist, from, len, to, moved)| (Shift { from, len, to }, moved, dist))
}

/// Finds the single shift that most reduces the edit distance to
/// `reference`. Only spans that exactly match some reference span not
/// already aligned in place are considered. Ties go to the earlier source
/// index, then the shorter span, then the earlier destination.
pub fn find_best_shift(hyp: &[String], reference: &[String]) -> Option<(Shift, Vec<String>)> {
    let defaults = TerConfig::default();
    find_best_shift_with(hyp, reference, defaults.max_shift_span, defaults.max_shift_distance)
}

pub fn find_best_shift_with(
    hyp: &[String],
    reference: &[String],
    max_span: usize,
    max_distance: usize,
) -> Option<(Shift, Vec<String>)> {
    let (h, r) = intern(hyp, reference);
    best_shift_ids(&h, &r, max_span, max_distance).map(|(s, _, _)| (s, s.apply(hyp)))
}

/// TER over pre-tokenized input.
pub fn ter_tokens(hyp: &[String], reference: &[String], config: &TerConfig) -> Result<TerResult> {
    if reference.is_empty() {
        return Err(Error::InvalidInput(
            "reference has no tokens; TER is undefined".into(),
        ));
    }
    let (mut h, r) = intern(hyp, reference);
    let mut shifts = 0;
    while let Some((_, moved, _)) =
        best_shift_ids(&h, &r, config.max_shift_span, config.max_shift_distance)
    {
        h = moved;
        shifts += 1;
    }
    let counts = edit_counts(&h, &r);
    let edits = counts.total() + shifts;
    Ok(TerResult {
        insertions: counts.insertions,
        deletions: counts.deletions,
        substitutions: counts.substitutions,
        shifts,
        ref_length: r.len(),
        score: edits as f64 / r.len() as f64,
    })
}

/// TER of `hypothesis` against `reference`.
pub fn ter(hypothesis: &str, reference: &str, config: &TerConfig) -> Result<TerResult> {
    ter_tokens(&tokenize(hypothesis, config), &tokenize(reference, config), config)
}

/// Corpus-level TER: total edits over total reference words.
pub fn corpus_score(results: &[TerResult]) -> Option<f64> {
    let words: usize = results.iter().map(|r| r.ref_length).sum();
    let edits: usize = results.iter().map(TerResult::edits).sum();
    (words > 0).then(|| edits as f64 / words as f64)
}
