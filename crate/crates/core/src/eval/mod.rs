//! Correlation-based evaluation of QE predictions.
//!
//! Scores are first oriented to the gold polarity (TER/HTER: lower is better,
//! DA: higher is better) and then compared with Pearson's r. Two systems
//! scored against the same gold labels are compared with the Williams test
//! for dependent correlations.

pub mod student_t;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{DatasetKind, QeDataset};
use crate::error::{Error, Result};

/// Significance level for declaring a winner.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarity {
    LowerBetter,
    HigherBetter,
}

impl Polarity {
    /// The polarity a dataset's labels carry by construction.
    pub fn of_kind(kind: DatasetKind) -> Self {
        match kind {
            DatasetKind::SyntheticTer | DatasetKind::GoldHter => Polarity::LowerBetter,
            DatasetKind::GoldDa => Polarity::HigherBetter,
        }
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower-better" | "lower" => Ok(Polarity::LowerBetter),
            "higher-better" | "higher" => Ok(Polarity::HigherBetter),
            other => Err(Error::InvalidInput(format!(
                "polarity must be lower-better or higher-better, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::LowerBetter => "lower-better",
            Polarity::HigherBetter => "higher-better",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub system: String,
    pub gold: String,
    pub n: usize,
    pub r: f64,
    pub flip_applied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    First,
    Second,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub t: f64,
    pub df: usize,
    /// One-tailed `P(T > t)`: small values favour the first system.
    pub p: f64,
    pub winner: Winner,
}

impl SignificanceResult {
    /// p-value of the one-tailed test in the direction of the winner (or of
    /// the higher correlation when tied).
    pub fn p_directional(&self) -> f64 {
        self.p.min(1.0 - self.p)
    }
}

/// Pearson's r via the two-pass mean-centred formula.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "correlation inputs differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "correlation needs at least 3 points, got {}",
            a.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("correlation inputs must be finite".into()));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::Degenerate(
            "zero variance in a correlation input; Pearson's r is undefined".into(),
        ));
    }
    Ok((cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0))
}

/// Negates every score when the score polarity differs from the gold
/// polarity. Returns the oriented scores and whether a flip happened.
pub fn orient(scores: &[f64], scores_polarity: Polarity, gold_polarity: Polarity) -> (Vec<f64>, bool) {
    if scores_polarity == gold_polarity {
        (scores.to_vec(), false)
    } else {
        (scores.iter().map(|v| -v).collect(), true)
    }
}

/// Williams test for the difference between two dependent correlations
/// `r12 = corr(sys1, gold)` and `r13 = corr(sys2, gold)` sharing the gold
/// variable, with `r23 = corr(sys1, sys2)`.
pub fn williams_test(r12: f64, r13: f64, r23: f64, n: usize) -> Result<SignificanceResult> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("Williams test needs n >= 4, got {n}")));
    }
    for (name, r) in [("r12", r12), ("r13", r13), ("r23", r23)] {
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::InvalidInput(format!("{name} = {r} is not a correlation")));
        }
    }
    let df = n - 3;
    if r12 == r13 {
        return Ok(SignificanceResult {
            t: 0.0,
            df,
            p: 0.5,
            winner: Winner::Tie,
        });
    }
    // K is the determinant of the 3x3 correlation matrix. Negative values
    // cannot come from real data; zero (up to rounding) is a singular but
    // valid triple, e.g. a system that reproduces the gold scores.
    // Grouped so that swapping r12 and r13 gives bit-identical K.
    let k = 1.0 - (r12 * r12 + r13 * r13) - r23 * r23 + 2.0 * (r12 * r13) * r23;
    let degenerate = || {
        Error::Degenerate(format!(
            "degenerate correlation triple (r12={r12}, r13={r13}, r23={r23}): K = {k:e}"
        ))
    };
    if k < -1e-12 {
        return Err(degenerate());
    }
    let k = k.max(0.0);
    let nf = n as f64;
    let numerator = (r12 - r13) * ((nf - 1.0) * (1.0 + r23)).sqrt();
    let mean = 0.5 * (r12 + r13);
    let denominator =
        (2.0 * k * (nf - 1.0) / (nf - 3.0) + mean * mean * (1.0 - r23).powi(3)).sqrt();
    if !(denominator > 0.0) {
        return Err(degenerate());
    }
    let t = numerator / denominator;
    let p = student_t::upper_tail(t, df as f64);
    let winner = if p < ALPHA {
        Winner::First
    } else if 1.0 - p < ALPHA {
        Winner::Second
    } else {
        Winner::Tie
    };
    Ok(SignificanceResult { t, df, p, winner })
}

/// Orients `predictions` to the gold polarity and correlates them with the
/// gold labels.
pub fn evaluate(
    system: &str,
    predictions: &[f64],
    predictions_polarity: Polarity,
    gold_name: &str,
    gold: &QeDataset,
    gold_polarity: Polarity,
) -> Result<CorrelationReport> {
    evaluate_labels(
        system,
        predictions,
        predictions_polarity,
        gold_name,
        &gold.labels(),
        gold_polarity,
    )
}

pub fn evaluate_labels(
    system: &str,
    predictions: &[f64],
    predictions_polarity: Polarity,
    gold_name: &str,
    gold: &[f64],
    gold_polarity: Polarity,
) -> Result<CorrelationReport> {
    if predictions.len() != gold.len() {
        return Err(Error::LineCountMismatch {
            left_name: system.to_owned(),
            left: predictions.len(),
            right_name: gold_name.to_owned(),
            right: gold.len(),
        });
    }
    let (oriented, flip_applied) = orient(predictions, predictions_polarity, gold_polarity);
    let r = pearson(&oriented, gold)?;
    Ok(CorrelationReport {
        system: system.to_owned(),
        gold: gold_name.to_owned(),
        n: gold.len(),
        r,
        flip_applied,
    })
}

/// A scored system for [`compare`].
#[derive(Debug, Clone, Copy)]
pub struct System<'a> {
    pub name: &'a str,
    pub scores: &'a [f64],
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: CorrelationReport,
    pub b: CorrelationReport,
    /// Correlation between the two oriented prediction sets.
    pub r_ab: f64,
    pub significance: SignificanceResult,
}

impl Comparison {
    pub fn winner_name(&self) -> &str {
        match self.significance.winner {
            Winner::First => &self.a.system,
            Winner::Second => &self.b.system,
            Winner::Tie => "tie",
        }
    }

    pub fn significant(&self) -> bool {
        self.significance.winner != Winner::Tie
    }
}

/// Correlates both systems with the gold labels and runs the Williams test.
pub fn compare(
    a: System<'_>,
    b: System<'_>,
    gold_name: &str,
    gold: &[f64],
    gold_polarity: Polarity,
) -> Result<Comparison> {
    if a.scores.len() != b.scores.len() {
        return Err(Error::LineCountMismatch {
            left_name: a.name.to_owned(),
            left: a.scores.len(),
            right_name: b.name.to_owned(),
            right: b.scores.len(),
        });
    }
    if gold.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "comparison needs at least 4 items, got {}",
            gold.len()
        )));
    }
    let report_a = evaluate_labels(a.name, a.scores, a.polarity, gold_name, gold, gold_polarity)?;
    let report_b = evaluate_labels(b.name, b.scores, b.polarity, gold_name, gold, gold_polarity)?;
    let (oa, _) = orient(a.scores, a.polarity, gold_polarity);
    let (ob, _) = orient(b.scores, b.polarity, gold_polarity);
    let r_ab = pearson(&oa, &ob)?;
    let significance = williams_test(report_a.r, report_b.r, r_ab, gold.len())?;
    Ok(Comparison {
        a: report_a,
        b: report_b,
        r_ab,
        significance,
    })
}
