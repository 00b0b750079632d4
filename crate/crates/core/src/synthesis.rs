//! Synthetic QE data: sample a parallel corpus, translate its source side,
//! label each hypothesis with TER against the corpus reference, and drop
//! tuples whose TER exceeds a cutoff.

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::Command;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{self, DatasetKind, ParallelCorpus, ParallelPair, QeDataset, QeTuple};
use crate::error::{Error, Result};
use crate::io;
use crate::ter::{self, TerConfig};

/// Sample sizes mirroring high/medium/low-resource setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourcePreset {
    High,
    Medium,
    Low,
}

impl ResourcePreset {
    pub fn sample_size(self) -> usize {
        match self {
            ResourcePreset::High => 1_000_000,
            ResourcePreset::Medium => 200_000,
            ResourcePreset::Low => 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub sample_size: usize,
    /// Per-side whitespace-token limit applied before sampling.
    pub max_tokens: usize,
    /// Tuples with TER strictly greater than this are discarded.
    pub ter_cutoff: f64,
    pub seed: u64,
    pub ter: TerConfig,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            sample_size: ResourcePreset::High.sample_size(),
            max_tokens: 128,
            ter_cutoff: 1.0,
            seed: 0,
            ter: TerConfig::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size == 0 {
            return Err(Error::InvalidInput("sample_size must be at least 1".into()));
        }
        if !(self.ter_cutoff >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "ter_cutoff must be non-negative, got {}",
                self.ter_cutoff
            )));
        }
        Ok(())
    }
}

/// An external MT system.
///
/// A command template is run through `sh -c` once, with `{src}` replaced by
/// a file holding one source sentence per line and `{out}` by the path it
/// must write line-aligned translations to. A real decoder would be
/// configured here (e.g. beam size 5, length penalty 1.0, max length 200).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranslatorSpec {
    FileBacked { path: PathBuf },
    ExternalCommand { template: String },
}

fn shell_quote(path: &std::path::Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', r"'\''"))
}

/// Returns one hypothesis per source sentence, in order.
pub fn obtain_hypotheses(sources: &[String], translator: &TranslatorSpec) -> Result<Vec<String>> {
    if sources.is_empty() {
        return Err(Error::Empty("no source sentences to translate".into()));
    }
    let (hyps, origin) = match translator {
        TranslatorSpec::FileBacked { path } => (io::read_lines(path)?, path.display().to_string()),
        TranslatorSpec::ExternalCommand { template } => {
            if !template.contains("{src}") || !template.contains("{out}") {
                return Err(Error::InvalidInput(
                    "translator command must contain {src} and {out} placeholders".into(),
                ));
            }
            let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
            let src = dir.path().join("source.txt");
            let out = dir.path().join("hypotheses.txt");
            let mut text = sources.join("\n");
            text.push('\n');
            fs::write(&src, text).map_err(|e| Error::io(&src, e))?;
            let cmd = template
                .replace("{src}", &shell_quote(&src))
                .replace("{out}", &shell_quote(&out));
            let output = Command::new("sh")
                .arg("-c")
                .arg(&cmd)
                .output()
                .map_err(|e| Error::Translator(format!("cannot run `{cmd}`: {e}")))?;
            if !output.status.success() {
                return Err(Error::Translator(format!(
                    "`{template}` exited with {}: {}",
                    output.status,
                    String::from_utf8_lossy(&output.stderr).trim()
                )));
            }
            if !out.exists() {
                return Err(Error::Translator(format!("`{template}` wrote no output file")));
            }
            (io::read_lines(&out)?, format!("output of `{template}`"))
        }
    };
    if hyps.len() != sources.len() {
        return Err(Error::LineCountMismatch {
            left_name: "sources".into(),
            left: sources.len(),
            right_name: origin,
            right: hyps.len(),
        });
    }
    Ok(hyps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionOp {
    Delete,
    Duplicate,
    /// Swap with the right neighbour.
    Swap,
}

/// Per-sentence noise rate: fixed, or drawn uniformly per sentence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseLevel {
    Fixed(f64),
    Uniform { low: f64, high: f64 },
}

/// A stand-in MT system that corrupts the reference: each token is, with
/// probability equal to the sentence noise rate, deleted, duplicated, or
/// swapped with its right neighbour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptingTranslator {
    pub noise: NoiseLevel,
    pub seed: u64,
    pub ops: Vec<CorruptionOp>,
}

/// One corrupted reference and the noise rate it was generated with.
#[derive(Debug, Clone, PartialEq)]
pub struct Corruption {
    pub hypothesis: String,
    pub noise_rate: f64,
}

impl CorruptingTranslator {
    pub fn new(noise: NoiseLevel, seed: u64) -> Result<Self> {
        let ok = |r: f64| (0.0..=1.0).contains(&r);
        let valid = match noise {
            NoiseLevel::Fixed(r) => ok(r),
            NoiseLevel::Uniform { low, high } => ok(low) && ok(high) && low <= high,
        };
        if !valid {
            return Err(Error::InvalidInput(format!("noise rate out of [0, 1]: {noise:?}")));
        }
        Ok(Self {
            noise,
            seed,
            ops: vec![CorruptionOp::Delete, CorruptionOp::Duplicate, CorruptionOp::Swap],
        })
    }

    pub fn with_ops(mut self, ops: Vec<CorruptionOp>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::InvalidInput("at least one corruption op is required".into()));
        }
        self.ops = ops;
        Ok(self)
    }

    /// Corrupts the reference of the pair at `index`. Deterministic in
    /// `(seed, index, reference)`.
    pub fn corrupt(&self, index: usize, reference: &str) -> Corruption {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let noise_rate = match self.noise {
            NoiseLevel::Fixed(r) => r,
            NoiseLevel::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        };
        let tokens: Vec<&str> = reference.split_whitespace().collect();
        let mut out: Vec<&str> = Vec::with_capacity(tokens.len() + 4);
        let mut i = 0;
        while i < tokens.len() {
            if rng.random::<f64>() < noise_rate {
                match self.ops[rng.random_range(0..self.ops.len())] {
                    CorruptionOp::Delete => {}
                    CorruptionOp::Duplicate => out.extend([tokens[i], tokens[i]]),
                    CorruptionOp::Swap if i + 1 < tokens.len() => {
                        out.extend([tokens[i + 1], tokens[i]]);
                        i += 1;
                    }
                    CorruptionOp::Swap => out.push(tokens[i]),
                }
            } else {
                out.push(tokens[i]);
            }
            i += 1;
        }
        Corruption {
            hypothesis: out.join(" "),
            noise_rate,
        }
    }

    pub fn translate(&self, pairs: &[ParallelPair]) -> Vec<Corruption> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, p)| self.corrupt(i, &p.reference))
            .collect()
    }
}

/// Any source of hypotheses the pipeline accepts.
#[derive(Debug, Clone, PartialEq)]
pub enum Translator {
    External(TranslatorSpec),
    Corrupting(CorruptingTranslator),
}

impl Translator {
    pub fn translate(&self, pairs: &[ParallelPair]) -> Result<Vec<String>> {
        match self {
            Translator::External(spec) => {
                let sources: Vec<String> = pairs.iter().map(|p| p.source.clone()).collect();
                obtain_hypotheses(&sources, spec)
            }
            Translator::Corrupting(c) => {
                Ok(c.translate(pairs).into_iter().map(|c| c.hypothesis).collect())
            }
        }
    }

    /// Parses `file:PATH`, `cmd:TEMPLATE`, `corrupt:RATE` or
    /// `corrupt:LOW..HIGH`. The corrupting translator takes `seed`.
    pub fn parse(spec: &str, seed: u64) -> Result<Self> {
        let (kind, arg) = spec.split_once(':').ok_or_else(|| {
            Error::InvalidInput(format!(
                "translator must be file:PATH, cmd:TEMPLATE or corrupt:RATE, got {spec:?}"
            ))
        })?;
        let rate = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad noise rate {s:?}")))
        };
        match kind {
            "file" => Ok(Translator::External(TranslatorSpec::FileBacked { path: arg.into() })),
            "cmd" => Ok(Translator::External(TranslatorSpec::ExternalCommand {
                template: arg.to_owned(),
            })),
            "corrupt" => {
                let noise = match arg.split_once("..") {
                    Some((lo, hi)) => NoiseLevel::Uniform {
                        low: rate(lo)?,
                        high: rate(hi)?,
                    },
                    None => NoiseLevel::Fixed(rate(arg)?),
                };
                Ok(Translator::Corrupting(CorruptingTranslator::new(noise, seed)?))
            }
            other => Err(Error::InvalidInput(format!("unknown translator kind {other:?}"))),
        }
    }
}

impl fmt::Display for Translator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Translator::External(TranslatorSpec::FileBacked { path }) => {
                write!(f, "file:{}", path.display())
            }
            Translator::External(TranslatorSpec::ExternalCommand { template }) => {
                write!(f, "cmd:{template}")
            }
            Translator::Corrupting(c) => match c.noise {
                NoiseLevel::Fixed(r) => write!(f, "corrupt:{r}"),
                NoiseLevel::Uniform { low, high } => write!(f, "corrupt:{low}..{high}"),
            },
        }
    }
}

impl FromStr for Translator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Translator::parse(s, 0)
    }
}

/// Stage counts of one synthesis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub corpus_pairs: usize,
    pub sampled: usize,
    pub translated: usize,
    pub labeled: usize,
    pub discarded_by_cutoff: usize,
    pub kept: usize,
    pub label_kind: DatasetKind,
    pub translator: String,
    pub config: SynthesisConfig,
}

/// Runs the full pipeline: sample, translate, label with TER, filter.
pub fn synthesize(
    corpus: &ParallelCorpus,
    translator: &Translator,
    config: &SynthesisConfig,
) -> Result<(QeDataset, SynthesisReport)> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("parallel corpus is empty".into()));
    }
    let sample = data::sample_pairs(corpus, config.sample_size, config.max_tokens, config.seed)?;
    let hypotheses = translator.translate(&sample.pairs)?;
    if hypotheses.len() != sample.len() {
        return Err(Error::LineCountMismatch {
            left_name: "sampled pairs".into(),
            left: sample.len(),
            right_name: "hypotheses".into(),
            right: hypotheses.len(),
        });
    }

    let mut tuples = Vec::with_capacity(sample.len());
    let mut labeled = 0;
    let mut discarded = 0;
    for (pair, hyp) in sample.pairs.iter().zip(hypotheses) {
        let result = ter::ter(&hyp, &pair.reference, &config.ter)?;
        labeled += 1;
        if result.score > config.ter_cutoff {
            discarded += 1;
            continue;
        }
        tuples.push(QeTuple {
            source: pair.source.clone(),
            hypothesis: hyp.replace('\t', " "),
            label: result.score,
            direction: corpus.direction.clone(),
        });
    }

    let report = SynthesisReport {
        corpus_pairs: corpus.len(),
        sampled: sample.len(),
        translated: sample.len(),
        labeled,
        discarded_by_cutoff: discarded,
        kept: tuples.len(),
        label_kind: DatasetKind::SyntheticTer,
        translator: translator.to_string(),
        config: config.clone(),
    };
    if tuples.is_empty() {
        return Err(Error::Degenerate(format!(
            "all {labeled} labeled tuples exceed the TER cutoff {}",
            config.ter_cutoff
        )));
    }
    Ok((QeDataset::new(tuples, DatasetKind::SyntheticTer), report))
}
