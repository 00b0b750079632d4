//! The trainable QE regressor.
//!
//! A sentence pair is encoded either jointly (`concat`: `[CLS] src [SEP] hyp`,
//! feature = the `[CLS]` vector) or separately (`split`: `[CLS] src` and
//! `[CLS] hyp`, feature = both `[CLS]` vectors concatenated). A single affine
//! layer maps the feature to a score, trained on RMSE.

mod checkpoint;
mod encoder;
mod optim;
mod params;
mod train;
mod vocab;

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::QeTuple;
use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, ModelCheckpoint, TrainingMetadata, FORMAT_VERSION};
pub use optim::{AdamW, AdamWConfig};
pub use params::{Gradients, ParamStore, TensorSpec};
pub use train::{
    split_validation, train, EarlyStopping, LrRun, StopDecision, TrainConfig, TrainOutcome, ValidationPoint,
};
pub use vocab::{tokenize, Vocab, CLS, PAD, SEP, UNK};

use encoder::{Dims, Encoder, EncoderIds, SeqCache};
use params::Init;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingMode {
    Split,
    Concat,
}

impl FromStr for EncodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split" => Ok(Self::Split),
            "concat" => Ok(Self::Concat),
            other => Err(Error::InvalidInput(format!(
                "encoding mode must be split or concat, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for EncodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Split => "split",
            Self::Concat => "concat",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub max_seq_len: usize,
    pub mode: EncodingMode,
    pub seed: u64,
    /// Width of an optional tanh hidden layer in the head. Off by default:
    /// the head is a single affine map.
    pub head_hidden: Option<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            layers: 2,
            heads: 2,
            ff_dim: 128,
            max_seq_len: 96,
            mode: EncodingMode::Concat,
            seed: 0,
            head_hidden: None,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.embed_dim == 0 || self.layers == 0 || self.heads == 0 || self.ff_dim == 0 {
            return bad("encoder dimensions must be positive".into());
        }
        if !self.embed_dim.is_multiple_of(self.heads) {
            return bad(format!(
                "embed_dim {} is not divisible by heads {}",
                self.embed_dim, self.heads
            ));
        }
        if self.max_seq_len < 3 {
            return bad(format!("max_seq_len must be at least 3, got {}", self.max_seq_len));
        }
        if self.head_hidden == Some(0) {
            return bad("head_hidden must be positive when set".into());
        }
        Ok(())
    }

    /// Length of the vector fed to the head.
    pub fn feature_dim(&self) -> usize {
        match self.mode {
            EncodingMode::Concat => self.embed_dim,
            EncodingMode::Split => 2 * self.embed_dim,
        }
    }

    fn dims(&self) -> Dims {
        Dims {
            d: self.embed_dim,
            heads: self.heads,
            ff: self.ff_dim,
        }
    }
}

/// Token ids ready for the encoder, specials included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inputs {
    Concat(Vec<usize>),
    Split { source: Vec<usize>, hypothesis: Vec<usize> },
}

impl Inputs {
    /// Total number of encoder positions.
    pub fn positions(&self) -> usize {
        match self {
            Inputs::Concat(t) => t.len(),
            Inputs::Split { source, hypothesis } => source.len() + hypothesis.len(),
        }
    }
}

/// Trims the longer segment from its end, one token at a time, until
/// `[CLS] src [SEP] hyp` fits in `max_len`. Ties trim the source.
fn truncate_pair(src: &mut Vec<usize>, hyp: &mut Vec<usize>, max_len: usize) {
    while 2 + src.len() + hyp.len() > max_len {
        if hyp.len() > src.len() {
            hyp.pop();
        } else {
            src.pop();
        }
    }
}

#[derive(Debug, Clone)]
struct HeadIds {
    hidden: Option<(usize, usize)>,
    weight: usize,
    bias: usize,
}

struct ExampleCache {
    seqs: Vec<SeqCache>,
    feature: Array1<f64>,
    hidden: Option<Array1<f64>>,
}

/// Encoder plus regression head.
#[derive(Debug, Clone)]
pub struct QeModel {
    vocab: Vocab,
    config: EncoderConfig,
    params: ParamStore,
    encoder_ids: EncoderIds,
    head_ids: HeadIds,
    positions: Array2<f64>,
}

impl PartialEq for QeModel {
    fn eq(&self, other: &Self) -> bool {
        self.vocab == other.vocab && self.config == other.config && self.params == other.params
    }
}

impl QeModel {
    /// Builds a freshly initialized model; weights and embeddings are drawn
    /// from `U(-0.05, 0.05)` seeded by `config.seed`, norms start at identity.
    pub fn new(vocab: Vocab, config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let encoder_ids =
            EncoderIds::register(&mut params, &mut rng, vocab.len(), config.dims(), config.layers);
        let features = config.feature_dim();
        let (hidden, head_in) = match config.head_hidden {
            Some(h) => {
                let w = params.add("head.hidden.weight", &[features, h], Init::Uniform(0.05), &mut rng);
                let b = params.add("head.hidden.bias", &[h], Init::Zeros, &mut rng);
                (Some((w, b)), h)
            }
            None => (None, features),
        };
        let weight = params.add("head.weight", &[head_in], Init::Uniform(0.05), &mut rng);
        let bias = params.add("head.bias", &[1], Init::Zeros, &mut rng);
        let positions = encoder::sinusoidal_positions(config.max_seq_len, config.embed_dim);
        Ok(Self {
            vocab,
            config,
            params,
            encoder_ids,
            head_ids: HeadIds { hidden, weight, bias },
            positions,
        })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim()
    }

    /// Parameters of the head on top of the encoder; `feature_dim + 1` for
    /// the default affine head.
    pub fn head_param_count(&self) -> usize {
        self.params
            .specs()
            .iter()
            .filter(|s| s.name.starts_with("head."))
            .map(TensorSpec::len)
            .sum()
    }

    pub fn output_bias(&self) -> f64 {
        self.params.values()[self.params.specs()[self.head_ids.bias].offset]
    }

    /// Sets the bias of the final output unit.
    pub fn set_output_bias(&mut self, value: f64) {
        let offset = self.params.specs()[self.head_ids.bias].offset;
        self.params.values_mut()[offset] = value;
    }

    fn encoder(&self) -> Encoder<'_> {
        Encoder {
            params: &self.params,
            ids: &self.encoder_ids,
            dims: self.config.dims(),
            positions: &self.positions,
        }
    }

    /// Tokenizes, truncates and adds the special tokens for the configured mode.
    pub fn prepare(&self, source: &str, hypothesis: &str) -> Inputs {
        let mut src = self.vocab.encode(source);
        let mut hyp = self.vocab.encode(hypothesis);
        let max = self.config.max_seq_len;
        match self.config.mode {
            EncodingMode::Concat => {
                truncate_pair(&mut src, &mut hyp, max);
                let mut t = Vec::with_capacity(2 + src.len() + hyp.len());
                t.push(CLS);
                t.extend(src);
                t.push(SEP);
                t.extend(hyp);
                Inputs::Concat(t)
            }
            EncodingMode::Split => {
                let wrap = |mut ids: Vec<usize>| {
                    ids.truncate(max - 1);
                    ids.insert(0, CLS);
                    ids
                };
                Inputs::Split {
                    source: wrap(src),
                    hypothesis: wrap(hyp),
                }
            }
        }
    }

    /// Final-layer `[CLS]` vector of a token sequence that may be padded:
    /// positions at or past `valid_len` are masked out of attention.
    pub fn encode_tokens(&self, tokens: &[usize], valid_len: usize) -> Result<Array1<f64>> {
        self.check_tokens(tokens, valid_len)?;
        let (z, _) = self.encoder().forward(tokens, valid_len, 1);
        Ok(z.row(0).to_owned())
    }

    /// Attention weights (per layer, per head, `n x n`) for a possibly padded
    /// sequence.
    pub fn attention_maps(&self, tokens: &[usize], valid_len: usize) -> Result<Vec<Vec<Array2<f64>>>> {
        self.check_tokens(tokens, valid_len)?;
        Ok(self.encoder().attention_maps(tokens, valid_len))
    }

    fn check_tokens(&self, tokens: &[usize], valid_len: usize) -> Result<()> {
        if tokens.is_empty() || tokens.len() > self.config.max_seq_len {
            return Err(Error::InvalidInput(format!(
                "sequence length {} outside 1..={}",
                tokens.len(),
                self.config.max_seq_len
            )));
        }
        if valid_len == 0 || valid_len > tokens.len() {
            return Err(Error::InvalidInput(format!("valid length {valid_len} out of range")));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t >= self.vocab.len()) {
            return Err(Error::InvalidInput(format!("token id {bad} outside the vocabulary")));
        }
        Ok(())
    }

    /// The feature vector the head sees: length `d` (concat) or `2d` (split).
    pub fn encode(&self, source: &str, hypothesis: &str) -> Array1<f64> {
        self.forward_inputs(&self.prepare(source, hypothesis)).1.feature
    }

    fn forward_inputs(&self, inputs: &Inputs) -> (f64, ExampleCache) {
        let enc = self.encoder();
        let (feature, seqs) = match inputs {
            Inputs::Concat(t) => {
                let (z, c) = enc.forward(t, t.len(), 1);
                (z.row(0).to_owned(), vec![c])
            }
            Inputs::Split { source, hypothesis } => {
                let (zs, cs) = enc.forward(source, source.len(), 1);
                let (zh, ch) = enc.forward(hypothesis, hypothesis.len(), 1);
                let d = self.config.embed_dim;
                let mut f = Array1::zeros(2 * d);
                f.slice_mut(s![..d]).assign(&zs.row(0));
                f.slice_mut(s![d..]).assign(&zh.row(0));
                (f, vec![cs, ch])
            }
        };
        let p = &self.params;
        let bias = p.scalar(self.head_ids.bias);
        let w = p.vec(self.head_ids.weight);
        let (pred, hidden) = match self.head_ids.hidden {
            Some((hw, hb)) => {
                let h = (feature.dot(&p.mat(hw)) + p.vec(hb)).mapv(f64::tanh);
                (h.dot(&w) + bias, Some(h))
            }
            None => (feature.dot(&w) + bias, None),
        };
        (pred, ExampleCache { seqs, feature, hidden })
    }

    fn backward_inputs(&self, cache: &ExampleCache, dpred: f64, grads: &mut Gradients) {
        let p = &self.params;
        *grads.scalar_mut(p, self.head_ids.bias) += dpred;
        let w = p.vec(self.head_ids.weight);
        let dfeature = match (&self.head_ids.hidden, &cache.hidden) {
            (Some((hw, hb)), Some(h)) => {
                grads.vec_mut(p, self.head_ids.weight).scaled_add(dpred, h);
                let dz = (&w * dpred) * h.mapv(|v| 1.0 - v * v);
                {
                    let mut dw = grads.mat_mut(p, *hw);
                    for (i, f) in cache.feature.iter().enumerate() {
                        dw.row_mut(i).scaled_add(*f, &dz);
                    }
                }
                grads.vec_mut(p, *hb).scaled_add(1.0, &dz);
                p.mat(*hw).dot(&dz)
            }
            _ => {
                grads.vec_mut(p, self.head_ids.weight).scaled_add(dpred, &cache.feature);
                &w * dpred
            }
        };
        let enc = self.encoder();
        let d = self.config.embed_dim;
        for (i, seq) in cache.seqs.iter().enumerate() {
            let part = dfeature.slice(s![i * d..(i + 1) * d]);
            let dz = part.to_owned().insert_axis(ndarray::Axis(0));
            enc.backward(seq, dz, grads);
        }
    }

    pub fn predict_inputs(&self, inputs: &Inputs) -> f64 {
        self.forward_inputs(inputs).0
    }

    /// Raw regression outputs, one per pair, in order.
    pub fn predict<S: AsRef<str>>(&self, pairs: &[(S, S)]) -> Vec<f64> {
        pairs
            .iter()
            .map(|(s, h)| self.predict_inputs(&self.prepare(s.as_ref(), h.as_ref())))
            .collect()
    }

    /// RMSE over the batch and the per-example predictions.
    pub fn forward_loss(&self, batch: &[QeTuple]) -> (f64, Vec<f64>) {
        let preds: Vec<f64> = batch
            .iter()
            .map(|t| self.predict_inputs(&self.prepare(&t.source, &t.hypothesis)))
            .collect();
        let labels: Vec<f64> = batch.iter().map(|t| t.label).collect();
        (rmse(&preds, &labels), preds)
    }

    /// RMSE, predictions and exact gradients for a batch of tuples.
    pub fn loss_and_gradients(&self, batch: &[QeTuple]) -> (f64, Vec<f64>, Gradients) {
        let prepared: Vec<(Inputs, f64)> = batch
            .iter()
            .map(|t| (self.prepare(&t.source, &t.hypothesis), t.label))
            .collect();
        let refs: Vec<(&Inputs, f64)> = prepared.iter().map(|(i, l)| (i, *l)).collect();
        self.loss_and_gradients_prepared(&refs)
    }

    pub fn loss_and_gradients_prepared(&self, batch: &[(&Inputs, f64)]) -> (f64, Vec<f64>, Gradients) {
        let mut grads = Gradients::zeros_like(&self.params);
        let mut preds = Vec::with_capacity(batch.len());
        let mut caches = Vec::with_capacity(batch.len());
        for (inputs, _) in batch {
            let (pred, cache) = self.forward_inputs(inputs);
            preds.push(pred);
            caches.push(cache);
        }
        let labels: Vec<f64> = batch.iter().map(|(_, l)| *l).collect();
        let loss = rmse(&preds, &labels);
        // d sqrt(mean r^2) / d pred_i = r_i / (n * loss); defined as 0 at loss 0.
        if loss > 0.0 && loss.is_finite() {
            let denom = batch.len() as f64 * loss;
            for ((cache, pred), label) in caches.iter().zip(&preds).zip(&labels) {
                self.backward_inputs(cache, (pred - label) / denom, &mut grads);
            }
        }
        (loss, preds, grads)
    }
}

/// Root mean squared error; 0 for empty input.
pub fn rmse(predictions: &[f64], labels: &[f64]) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    let sq: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l) * (p - l))
        .sum();
    (sq / predictions.len() as f64).sqrt()
}
