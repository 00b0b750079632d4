use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::TrainingMetadata;
use super::optim::{AdamW, AdamWConfig};
use super::{rmse, EncoderConfig, Inputs, QeModel, Vocab};
use crate::data::{DatasetKind, QeDataset, QeTuple};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// One full training run per rate; the best validation RMSE wins.
    pub lr_grid: Vec<f64>,
    pub patience: usize,
    /// Validate every this many optimizer steps.
    pub val_every: usize,
    pub val_fraction: f64,
    pub max_steps: usize,
    pub adamw: AdamWConfig,
    pub seed: u64,
    pub vocab_max_size: usize,
    pub vocab_min_count: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            lr_grid: vec![5e-5, 1e-5, 5e-6, 1e-6],
            patience: 3,
            val_every: 10_000,
            val_fraction: 0.10,
            max_steps: 1_000_000,
            adamw: AdamWConfig::default(),
            seed: 0,
            vocab_max_size: 32_000,
            vocab_min_count: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_owned()));
        if self.batch_size == 0 || self.val_every == 0 || self.max_steps == 0 {
            return bad("batch_size, val_every and max_steps must be positive");
        }
        if self.lr_grid.is_empty() || self.lr_grid.iter().any(|lr| !(*lr > 0.0) || !lr.is_finite()) {
            return bad("lr_grid must be a non-empty list of positive rates");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie strictly between 0 and 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

/// Patience-based early stopping on a validation loss; an improvement
/// means a strictly lower value than the best so far.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    bad_checks: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            bad_checks: 0,
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn observe(&mut self, loss: f64) -> StopDecision {
        let improved = self.best.is_none_or(|b| loss < b);
        if improved {
            self.best = Some(loss);
            self.bad_checks = 0;
        } else {
            self.bad_checks += 1;
        }
        StopDecision {
            improved,
            stop: self.bad_checks >= self.patience,
        }
    }
}

/// One validation evaluation, written as a JSON line to the history file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub lr: f64,
    pub step: usize,
    pub val_rmse: f64,
    pub improved: bool,
}

/// Summary of the run for one learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrRun {
    pub lr: f64,
    pub steps: usize,
    pub best_step: usize,
    pub best_val_rmse: Option<f64>,
    pub diverged: bool,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: QeModel,
    pub metadata: TrainingMetadata,
    pub history: Vec<ValidationPoint>,
    pub runs: Vec<LrRun>,
}

/// Splits pooled tuples into (train, validation) with a seeded shuffle.
/// Both parts keep the original order.
pub fn split_validation(tuples: &[QeTuple], fraction: f64, seed: u64) -> Result<(Vec<QeTuple>, Vec<QeTuple>)> {
    let n = tuples.len();
    let n_val = ((n as f64 * fraction).round() as usize).max(1);
    if n < 2 || n_val >= n {
        return Err(Error::InvalidInput(format!(
            "{n} tuples are too few to hold out a validation fraction of {fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let val: BTreeSet<usize> = order[..n_val].iter().copied().collect();
    let (mut train, mut valid) = (Vec::with_capacity(n - n_val), Vec::with_capacity(n_val));
    for (i, t) in tuples.iter().enumerate() {
        if val.contains(&i) {
            valid.push(t.clone());
        } else {
            train.push(t.clone());
        }
    }
    Ok((train, valid))
}

struct RunResult {
    summary: LrRun,
    model: QeModel,
    history: Vec<ValidationPoint>,
}

fn validation_rmse(model: &QeModel, val: &[(Inputs, f64)]) -> f64 {
    let preds: Vec<f64> = val.iter().map(|(x, _)| model.predict_inputs(x)).collect();
    let labels: Vec<f64> = val.iter().map(|(_, l)| *l).collect();
    rmse(&preds, &labels)
}

fn run_one_rate(
    init: &QeModel,
    train: &[(Inputs, f64)],
    val: &[(Inputs, f64)],
    config: &TrainConfig,
    lr: f64,
) -> RunResult {
    let mut model = init.clone();
    let mut opt = AdamW::new(config.adamw, model.params().len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut history = Vec::new();
    let mut best_values: Option<Vec<f64>> = None;
    let mut summary = LrRun {
        lr,
        steps: 0,
        best_step: 0,
        best_val_rmse: None,
        diverged: false,
        stopped_early: false,
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut last_eval_step = 0;

    let mut evaluate = |model: &QeModel, step: usize, history: &mut Vec<ValidationPoint>, best: &mut Option<Vec<f64>>, summary: &mut LrRun| -> Option<bool> {
        let v = validation_rmse(model, val);
        if !v.is_finite() {
            return None;
        }
        let decision = stopper.observe(v);
        history.push(ValidationPoint {
            lr,
            step,
            val_rmse: v,
            improved: decision.improved,
        });
        if decision.improved {
            *best = Some(model.params().values().to_vec());
            summary.best_step = step;
            summary.best_val_rmse = Some(v);
        }
        Some(decision.stop)
    };

    'outer: loop {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&Inputs, f64)> = chunk.iter().map(|&i| (&train[i].0, train[i].1)).collect();
            let (loss, _, grads) = model.loss_and_gradients_prepared(&batch);
            if !loss.is_finite() {
                summary.diverged = true;
                break 'outer;
            }
            opt.step(model.params_mut().values_mut(), grads.values(), lr);
            summary.steps += 1;
            let step = summary.steps;
            if step.is_multiple_of(config.val_every) {
                last_eval_step = step;
                match evaluate(&model, step, &mut history, &mut best_values, &mut summary) {
                    None => {
                        summary.diverged = true;
                        break 'outer;
                    }
                    Some(true) => {
                        summary.stopped_early = true;
                        break 'outer;
                    }
                    Some(false) => {}
                }
            }
            if step >= config.max_steps {
                break 'outer;
            }
        }
    }
    if !summary.diverged && !summary.stopped_early && last_eval_step != summary.steps {
        let step = summary.steps;
        if evaluate(&model, step, &mut history, &mut best_values, &mut summary).is_none() {
            summary.diverged = true;
        }
    }
    if summary.diverged {
        summary.best_val_rmse = None;
    }
    if let Some(values) = best_values {
        model.params_mut().values_mut().copy_from_slice(&values);
    }
    RunResult {
        summary,
        model,
        history,
    }
}

/// Trains on the pooled tuples of every dataset (one per translation
/// direction). A seeded `val_fraction` of the pool is held out; each rate in
/// `lr_grid` gets a full run from the same initialization with patience-based
/// early stopping, and the run with the lowest validation RMSE is returned.
pub fn train(
    train_sets: &[QeDataset],
    config: &TrainConfig,
    encoder_config: &EncoderConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    encoder_config.validate()?;
    if train_sets.is_empty() {
        return Err(Error::Empty("no training datasets".into()));
    }
    if let Some(d) = train_sets.iter().find(|d| d.kind != DatasetKind::SyntheticTer) {
        return Err(Error::InvalidInput(format!(
            "training expects synthetic-ter datasets, got {:?}",
            d.kind
        )));
    }
    let pooled: Vec<QeTuple> = train_sets.iter().flat_map(|d| d.tuples.iter().cloned()).collect();
    if pooled.len() < 20 {
        return Err(Error::InvalidInput(format!(
            "training needs at least 20 tuples, got {}",
            pooled.len()
        )));
    }
    let mut directions = Vec::new();
    for t in &pooled {
        if !directions.contains(&t.direction) {
            directions.push(t.direction.clone());
        }
    }

    let (train_part, val_part) = split_validation(&pooled, config.val_fraction, config.seed)?;
    let set_refs: Vec<&QeDataset> = train_sets.iter().collect();
    let vocab = Vocab::build(&set_refs, config.vocab_max_size, config.vocab_min_count)?;
    let mut init = QeModel::new(vocab, encoder_config.clone())?;
    let prep = |ts: &[QeTuple]| -> Vec<(Inputs, f64)> {
        ts.iter().map(|t| (init.prepare(&t.source, &t.hypothesis), t.label)).collect()
    };
    let train_inputs = prep(&train_part);
    let val_inputs = prep(&val_part);
    // Shift the output so the untrained model predicts the mean label on
    // average; early evaluations then track feature learning instead of the
    // output drifting toward the mean.
    let n = train_inputs.len() as f64;
    let mean_label = train_inputs.iter().map(|(_, l)| l).sum::<f64>() / n;
    let mean_pred = train_inputs.iter().map(|(x, _)| init.predict_inputs(x)).sum::<f64>() / n;
    let bias = init.output_bias();
    init.set_output_bias(bias + mean_label - mean_pred);

    let mut best: Option<RunResult> = None;
    let mut history = Vec::new();
    let mut runs = Vec::new();
    for &lr in &config.lr_grid {
        let mut result = run_one_rate(&init, &train_inputs, &val_inputs, config, lr);
        history.append(&mut result.history);
        runs.push(result.summary.clone());
        let Some(score) = result.summary.best_val_rmse else {
            continue;
        };
        let better = best
            .as_ref()
            .and_then(|b| b.summary.best_val_rmse)
            .is_none_or(|b| score < b);
        if better {
            best = Some(result);
        }
    }
    let best = best.ok_or_else(|| {
        Error::Training(format!(
            "every learning rate diverged: {:?}",
            config.lr_grid
        ))
    })?;
    let metadata = TrainingMetadata {
        best_val_rmse: best.summary.best_val_rmse.unwrap_or(f64::NAN),
        learning_rate: best.summary.lr,
        steps: best.summary.steps,
        best_step: best.summary.best_step,
        directions,
        train_size: train_part.len(),
        val_size: val_part.len(),
        train_config: config.clone(),
        provenance: None,
    };
    Ok(TrainOutcome {
        model: best.model,
        metadata,
        history,
        runs,
    })
}
