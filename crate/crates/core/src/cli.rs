//! Command-line front end: `ter`, `synth`, `train`, `predict`, `evaluate`
//! and `compare`, sharing one JSON run configuration.
//!
//! Exit codes are stable across subcommands: 0 success, 2 input or
//! contract error, 3 degenerate result, 64 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::{self, ColumnMap, DatasetKind, Direction, QeDataset};
use crate::eval::{self, Polarity, System};
use crate::io;
use crate::model::{self, EncoderConfig, EncodingMode, ModelCheckpoint, TrainConfig};
use crate::synthesis::{self, ResourcePreset, SynthesisConfig, Translator};
use crate::ter::{self, TerConfig};
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

const TOOL: &str = env!("CARGO_PKG_NAME");
const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One training input: a labeled TSV and the direction it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub path: PathBuf,
    pub direction: Direction,
}

/// Everything a run depends on. Loaded from `--config`, overridden by flags,
/// and echoed into every artifact so a run can be repeated from its output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Sample-size preset; explicit `synthesis.sample_size` still wins.
    pub preset: Option<ResourcePreset>,
    /// When set, replaces the synthesis, encoder and training seeds.
    pub seed: Option<u64>,
    /// TER settings; also used by synthesis.
    pub ter: TerConfig,
    pub synthesis: SynthesisConfig,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    /// Translator spec for `synth` (`file:`, `cmd:` or `corrupt:`).
    pub translator: Option<String>,
    /// Direction tag of the corpus given to `synth`.
    pub direction: Option<Direction>,
    /// Training inputs for `train`.
    pub data: Vec<DataSource>,
    /// Named input and output paths of the command.
    pub paths: BTreeMap<String, PathBuf>,
}

impl RunConfig {
    fn apply_preset(&mut self, preset: ResourcePreset) {
        let protocol = TrainConfig::default();
        self.preset = Some(preset);
        self.synthesis.sample_size = preset.sample_size();
        self.train.lr_grid = protocol.lr_grid;
        self.train.batch_size = protocol.batch_size;
        self.train.patience = protocol.patience;
    }

    /// Propagates the shared seed and TER settings into the sections.
    fn resolve(&mut self) {
        if let Some(seed) = self.seed {
            self.synthesis.seed = seed;
            self.encoder.seed = seed;
            self.train.seed = seed;
        }
        self.synthesis.ter = self.ter;
    }

    fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf, Failure> {
        if let Some(p) = flag {
            self.paths.insert(key.to_owned(), p);
        }
        self.paths
            .get(key)
            .cloned()
            .ok_or_else(|| Failure::Usage(format!("missing --{key} (not given on the command line or in the config)")))
    }

    fn optional_path(&mut self, key: &str, flag: Option<PathBuf>) -> Option<PathBuf> {
        if let Some(p) = flag {
            self.paths.insert(key.to_owned(), p);
        }
        self.paths.get(key).cloned()
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Reads a run configuration. Provenance files written by this tool (with
/// `tool` and `config` keys) are accepted too, which makes any artifact's
/// sidecar a valid `--config`.
pub fn load_config(path: Option<&Path>, preset: Option<ResourcePreset>) -> crate::Result<RunConfig> {
    let mut file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<Value>(&text)?
        }
        None => json!({}),
    };
    if file.get("tool").is_some() {
        if let Some(inner) = file.get_mut("config") {
            file = inner.take();
        }
    }
    let mut base = RunConfig::default();
    let file_preset = file
        .get("preset")
        .filter(|v| !v.is_null())
        .map(|v| serde_json::from_value::<ResourcePreset>(v.clone()))
        .transpose()?;
    if let Some(p) = file_preset {
        base.apply_preset(p);
    }
    let mut merged = serde_json::to_value(&base)?;
    merge(&mut merged, file);
    let mut config: RunConfig = serde_json::from_value(merged)?;
    if let Some(p) = preset {
        config.apply_preset(p);
    }
    Ok(config)
}

fn provenance(command: &str, config: &RunConfig) -> Value {
    json!({
        "tool": TOOL,
        "version": VERSION,
        "command": command,
        "config": config,
    })
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn write_json(path: &Path, value: &Value) -> crate::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    io::write_atomic(path, text.as_bytes())
}

/// Writes a text artifact and its provenance sidecar.
fn write_with_meta(path: &Path, text: &str, prov: &Value) -> crate::Result<()> {
    io::write_atomic(path, text.as_bytes())?;
    write_json(&sidecar(path), prov)
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Run(e.into())
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser, Debug)]
#[command(name = "synqe", version, about = "Synthetic-data translation quality estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score hypotheses against references with TER.
    Ter(TerArgs),
    /// Build a TER-labeled QE dataset from a parallel corpus.
    Synth(SynthArgs),
    /// Train a QE model with a learning-rate sweep.
    Train(TrainArgs),
    /// Score source/hypothesis pairs with a trained checkpoint.
    Predict(PredictArgs),
    /// Correlate predictions with gold labels.
    Evaluate(EvaluateArgs),
    /// Compare two systems with the Williams test.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TerArgs {
    #[command(flatten)]
    common: ConfigArg,
    /// Hypotheses, one per line.
    #[arg(long)]
    hyp: Option<PathBuf>,
    /// References, line-aligned with the hypotheses.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Write per-sentence edit counts and scores as TSV.
    #[arg(long)]
    sentence_scores: Option<PathBuf>,
    #[arg(long)]
    case_sensitive: bool,
    /// Do not split punctuation off words.
    #[arg(long)]
    keep_punctuation: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: ConfigArg,
    /// Source side of the parallel corpus.
    #[arg(long)]
    src: Option<PathBuf>,
    /// Target side of the parallel corpus.
    #[arg(long)]
    tgt: Option<PathBuf>,
    /// Direction tag, e.g. en-de.
    #[arg(long)]
    direction: Option<Direction>,
    /// file:PATH, cmd:TEMPLATE (with {src} and {out}), corrupt:RATE or corrupt:LOW..HIGH.
    #[arg(long)]
    translator: Option<String>,
    /// Output dataset TSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report JSON; defaults to OUT.report.json.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// high, medium or low: the sample size and training protocol of a resource tier.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<ResourcePreset>,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    ter_cutoff: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: ConfigArg,
    /// Labeled TSV; repeat for several directions.
    #[arg(long)]
    data: Vec<PathBuf>,
    /// Direction of each --data, in the same order.
    #[arg(long)]
    direction: Vec<Direction>,
    /// concat (one [CLS] over source and hypothesis) or split.
    #[arg(long)]
    mode: Option<EncodingMode>,
    /// Checkpoint path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validation history (JSON lines); defaults to OUT.history.jsonl.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// high, medium or low: the sample size and training protocol of a resource tier.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<ResourcePreset>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Learning rate; repeat to form the grid.
    #[arg(long = "lr")]
    lr: Vec<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    val_every: Option<usize>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    ff_dim: Option<usize>,
    #[arg(long)]
    max_seq_len: Option<usize>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    common: ConfigArg,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// TSV with source and hypothesis columns; labels optional.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output TSV: the input rows with a score column appended.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Column indices of source, hypothesis and label.
    #[arg(long, default_value = "0,1,2")]
    columns: ColumnMap,
}

#[derive(Args, Debug)]
struct GoldArgs {
    /// Gold TSV (source, hypothesis, label by default).
    #[arg(long)]
    gold: Option<PathBuf>,
    /// higher-better or lower-better.
    #[arg(long)]
    gold_polarity: Polarity,
    #[arg(long, default_value = "0,1,2")]
    gold_columns: ColumnMap,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    common: ConfigArg,
    /// Predictions; the last column of each line is the score.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// higher-better or lower-better.
    #[arg(long)]
    pred_polarity: Polarity,
    #[command(flatten)]
    gold: GoldArgs,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    common: ConfigArg,
    #[arg(long)]
    pred_a: Option<PathBuf>,
    /// higher-better or lower-better.
    #[arg(long)]
    polarity_a: Polarity,
    #[arg(long)]
    pred_b: Option<PathBuf>,
    /// higher-better or lower-better.
    #[arg(long)]
    polarity_b: Polarity,
    #[command(flatten)]
    gold: GoldArgs,
    /// Also write the comparison as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_preset(s: &str) -> Result<ResourcePreset, String> {
    serde_json::from_value(Value::String(s.to_ascii_lowercase()))
        .map_err(|_| format!("unknown preset {s:?} (expected high, medium or low)"))
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Ter(a) => cmd_ter(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Degenerate(_) => EXIT_DEGENERATE,
                _ => EXIT_INPUT,
            }
        }
    }
}

fn cmd_ter(a: TerArgs) -> CmdResult {
    let mut cfg = load_config(a.common.config.as_deref(), None)?;
    if a.case_sensitive {
        cfg.ter.case_sensitive = true;
    }
    if a.keep_punctuation {
        cfg.ter.split_punctuation = false;
    }
    let hyp_path = cfg.path("hyp", a.hyp)?;
    let ref_path = cfg.path("ref", a.reference)?;
    let scores_path = cfg.optional_path("sentence-scores", a.sentence_scores);
    cfg.resolve();

    let hyps = io::read_lines(&hyp_path)?;
    let refs = io::read_lines(&ref_path)?;
    if hyps.len() != refs.len() {
        return Err(Error::LineCountMismatch {
            left_name: hyp_path.display().to_string(),
            left: hyps.len(),
            right_name: ref_path.display().to_string(),
            right: refs.len(),
        }
        .into());
    }
    let mut results = Vec::with_capacity(hyps.len());
    for (i, (h, r)) in hyps.iter().zip(&refs).enumerate() {
        let res = ter::ter(h, r, &cfg.ter).map_err(|e| Error::InvalidInput(format!("line {}: {e}", i + 1)))?;
        results.push(res);
    }
    let score = ter::corpus_score(&results)
        .ok_or_else(|| Error::Empty(format!("{} has no lines", ref_path.display())))?;
    if let Some(path) = scores_path {
        let mut text = String::from("insertions\tdeletions\tsubstitutions\tshifts\tref_length\tter\n");
        for r in &results {
            text.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{:.6}\n",
                r.insertions, r.deletions, r.substitutions, r.shifts, r.ref_length, r.score
            ));
        }
        write_with_meta(&path, &text, &provenance("ter", &cfg))?;
    }
    println!("{score:.6}");
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    let mut cfg = load_config(a.common.config.as_deref(), a.preset)?;
    let src = cfg.path("src", a.src)?;
    let tgt = cfg.path("tgt", a.tgt)?;
    let out = cfg.path("out", a.out)?;
    let report_path = cfg
        .optional_path("report", a.report)
        .unwrap_or_else(|| with_suffix(&out, ".report.json"));
    cfg.paths.insert("report".into(), report_path.clone());
    if let Some(t) = a.translator {
        cfg.translator = Some(t);
    }
    if let Some(d) = a.direction {
        cfg.direction = Some(d);
    }
    if let Some(s) = a.seed {
        cfg.seed = Some(s);
    }
    if let Some(n) = a.sample_size {
        cfg.synthesis.sample_size = n;
    }
    if let Some(n) = a.max_tokens {
        cfg.synthesis.max_tokens = n;
    }
    if let Some(c) = a.ter_cutoff {
        cfg.synthesis.ter_cutoff = c;
    }
    cfg.resolve();
    let spec = cfg
        .translator
        .clone()
        .ok_or_else(|| Failure::Usage("missing --translator".into()))?;
    let translator = Translator::parse(&spec, cfg.synthesis.seed)?;
    let direction = cfg.direction.clone().unwrap_or_default();

    let (corpus, skipped) = data::read_parallel_corpus(&src, &tgt, direction)?;
    if skipped > 0 {
        eprintln!("skipped {skipped} pairs with an empty side");
    }
    let (dataset, report) = synthesis::synthesize(&corpus, &translator, &cfg.synthesis)?;
    let prov = provenance("synth", &cfg);
    write_with_meta(&out, &data::render_qe_tsv(&dataset)?, &prov)?;
    let mut report_json = serde_json::to_value(&report)?;
    report_json["provenance"] = prov;
    write_json(&report_path, &report_json)?;
    println!(
        "sampled {} kept {} discarded {}",
        report.sampled, report.kept, report.discarded_by_cutoff
    );
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let mut cfg = load_config(a.common.config.as_deref(), a.preset)?;
    if !a.data.is_empty() || !a.direction.is_empty() {
        if a.data.len() != a.direction.len() {
            return Err(Failure::Usage(format!(
                "{} --data flags but {} --direction flags; give one direction per dataset",
                a.data.len(),
                a.direction.len()
            )));
        }
        cfg.data = a
            .data
            .into_iter()
            .zip(a.direction)
            .map(|(path, direction)| DataSource { path, direction })
            .collect();
    }
    if cfg.data.is_empty() {
        return Err(Failure::Usage("missing --data".into()));
    }
    let out = cfg.path("out", a.out)?;
    let history_path = cfg
        .optional_path("history", a.history)
        .unwrap_or_else(|| with_suffix(&out, ".history.jsonl"));
    cfg.paths.insert("history".into(), history_path.clone());
    if let Some(m) = a.mode {
        cfg.encoder.mode = m;
    }
    if let Some(s) = a.seed {
        cfg.seed = Some(s);
    }
    let t = &mut cfg.train;
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if !a.lr.is_empty() {
        t.lr_grid = a.lr;
    }
    if let Some(v) = a.patience {
        t.patience = v;
    }
    if let Some(v) = a.val_every {
        t.val_every = v;
    }
    if let Some(v) = a.val_fraction {
        t.val_fraction = v;
    }
    if let Some(v) = a.max_steps {
        t.max_steps = v;
    }
    let e = &mut cfg.encoder;
    if let Some(v) = a.embed_dim {
        e.embed_dim = v;
    }
    if let Some(v) = a.layers {
        e.layers = v;
    }
    if let Some(v) = a.heads {
        e.heads = v;
    }
    if let Some(v) = a.ff_dim {
        e.ff_dim = v;
    }
    if let Some(v) = a.max_seq_len {
        e.max_seq_len = v;
    }
    cfg.resolve();

    let sets = cfg
        .data
        .iter()
        .map(|d| data::read_qe_tsv(&d.path, DatasetKind::SyntheticTer, &d.direction))
        .collect::<crate::Result<Vec<QeDataset>>>()?;
    let outcome = model::train(&sets, &cfg.train, &cfg.encoder)?;
    let prov = provenance("train", &cfg);
    let mut metadata = outcome.metadata;
    metadata.provenance = Some(prov.clone());
    let checkpoint = ModelCheckpoint {
        model: outcome.model,
        metadata,
    };
    model::save_checkpoint(&checkpoint, &out)?;
    let mut history = String::new();
    for point in &outcome.history {
        history.push_str(&serde_json::to_string(point)?);
        history.push('\n');
    }
    write_with_meta(&history_path, &history, &prov)?;
    for run in &outcome.runs {
        eprintln!(
            "lr {}: {} steps, best step {}, best val RMSE {}{}",
            run.lr,
            run.steps,
            run.best_step,
            run.best_val_rmse.map_or("-".into(), |v| format!("{v:.6}")),
            if run.diverged { " (diverged)" } else { "" }
        );
    }
    println!("learning rate: {}", checkpoint.metadata.learning_rate);
    println!("best validation RMSE: {:.6}", checkpoint.metadata.best_val_rmse);
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> CmdResult {
    let mut cfg = load_config(a.common.config.as_deref(), None)?;
    let cp_path = cfg.path("checkpoint", a.checkpoint)?;
    let input = cfg.path("input", a.input)?;
    let out = cfg.path("out", a.out)?;
    cfg.resolve();

    let checkpoint = model::load_checkpoint(&cp_path)?;
    let lines = io::read_lines(&input)?;
    let rows = data::read_pair_rows(&input, a.columns)?;
    let header = rows.len() < lines.len();
    let pairs: Vec<(&str, &str)> = rows
        .iter()
        .map(|r| (r.source.as_str(), r.hypothesis.as_str()))
        .collect();
    let scores = checkpoint.model.predict(&pairs);
    let mut text = String::new();
    let body = if header {
        text.push_str(&lines[0]);
        text.push_str("\tscore\n");
        &lines[1..]
    } else {
        &lines[..]
    };
    for (line, score) in body.iter().zip(&scores) {
        text.push_str(&format!("{line}\t{score}\n"));
    }
    write_with_meta(&out, &text, &provenance("predict", &cfg))?;
    Ok(())
}

/// Scores from the last tab-separated column; a non-numeric first line is a
/// header.
fn read_scores(path: &Path) -> crate::Result<Vec<f64>> {
    let lines = io::read_lines(path)?;
    let mut scores = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let field = line.rsplit('\t').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => scores.push(v),
            _ if i == 0 => continue,
            _ => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: i + 1,
                    message: format!("score {field:?} is not a finite number"),
                })
            }
        }
    }
    Ok(scores)
}

fn read_gold(cfg: &mut RunConfig, g: &GoldArgs) -> Result<(PathBuf, Vec<f64>), Failure> {
    let path = cfg.path("gold", g.gold.clone())?;
    let kind = match g.gold_polarity {
        Polarity::LowerBetter => DatasetKind::GoldHter,
        Polarity::HigherBetter => DatasetKind::GoldDa,
    };
    let set = data::read_qe_tsv_with_columns(&path, kind, &Direction::default(), g.gold_columns)?;
    Ok((path, set.labels()))
}

fn cmd_evaluate(a: EvaluateArgs) -> CmdResult {
    let mut cfg = load_config(a.common.config.as_deref(), None)?;
    let pred_path = cfg.path("pred", a.pred)?;
    let (gold_path, gold) = read_gold(&mut cfg, &a.gold)?;
    let out = cfg.optional_path("out", a.out);
    cfg.resolve();

    let preds = read_scores(&pred_path)?;
    let report = eval::evaluate_labels(
        &pred_path.display().to_string(),
        &preds,
        a.pred_polarity,
        &gold_path.display().to_string(),
        &gold,
        a.gold.gold_polarity,
    )?;
    println!("{:<40} {:>6} {:>9} {:>5}", "system", "n", "r", "flip");
    println!(
        "{:<40} {:>6} {:>9.4} {:>5}",
        report.system,
        report.n,
        report.r,
        if report.flip_applied { "yes" } else { "no" }
    );
    let mut value = serde_json::to_value(&report)?;
    value["prediction_polarity"] = serde_json::to_value(a.pred_polarity)?;
    value["gold_polarity"] = serde_json::to_value(a.gold.gold_polarity)?;
    println!("{}", serde_json::to_string(&value)?);
    if let Some(path) = out {
        value["provenance"] = provenance("evaluate", &cfg);
        write_json(&path, &value)?;
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> CmdResult {
    let mut cfg = load_config(a.common.config.as_deref(), None)?;
    let pa = cfg.path("pred-a", a.pred_a)?;
    let pb = cfg.path("pred-b", a.pred_b)?;
    let (gold_path, gold) = read_gold(&mut cfg, &a.gold)?;
    let out = cfg.optional_path("out", a.out);
    cfg.resolve();

    let (sa, sb) = (read_scores(&pa)?, read_scores(&pb)?);
    let (na, nb) = (pa.display().to_string(), pb.display().to_string());
    let cmp = eval::compare(
        System {
            name: &na,
            scores: &sa,
            polarity: a.polarity_a,
        },
        System {
            name: &nb,
            scores: &sb,
            polarity: a.polarity_b,
        },
        &gold_path.display().to_string(),
        &gold,
        a.gold.gold_polarity,
    )?;
    let star = |won: bool| if won { "*" } else { "" };
    let sig = &cmp.significance;
    println!("a: {}  r = {:.4}{}", na, cmp.a.r, star(sig.winner == eval::Winner::First));
    println!("b: {}  r = {:.4}{}", nb, cmp.b.r, star(sig.winner == eval::Winner::Second));
    println!("r(a,b) = {:.4}", cmp.r_ab);
    println!("t = {:.3}  df = {}  p = {:.4}", sig.t, sig.df, sig.p);
    println!("winner: {}{}", cmp.winner_name(), star(cmp.significant()));
    let mut value = serde_json::to_value(&cmp)?;
    value["winner"] = Value::String(cmp.winner_name().to_owned());
    println!("{}", serde_json::to_string(&value)?);
    if let Some(path) = out {
        value["provenance"] = provenance("compare", &cfg);
        write_json(&path, &value)?;
    }
    Ok(())
}
