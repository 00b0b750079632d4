//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each, and exits non-zero if a hard criterion fails. Criteria 7 and 8
//! are soft expectations: their outcome is reported but does not fail the run.
//!
//! `cargo test -p synqe --test acceptance -- 1 4 9` runs a subset.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synqe::data::{write_qe_tsv, QeDataset};
use synqe::eval::student_t::upper_tail;
use synqe::eval::{evaluate_labels, pearson, williams_test, Polarity, Winner};
use synqe::model::{
    load_checkpoint, rmse, save_checkpoint, train, AdamW, AdamWConfig, EncoderConfig, EncodingMode, QeModel,
    TrainConfig,
};
use synqe::synthesis::{synthesize, CorruptingTranslator, NoiseLevel, SynthesisConfig, Translator};
use synqe::ter::{ter, ter_tokens, TerConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

// ---------------------------------------------------------------- 1: TER

fn criterion_1(_: &mut Lab) -> Outcome {
    let start = Instant::now();
    let cfg = TerConfig::default();
    let identity = ter("a b c d", "a b c d", &cfg).unwrap();
    let shifted = ter("b c d a", "a b c d", &cfg).unwrap();
    let empty = ter("", "a b c d", &cfg).unwrap();
    let examples = identity.score == 0.0 && shifted.score == 0.25 && shifted.shifts == 1 && empty.score == 1.0;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let alphabet = ["a", "b", "c", "d"];
    let mut draw = |min: usize| -> Vec<String> {
        let n = rng.random_range(min..=7);
        (0..n).map(|_| alphabet[rng.random_range(0..4)].to_owned()).collect()
    };
    let (mut above_free, mut below_opt, mut with_shifts) = (0, 0, 0);
    for _ in 0..1000 {
        let (h, r) = (draw(0), draw(1));
        let res = ter_tokens(&h, &r, &cfg).unwrap();
        with_shifts += usize::from(res.shifts > 0);
        if res.score > levenshtein(&h, &r) as f64 / r.len() as f64 {
            above_free += 1;
        }
        if res.score < exhaustive_ter_depth2(&h, &r) {
            below_opt += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        examples && above_free == 0 && below_opt == 0 && elapsed < Duration::from_secs(30),
        format!(
            "examples {}, 1000 random pairs ({with_shifts} shifted): {above_free} above shift-free rate, \
             {below_opt} below depth-2 optimum, {:.1} s",
            if examples { "exact" } else { "WRONG" },
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------- 2: gradients

fn criterion_2(_: &mut Lab) -> Outcome {
    let start = Instant::now();
    let data = synthetic(&language_a().corpus(40, 5), 5);
    let batch: Vec<_> = data.tuples.iter().take(4).cloned().collect();
    let vocab = vocab_for(&[&data]);
    let mut worst: f64 = 0.0;
    let mut fewest = usize::MAX;
    let mut all_groups = true;
    for mode in [EncodingMode::Concat, EncodingMode::Split] {
        for seed in [1, 2, 3] {
            let mut model = QeModel::new(vocab.clone(), small_encoder(mode, seed)).unwrap();
            let report = gradient_check(&mut model, &batch, 6, 1e-4, seed);
            all_groups &= report.groups == model.params().specs().len();
            worst = worst.max(report.worst);
            fewest = fewest.min(report.checked);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-4 && fewest >= 100 && all_groups && elapsed < Duration::from_secs(60),
        format!(
            "concat+split x 3 seeds, >= {fewest} coordinates per run over all groups, worst relative error {worst:.2e}, {:.1} s",
            secs(elapsed)
        ),
    )
}

// ---------------------------------------------------------------- 3: optimizer and loss

fn criterion_3(_: &mut Lab) -> Outcome {
    let no_decay = AdamWConfig {
        weight_decay: 0.0,
        ..AdamWConfig::default()
    };
    let mut theta = [1.0];
    AdamW::new(no_decay, 1).step(&mut theta, &[0.5], 0.1);
    // First step: m_hat = g, v_hat = g^2.
    let expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
    let adam = (theta[0] - expected).abs() < 1e-8 && ((1.0 - theta[0]) - 0.1).abs() < 1e-8;
    let mut decayed = [1.0];
    let decay = AdamWConfig {
        weight_decay: 0.1,
        ..AdamWConfig::default()
    };
    AdamW::new(decay, 1).step(&mut decayed, &[0.0], 0.1);
    let decay_ok = (decayed[0] - 0.99).abs() < 1e-15;

    let rmse_ok = rmse(&[0.0, 1.0], &[1.0, 0.0]) == 1.0
        && rmse(&[0.5], &[0.25]) == 0.25
        && rmse(&[0.2, 0.4], &[0.2, 0.4]) == 0.0;

    let mut data = synthetic(&language_a().corpus(200, 3), 3);
    for t in &mut data.tuples {
        t.label = 0.3;
    }
    let config = TrainConfig {
        batch_size: 16,
        lr_grid: vec![1e-3],
        val_every: 25,
        val_fraction: 0.2,
        max_steps: 400,
        seed: 3,
        ..TrainConfig::default()
    };
    let out = train(&[data], &config, &small_encoder(EncodingMode::Concat, 3)).unwrap();
    let val = out.metadata.best_val_rmse;
    outcome(
        adam && decay_ok && rmse_ok && val < 0.02,
        format!(
            "AdamW first step {:.10} (closed form {expected:.10}), decay step {}, RMSE examples {}, constant-label val RMSE {val:.4}",
            theta[0],
            decayed[0],
            if rmse_ok { "exact" } else { "WRONG" }
        ),
    )
}

// ---------------------------------------------------------------- 4: statistics

/// Double-double arithmetic, about 32 significant digits.
#[derive(Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd(s, (a - (s - bb)) + (b - bb))
    }

    fn norm(hi: f64, lo: f64) -> Dd {
        let s = hi + lo;
        Dd(s, lo - (s - hi))
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.0, o.0);
        Dd::norm(s.0, s.1 + self.1 + o.1)
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(Dd(-o.0, -o.1))
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        Dd::norm(p, e + self.0 * o.1 + self.1 * o.0)
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.sub(o.mul(Dd(q1, 0.0)));
        let q2 = r.0 / o.0;
        let r = r.sub(o.mul(Dd(q2, 0.0)));
        let q3 = r.0 / o.0;
        Dd::norm(q1, q2).add(Dd(q3, 0.0))
    }

    fn sqrt(self) -> Dd {
        if self.0 <= 0.0 {
            return Dd(0.0, 0.0);
        }
        let y = Dd(self.0.sqrt(), 0.0);
        y.add(self.sub(y.mul(y)).div(y.mul(Dd(2.0, 0.0))))
    }
}

fn williams_t_oracle(r12: f64, r13: f64, r23: f64, n: usize) -> f64 {
    let c = |v: f64| Dd(v, 0.0);
    let (a, b, r) = (c(r12), c(r13), c(r23));
    let one = c(1.0);
    let nm1 = c(n as f64 - 1.0);
    let k = one
        .sub(a.mul(a))
        .sub(b.mul(b))
        .sub(r.mul(r))
        .add(c(2.0).mul(a).mul(b).mul(r));
    let num = a.sub(b).mul(nm1.mul(one.add(r)).sqrt());
    let mean = a.add(b).div(c(2.0));
    let omr = one.sub(r);
    let den = c(2.0)
        .mul(k)
        .mul(nm1)
        .div(c(n as f64 - 3.0))
        .add(mean.mul(mean).mul(omr).mul(omr).mul(omr))
        .sqrt();
    num.div(den).0
}

/// `P(T > t)` by Simpson integration after substituting `x = sqrt(df)·tan θ`,
/// which turns the density into `cos^(df-1) θ` on a finite interval.
fn t_tail_by_integration(t: f64, df: f64) -> f64 {
    let f = |th: f64| th.cos().powf(df - 1.0);
    let simpson = |a: f64, b: f64| {
        let n = 200_000;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let half = std::f64::consts::FRAC_PI_2;
    simpson((t / df.sqrt()).atan(), half) / simpson(-half, half)
}

fn criterion_4(_: &mut Lab) -> Outcome {
    let mut notes = Vec::new();
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    let examples = close(pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0)
        && close(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0)
        && close(pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap(), 0.8);
    notes.push(format!("Pearson examples {}", if examples { "exact" } else { "WRONG" }));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut affine: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(3..60);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (scale, shift) = (rng.random_range(0.01..100.0), rng.random_range(-1e3..1e3));
        let moved: Vec<f64> = a.iter().map(|v| v * scale + shift).collect();
        affine = affine.max((pearson(&moved, &b).unwrap() - pearson(&a, &b).unwrap()).abs());
    }
    notes.push(format!("affine drift {affine:.1e}"));

    let (mut oracle, mut antisym_ok) = (0.0f64, true);
    let mut triples = 0;
    while triples < 1000 {
        let r12 = rng.random_range(-0.95..0.95);
        let r13 = rng.random_range(-0.95..0.95);
        let r23 = rng.random_range(-0.95..0.95);
        let k: f64 = 1.0 - r12 * r12 - r13 * r13 - r23 * r23 + 2.0 * r12 * r13 * r23;
        if k < 1e-3 || r12 == r13 {
            continue;
        }
        triples += 1;
        let n = rng.random_range(5..2000);
        let ab = williams_test(r12, r13, r23, n).unwrap();
        let ba = williams_test(r13, r12, r23, n).unwrap();
        oracle = oracle.max((ab.t - williams_t_oracle(r12, r13, r23, n)).abs());
        let mirrored = match ab.winner {
            Winner::First => ba.winner == Winner::Second,
            Winner::Second => ba.winner == Winner::First,
            Winner::Tie => ba.winner == Winner::Tie,
        };
        antisym_ok &= ab.t == -ba.t && (ab.p + ba.p - 1.0).abs() < 1e-9 && mirrored;
    }
    notes.push(format!("Williams t vs double-double oracle {oracle:.1e}"));

    let tie = williams_test(0.4, 0.4, 0.3, 50).unwrap();
    let tie_ok = tie.t == 0.0 && tie.p == 0.5 && tie.winner == Winner::Tie;
    notes.push(format!(
        "antisymmetry {}, tie {}",
        if antisym_ok { "exact" } else { "BROKEN" },
        if tie_ok { "exact" } else { "WRONG" }
    ));

    let p_lib = upper_tail(1.812, 10.0);
    let p_int = t_tail_by_integration(1.812, 10.0);
    let calib = (p_lib - 0.05).abs() < 5e-4 && (p_int - 0.05).abs() < 5e-4 && (p_lib - p_int).abs() < 1e-8;
    notes.push(format!("p(1.812, 10) = {p_lib:.6} (integrated {p_int:.6})"));

    let pinned = williams_test(0.6, 0.5, 0.7, 100).unwrap();
    let pinned_t = williams_t_oracle(0.6, 0.5, 0.7, 100);
    let pinned_p = t_tail_by_integration(pinned_t, 97.0);
    let pinned_ok =
        pinned.t > 0.0 && pinned.p < 0.5 && (pinned.t - pinned_t).abs() < 1e-9 && (pinned.p - pinned_p).abs() < 1e-8;
    notes.push(format!("(0.6, 0.5, 0.7, 100): t = {:.6}, p = {:.6}", pinned.t, pinned.p));

    outcome(
        examples && affine < 1e-9 && oracle < 1e-9 && antisym_ok && tie_ok && calib && pinned_ok,
        notes.join("; "),
    )
}

// ---------------------------------------------------------------- 5: filter accounting

fn criterion_5(_: &mut Lab) -> Outcome {
    let corpus = language_a().corpus(500, 55);
    let translator = Translator::Corrupting(CorruptingTranslator::new(NoiseLevel::Fixed(0.5), 55).unwrap());
    let config = SynthesisConfig {
        sample_size: 500,
        ter_cutoff: 1.0,
        seed: 55,
        ..SynthesisConfig::default()
    };
    let (data, report) = synthesize(&corpus, &translator, &config).unwrap();
    let conserved = report.sampled == 500
        && report.translated == report.sampled
        && report.labeled == report.sampled
        && report.kept + report.discarded_by_cutoff == report.sampled
        && report.kept == data.len();
    // The toy lexicon is word-for-word, so every source has one reference.
    let reference: std::collections::HashMap<&str, &str> =
        corpus.pairs.iter().map(|p| (p.source.as_str(), p.reference.as_str())).collect();
    let mut mismatched = 0;
    let mut above = 0;
    for t in &data.tuples {
        let again = ter(&t.hypothesis, reference[t.source.as_str()], &TerConfig::default()).unwrap();
        mismatched += usize::from(again.score.to_bits() != t.label.to_bits());
        above += usize::from(t.label > 1.0);
    }
    outcome(
        conserved && mismatched == 0 && above == 0,
        format!(
            "sampled {}, kept {}, discarded {}; {mismatched} labels differ from recomputed TER, {above} above 1.0",
            report.sampled, report.kept, report.discarded_by_cutoff
        ),
    )
}

// ---------------------------------------------------------------- 6-8: desk-scale experiments

const SEEDS: [u64; 3] = [0, 1, 2];

fn desk_encoder(mode: EncodingMode, seed: u64) -> EncoderConfig {
    EncoderConfig {
        embed_dim: 64,
        layers: 2,
        heads: 2,
        ff_dim: 128,
        max_seq_len: 48,
        mode,
        seed,
        head_hidden: None,
    }
}

fn desk_training(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 32,
        val_every: 50,
        patience: 3,
        max_steps: 2000,
        seed,
        ..TrainConfig::default()
    }
}

struct Direction {
    train: QeDataset,
    held_out: QeDataset,
}

fn direction_a(seed: u64) -> Direction {
    let lang = language_a();
    Direction {
        train: synthetic(&lang.corpus(2000, 100 + seed), 100 + seed),
        held_out: synthetic(&lang.corpus(300, 900 + seed), 900 + seed),
    }
}

fn direction_b(seed: u64) -> Direction {
    let lang = language_b();
    Direction {
        train: synthetic(&lang.corpus(2000, 200 + seed), 200 + seed),
        held_out: synthetic(&lang.corpus(300, 950 + seed), 950 + seed),
    }
}

/// Pearson correlation between predicted and true TER on a held-out set.
fn held_out_r(model: &QeModel, held_out: &QeDataset) -> f64 {
    let pairs: Vec<_> = held_out.tuples.iter().map(|t| (t.source.as_str(), t.hypothesis.as_str())).collect();
    pearson(&model.predict(&pairs), &held_out.labels()).unwrap()
}

fn fit(sets: &[QeDataset], mode: EncodingMode, seed: u64) -> QeModel {
    train(sets, &desk_training(seed), &desk_encoder(mode, seed)).unwrap().model
}

/// Results shared between criteria 6, 7 and 8.
#[derive(Default)]
struct Lab {
    concat_a: Option<(Vec<f64>, Duration)>,
}

impl Lab {
    fn concat_a(&mut self) -> (Vec<f64>, Duration) {
        self.concat_a
            .get_or_insert_with(|| {
                let start = Instant::now();
                let rs = SEEDS
                    .iter()
                    .map(|&s| {
                        let a = direction_a(s);
                        held_out_r(&fit(&[a.train], EncodingMode::Concat, s), &a.held_out)
                    })
                    .collect();
                (rs, start.elapsed())
            })
            .clone()
    }
}

fn list(rs: &[f64]) -> String {
    rs.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
}

fn criterion_6(lab: &mut Lab) -> Outcome {
    let (rs, elapsed) = lab.concat_a();
    let hits = rs.iter().filter(|&&r| r >= 0.5).count();
    outcome(
        hits >= 2 && elapsed < Duration::from_secs(600),
        format!("concat held-out r = [{}], {hits}/3 >= 0.5, {:.0} s", list(&rs), secs(elapsed)),
    )
}

fn criterion_7(lab: &mut Lab) -> Outcome {
    let (concat, _) = lab.concat_a();
    let split: Vec<f64> = SEEDS
        .iter()
        .map(|&s| {
            let a = direction_a(s);
            held_out_r(&fit(&[a.train], EncodingMode::Split, s), &a.held_out)
        })
        .collect();
    let wins = concat.iter().zip(&split).filter(|(c, s)| c >= s).count();
    outcome(
        wins >= 2,
        format!("concat r = [{}], split r = [{}], concat >= split in {wins}/3", list(&concat), list(&split)),
    )
}

fn criterion_8(lab: &mut Lab) -> Outcome {
    let (single_a, _) = lab.concat_a();
    let mut lines = Vec::new();
    let mut wins = 0;
    for (i, &s) in SEEDS.iter().enumerate() {
        let (a, b) = (direction_a(s), direction_b(s));
        let single_b = held_out_r(&fit(std::slice::from_ref(&b.train), EncodingMode::Concat, s), &b.held_out);
        let joint = fit(&[a.train, b.train], EncodingMode::Concat, s);
        let (joint_a, joint_b) = (held_out_r(&joint, &a.held_out), held_out_r(&joint, &b.held_out));
        let (j, m) = ((joint_a + joint_b) / 2.0, (single_a[i] + single_b) / 2.0);
        wins += usize::from(j >= m);
        lines.push(format!("seed {s}: joint {j:.3} vs single {m:.3}"));
    }
    outcome(wins >= 2, format!("{}; joint >= single in {wins}/3", lines.join(", ")))
}

// ---------------------------------------------------------------- 9: determinism

fn synqe(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_synqe")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn criterion_9(_: &mut Lab) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = synthetic(&language_a().corpus(150, 9), 9);
    let tsv = d.join("train.tsv");
    write_qe_tsv(&data, &tsv).unwrap();
    let run = |tag: &str| {
        let cp = d.join(format!("model{tag}.json"));
        let hist = d.join(format!("history{tag}.jsonl"));
        let preds = d.join(format!("pred{tag}.tsv"));
        let out = synqe(&[
            "train", "--data", path(&tsv), "--direction", "aa-bb", "--out", path(&cp), "--history", path(&hist),
            "--seed", "9", "--lr", "1e-3", "--lr", "1e-4", "--batch-size", "16", "--val-every", "10", "--max-steps",
            "60", "--embed-dim", "16", "--heads", "2", "--ff-dim", "24", "--layers", "2",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let out = synqe(&["predict", "--checkpoint", path(&cp), "--input", path(&tsv), "--out", path(&preds)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(&hist).unwrap(), std::fs::read(&preds).unwrap(), cp)
    };
    let (h1, p1, cp) = run("1");
    let (h2, p2, _) = run("2");
    let histories = h1 == h2 && !h1.is_empty();
    let predictions = p1 == p2 && !p1.is_empty();

    let loaded = load_checkpoint(&cp).unwrap();
    let again = d.join("again.json");
    save_checkpoint(&loaded, &again).unwrap();
    let reloaded = load_checkpoint(&again).unwrap();
    let pairs: Vec<_> = data.tuples.iter().map(|t| (t.source.as_str(), t.hypothesis.as_str())).collect();
    let bits = |m: &QeModel| m.predict(&pairs).iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let cli_scores: Vec<u64> = String::from_utf8(p1)
        .unwrap()
        .lines()
        .map(|l| l.rsplit('\t').next().unwrap().parse::<f64>().unwrap().to_bits())
        .collect();
    let roundtrip = bits(&loaded.model) == bits(&reloaded.model) && bits(&loaded.model) == cli_scores;
    outcome(
        histories && predictions && roundtrip,
        format!(
            "histories {}, prediction files {}, checkpoint roundtrip {}",
            if histories { "identical" } else { "DIFFER" },
            if predictions { "identical" } else { "DIFFER" },
            if roundtrip { "bit-exact" } else { "DIFFERS" }
        ),
    )
}

// ---------------------------------------------------------------- 10: polarity

fn criterion_10(_: &mut Lab) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let gold: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..100.0)).collect();
    let preds: Vec<f64> = gold.iter().map(|g| -g / 100.0 + rng.random_range(-0.3..0.3)).collect();
    let same = evaluate_labels("m", &preds, Polarity::HigherBetter, "g", &gold, Polarity::HigherBetter).unwrap();
    let flip = evaluate_labels("m", &preds, Polarity::LowerBetter, "g", &gold, Polarity::HigherBetter).unwrap();
    let negated = flip.r == -same.r && flip.flip_applied && !same.flip_applied;

    let dir = tempfile::tempdir().unwrap();
    let gold_path = dir.path().join("gold.tsv");
    let pred_path = dir.path().join("pred.txt");
    let gold_text: String = gold.iter().enumerate().map(|(i, g)| format!("s{i}\th{i}\t{g}\n")).collect();
    let pred_text: String = preds.iter().map(|p| format!("{p}\n")).collect();
    std::fs::write(&gold_path, gold_text).unwrap();
    std::fs::write(&pred_path, pred_text).unwrap();
    let cli = |polarity: &str| -> serde_json::Value {
        let out = synqe(&[
            "evaluate", "--pred", path(&pred_path), "--pred-polarity", polarity, "--gold", path(&gold_path),
            "--gold-polarity", "higher-better",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        serde_json::from_str(text.lines().last().unwrap()).unwrap()
    };
    let (a, b) = (cli("higher-better"), cli("lower-better"));
    let json = a["r"].as_f64().unwrap() == -b["r"].as_f64().unwrap()
        && a["flip_applied"] == false
        && b["flip_applied"] == true;
    outcome(
        negated && json,
        format!("r = {:.6} vs {:.6} with flip flag {}; CLI JSON {}", same.r, flip.r, flip.flip_applied, if json {
            "consistent"
        } else {
            "WRONG"
        }),
    )
}

type Criterion = fn(&mut Lab) -> Outcome;

fn main() {
    let criteria: [(usize, &str, bool, Criterion); 10] = [
        (1, "TER correctness", false, criterion_1),
        (2, "gradient fidelity", false, criterion_2),
        (3, "optimizer and loss", false, criterion_3),
        (4, "statistics", false, criterion_4),
        (5, "pipeline filter accounting", false, criterion_5),
        (6, "end-to-end desk-scale experiment", false, criterion_6),
        (7, "concat >= split (soft)", true, criterion_7),
        (8, "multi-direction benefit (soft)", true, criterion_8),
        (9, "determinism and persistence", false, criterion_9),
        (10, "polarity handling", false, criterion_10),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut lab = Lab::default();
    let mut hard_failures = 0;
    for (id, name, soft, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| run(&mut lab))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict} {name}: {} [{:.1} s]", result.detail, secs(start.elapsed()));
        if !result.pass && !soft {
            hard_failures += 1;
        }
    }
    if hard_failures > 0 {
        println!("{hard_failures} hard criteria failed");
        std::process::exit(1);
    }
}
