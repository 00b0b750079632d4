//! Fixtures shared by the integration tests: a templated toy language pair,
//! synthetic QE data built from it, and a finite-difference gradient checker.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synqe::data::{Direction, ParallelCorpus, ParallelPair, QeDataset};
use synqe::model::{EncoderConfig, QeModel, Vocab};
use synqe::synthesis::{synthesize, CorruptingTranslator, NoiseLevel, SynthesisConfig, Translator};

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Class sizes per side: adjectives, nouns, verbs, adverbs. Both sides
/// together give a vocabulary of 300 words.
const CLASSES: [usize; 4] = [34, 60, 40, 16];
const ADJ: usize = 0;
const NOUN: usize = 1;
const VERB: usize = 2;
const ADV: usize = 3;

/// A made-up word, unique for `(prefix, class, index)`.
fn word(prefix: &str, class: usize, index: usize) -> String {
    let n = class * 100 + index;
    let syl = |k: usize| {
        let c = CONSONANTS[k % CONSONANTS.len()] as char;
        let v = VOWELS[(k / CONSONANTS.len()) % VOWELS.len()] as char;
        format!("{c}{v}")
    };
    format!("{prefix}{}{}", syl(n), syl(n / 70 + 3 * class))
}

/// A toy language pair with a word-for-word lexicon. Every sentence follows
/// `ADJ NOUN VERB NOUN ADV`; the target side puts the adjective after its
/// noun.
pub struct ToyLanguage {
    source: Vec<Vec<String>>,
    target: Vec<Vec<String>>,
    pub direction: Direction,
}

impl ToyLanguage {
    pub fn new(src_prefix: &str, tgt_prefix: &str, direction: Direction) -> Self {
        let side = |p: &str| {
            CLASSES
                .iter()
                .enumerate()
                .map(|(c, &n)| (0..n).map(|i| word(p, c, i)).collect())
                .collect()
        };
        Self {
            source: side(src_prefix),
            target: side(tgt_prefix),
            direction,
        }
    }

    pub fn vocabulary_size(&self) -> usize {
        let mut all: Vec<&String> = self.source.iter().chain(&self.target).flatten().collect();
        all.sort();
        all.dedup();
        all.len()
    }

    fn pick(&self, class: usize, rng: &mut ChaCha8Rng) -> (&str, &str) {
        let i = rng.random_range(0..CLASSES[class]);
        (&self.source[class][i], &self.target[class][i])
    }

    fn sentence(&self, rng: &mut ChaCha8Rng) -> ParallelPair {
        let [adj, n1, verb, n2, adv] = [ADJ, NOUN, VERB, NOUN, ADV].map(|c| self.pick(c, rng));
        ParallelPair {
            source: [adj.0, n1.0, verb.0, n2.0, adv.0].join(" "),
            reference: [n1.1, adj.1, verb.1, n2.1, adv.1].join(" "),
        }
    }

    pub fn corpus(&self, n: usize, seed: u64) -> ParallelCorpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = (0..n).map(|_| self.sentence(&mut rng)).collect();
        ParallelCorpus::new(pairs, self.direction.clone())
    }
}

pub fn language_a() -> ToyLanguage {
    ToyLanguage::new("", "y", Direction::new("aa", "bb").unwrap())
}

pub fn language_b() -> ToyLanguage {
    ToyLanguage::new("q", "w", Direction::new("cc", "dd").unwrap())
}

/// Synthetic TER-labelled data from `corpus`, corrupted with per-sentence
/// noise drawn from `U(0, 0.6)`.
pub fn synthetic(corpus: &ParallelCorpus, seed: u64) -> QeDataset {
    let translator = Translator::Corrupting(
        CorruptingTranslator::new(NoiseLevel::Uniform { low: 0.0, high: 0.6 }, seed).unwrap(),
    );
    let config = SynthesisConfig {
        sample_size: corpus.len(),
        seed,
        ..SynthesisConfig::default()
    };
    synthesize(corpus, &translator, &config).unwrap().0
}

pub fn small_encoder(mode: synqe::model::EncodingMode, seed: u64) -> EncoderConfig {
    EncoderConfig {
        embed_dim: 8,
        layers: 2,
        heads: 2,
        ff_dim: 12,
        max_seq_len: 24,
        mode,
        seed,
        head_hidden: None,
    }
}

pub fn vocab_for(datasets: &[&QeDataset]) -> Vocab {
    Vocab::build(datasets, 32000, 1).unwrap()
}

/// Outcome of comparing analytic and numerical gradients.
#[derive(Debug)]
pub struct GradCheck {
    pub checked: usize,
    pub groups: usize,
    pub worst: f64,
    pub worst_name: String,
}

/// Absolute floor under the relative-error denominator; differences of
/// gradients this small are at the level of finite-difference noise.
pub const GRAD_FLOOR: f64 = 1e-7;

/// Relative error between analytic and numerical values.
pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(GRAD_FLOOR)
}

/// Checks `per_tensor` coordinates of every parameter tensor with central
/// differences of step `h`. Rows of the embedding table are restricted to
/// tokens that occur in `batch`, everything else is sampled uniformly.
pub fn gradient_check(
    model: &mut QeModel,
    batch: &[synqe::data::QeTuple],
    per_tensor: usize,
    h: f64,
    seed: u64,
) -> GradCheck {
    let (_, _, grads) = model.loss_and_gradients(batch);
    let analytic = grads.values().to_vec();
    let mut used: Vec<usize> = batch
        .iter()
        .flat_map(|t| match model.prepare(&t.source, &t.hypothesis) {
            synqe::model::Inputs::Concat(ids) => ids,
            synqe::model::Inputs::Split { source, hypothesis } => [source, hypothesis].concat(),
        })
        .collect();
    used.sort();
    used.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs = model.params().specs().to_vec();
    let mut out = GradCheck {
        checked: 0,
        groups: 0,
        worst: 0.0,
        worst_name: String::new(),
    };
    for spec in &specs {
        out.groups += 1;
        for _ in 0..per_tensor.min(spec.len()) {
            let local = if spec.name == "embed.tokens" {
                let row = used[rng.random_range(0..used.len())];
                row * spec.shape[1] + rng.random_range(0..spec.shape[1])
            } else {
                rng.random_range(0..spec.len())
            };
            let i = spec.offset + local;
            let orig = model.params().values()[i];
            model.params_mut().values_mut()[i] = orig + h;
            let up = model.forward_loss(batch).0;
            model.params_mut().values_mut()[i] = orig - h;
            let down = model.forward_loss(batch).0;
            model.params_mut().values_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic[i], numeric);
            if err > out.worst {
                out.worst = err;
                out.worst_name = format!("{}[{local}] analytic {} numeric {numeric}", spec.name, analytic[i]);
            }
            out.checked += 1;
        }
    }
    out
}

/// Plain Levenshtein distance with unit costs, written independently of the
/// library's DP.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// Every sequence obtainable from `tokens` by one unrestricted block move.
pub fn all_shifts<T: Clone>(tokens: &[T]) -> Vec<Vec<T>> {
    let n = tokens.len();
    let mut out = Vec::new();
    for from in 0..n {
        for len in 1..=n - from {
            let mut rest = tokens[..from].to_vec();
            rest.extend_from_slice(&tokens[from + len..]);
            for to in 0..=rest.len() {
                if to == from {
                    continue;
                }
                let mut moved = rest.clone();
                moved.splice(to..to, tokens[from..from + len].iter().cloned());
                out.push(moved);
            }
        }
    }
    out
}

/// Minimum of `shifts + levenshtein` over all shift sequences of length at
/// most two, divided by the reference length.
pub fn exhaustive_ter_depth2<T: Clone + PartialEq>(hyp: &[T], reference: &[T]) -> f64 {
    let mut best = levenshtein(hyp, reference);
    for once in all_shifts(hyp) {
        best = best.min(1 + levenshtein(&once, reference));
        if best <= 2 {
            continue;
        }
        for twice in all_shifts(&once) {
            best = best.min(2 + levenshtein(&twice, reference));
        }
    }
    best as f64 / reference.len() as f64
}
