//! Skip-gram with negative sampling.
//!
//! Two matrices map one-hot ids to dense vectors: a target matrix and a
//! context matrix. For each observed (target, context) pair and `k` noise ids
//! drawn from the unigram distribution raised to 3/4, the objective is
//!
//! ```text
//! L = log σ(c·t) + Σ_i log σ(-n_i·t)
//! ```
//!
//! which training maximizes by stochastic gradient steps on `-L`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::text::{build_vocab, TokenSequence};
#[cfg(test)]
use crate::text::Vocabulary;

use super::EmbeddingTable;

const MIN_CORPUS_TOKENS: usize = 100;
const MIN_VOCAB_WORDS: usize = 5;
const NOISE_EXPONENT: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub min_count: usize,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 50,
            window: 2,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 0,
            min_count: 2,
        }
    }
}

/// Target and context matrices, both `vocab_size x dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramParams {
    pub vocab_size: usize,
    pub dim: usize,
    pub target: Vec<f64>,
    pub context: Vec<f64>,
}

impl SkipGramParams {
    /// Both matrices uniform in `(-0.5/dim, 0.5/dim)`.
    pub fn init(vocab_size: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 0.5 / dim as f64;
        let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-bound..bound)).collect::<Vec<f64>>();
        let target = draw(vocab_size * dim);
        let context = draw(vocab_size * dim);
        Self {
            vocab_size,
            dim,
            target,
            context,
        }
    }

    fn target_row(&self, id: usize) -> &[f64] {
        &self.target[id * self.dim..(id + 1) * self.dim]
    }

    fn context_row(&self, id: usize) -> &[f64] {
        &self.context[id * self.dim..(id + 1) * self.dim]
    }
}

/// One positive pair plus its noise ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipGramSample {
    pub target: usize,
    pub context: usize,
    pub negatives: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SkipGramBatch {
    pub samples: Vec<SkipGramSample>,
}

/// Sampler over vocabulary ids proportional to `count^0.75`.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    index: WeightedIndex<f64>,
}

impl NoiseDistribution {
    /// `counts[id]` is the corpus frequency of `id`; zero-count ids are never drawn.
    pub fn new(counts: &[usize]) -> Result<Self> {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(NOISE_EXPONENT)).collect();
        let index = WeightedIndex::new(weights)
            .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
        Ok(Self { index })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        self.index.sample(rng)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `log σ(x)` without overflow for large |x|.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sample_objective(params: &SkipGramParams, s: &SkipGramSample) -> f64 {
    let t = params.target_row(s.target);
    let positive = log_sigmoid(dot(params.context_row(s.context), t));
    let negative: f64 = s
        .negatives
        .iter()
        .map(|&n| log_sigmoid(-dot(params.context_row(n), t)))
        .sum();
    positive + negative
}

/// The objective `L` summed over the batch (to be maximized).
pub fn skipgram_loss(params: &SkipGramParams, batch: &SkipGramBatch) -> f64 {
    batch.samples.iter().map(|s| sample_objective(params, s)).sum()
}

/// Gradient of `-L` for one sample, as sparse row updates.
struct SampleGradient {
    target: (usize, Vec<f64>),
    context: Vec<(usize, Vec<f64>)>,
}

fn sample_gradient(params: &SkipGramParams, s: &SkipGramSample) -> SampleGradient {
    let t = params.target_row(s.target);
    let c = params.context_row(s.context);
    let mut grad_t = vec![0.0; params.dim];
    let mut context = Vec::with_capacity(1 + s.negatives.len());

    // d(-log σ(c·t)) = -(1 - σ(c·t)) · (t for c, c for t)
    let g = sigmoid(dot(c, t)) - 1.0;
    for (gt, ci) in grad_t.iter_mut().zip(c) {
        *gt += g * ci;
    }
    context.push((s.context, t.iter().map(|ti| g * ti).collect()));

    // d(-log σ(-n·t)) = σ(n·t) · (t for n, n for t)
    for &n in &s.negatives {
        let nv = params.context_row(n);
        let g = sigmoid(dot(nv, t));
        for (gt, ni) in grad_t.iter_mut().zip(nv) {
            *gt += g * ni;
        }
        context.push((n, t.iter().map(|ti| g * ti).collect()));
    }
    SampleGradient {
        target: (s.target, grad_t),
        context,
    }
}

/// Dense gradients of `-L` with respect to both matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramGradients {
    pub target: Vec<f64>,
    pub context: Vec<f64>,
}

pub fn skipgram_gradients(params: &SkipGramParams, batch: &SkipGramBatch) -> SkipGramGradients {
    let d = params.dim;
    let mut out = SkipGramGradients {
        target: vec![0.0; params.target.len()],
        context: vec![0.0; params.context.len()],
    };
    for s in &batch.samples {
        let g = sample_gradient(params, s);
        let (id, row) = g.target;
        for (o, v) in out.target[id * d..(id + 1) * d].iter_mut().zip(row) {
            *o += v;
        }
        for (id, row) in g.context {
            for (o, v) in out.context[id * d..(id + 1) * d].iter_mut().zip(row) {
                *o += v;
            }
        }
    }
    out
}

/// A trained table plus the mean `-L` per sample for every epoch.
#[derive(Debug, Clone)]
pub struct SkipGramRun {
    pub table: EmbeddingTable,
    pub epoch_losses: Vec<f64>,
}

/// Trains skip-gram vectors on `corpus` and returns the target matrix as an
/// embedding table. Deterministic for a fixed seed.
pub fn train_skipgram(corpus: &[TokenSequence], config: &SkipGramConfig) -> Result<SkipGramRun> {
    let token_count: usize = corpus.iter().map(TokenSequence::len).sum();
    if token_count < MIN_CORPUS_TOKENS {
        return Err(Error::InvalidArgument(format!(
            "skip-gram needs at least {MIN_CORPUS_TOKENS} corpus tokens, got {token_count}"
        )));
    }
    if config.dim < 2 || config.window == 0 || config.negatives == 0 || config.lr.is_nan() || config.lr <= 0.0 {
        return Err(Error::InvalidArgument(format!("invalid skip-gram config {config:?}")));
    }
    let vocab = build_vocab(corpus, config.min_count)?;
    if vocab.word_count() < MIN_VOCAB_WORDS {
        return Err(Error::VocabularyTooSmall {
            found: vocab.word_count(),
            required: MIN_VOCAB_WORDS,
        });
    }

    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.id(t)).collect())
        .collect();
    let mut counts = vec![0usize; vocab.len()];
    for &id in sentences.iter().flatten() {
        counts[id] += 1;
    }
    let noise = NoiseDistribution::new(&counts)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = SkipGramParams::init(vocab.len(), config.dim, &mut rng);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let d = config.dim;

    for _ in 0..config.epochs {
        let mut total = 0.0;
        let mut n_samples = 0usize;
        for sentence in &sentences {
            for (pos, &target) in sentence.iter().enumerate() {
                let lo = pos.saturating_sub(config.window);
                let hi = (pos + config.window + 1).min(sentence.len());
                for (cpos, &context) in sentence.iter().enumerate().take(hi).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    let negatives = (0..config.negatives).map(|_| noise.sample(&mut rng)).collect();
                    let sample = SkipGramSample {
                        target,
                        context,
                        negatives,
                    };
                    total -= sample_objective(&params, &sample);
                    n_samples += 1;

                    let grad = sample_gradient(&params, &sample);
                    let (id, row) = grad.target;
                    for (p, g) in params.target[id * d..(id + 1) * d].iter_mut().zip(row) {
                        *p -= config.lr * g;
                    }
                    for (id, row) in grad.context {
                        for (p, g) in params.context[id * d..(id + 1) * d].iter_mut().zip(row) {
                            *p -= config.lr * g;
                        }
                    }
                }
            }
        }
        let mean = total / n_samples.max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged {
                epoch: epoch_losses.len(),
                reason: "skip-gram loss is not finite".into(),
            });
        }
        epoch_losses.push(mean);
    }

    let table = EmbeddingTable::from_matrix(vocab, d, params.target)?;
    Ok(SkipGramRun {
        table,
        epoch_losses,
    })
}

/// Rebuilds the initial parameters `train_skipgram` would start from.
#[cfg(test)]
fn initial_params(vocab: &Vocabulary, config: &SkipGramConfig) -> SkipGramParams {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    SkipGramParams::init(vocab.len(), config.dim, &mut rng)
}
