use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::text::TokenSequence;

use super::model::{EncoderModel, ModelGradients};

/// Auto-encoder training refuses corpora smaller than this.
pub const MIN_TRAINING_SENTENCES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 0.5,
            batch_size: 16,
            clip_norm: Some(5.0),
            optimizer: Optimizer::Sgd,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean reconstruction loss of each epoch, measured before each batch's
    /// update.
    pub epoch_losses: Vec<f64>,
    /// Sentences whose target was cut to `max_len`, counted once per epoch.
    pub truncated: usize,
}

struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

/// Trains `model` to reconstruct each sentence of `corpus`. A frozen
/// embedding is left bit-for-bit untouched.
pub fn train_autoencoder(
    model: &mut EncoderModel,
    corpus: &[TokenSequence],
    config: &TrainConfig,
) -> Result<TrainReport> {
    let sentences: Vec<&TokenSequence> = corpus.iter().filter(|s| !s.is_empty()).collect();
    if sentences.len() < MIN_TRAINING_SENTENCES {
        return Err(Error::InvalidArgument(format!(
            "training needs at least {MIN_TRAINING_SENTENCES} non-empty sentences, got {}",
            sentences.len()
        )));
    }
    if config.batch_size == 0 || config.learning_rate.is_nan() || config.learning_rate <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "batch size and learning rate must be positive: {config:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let mut adam = AdamState {
        m: model.parameters().iter().map(|t| vec![0.0; t.len()]).collect(),
        v: model.parameters().iter().map(|t| vec![0.0; t.len()]).collect(),
        t: 0,
    };
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(config.epochs),
        truncated: 0,
    };

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results: Vec<_> = batch
                .par_iter()
                .map(|&i| model.loss_and_gradients(sentences[i]))
                .collect();
            let mut grads = ModelGradients::zeros_like(model);
            for r in results {
                let (outcome, g) = r.map_err(|e| Error::Diverged {
                    epoch,
                    reason: e.to_string(),
                })?;
                total += outcome.loss;
                report.truncated += usize::from(outcome.truncated);
                grads.add_assign(&g);
            }
            grads.scale(1.0 / batch.len() as f64);
            let norm = grads.norm();
            if !norm.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    reason: "gradient norm is not finite".into(),
                });
            }
            if let Some(limit) = config.clip_norm {
                if norm > limit {
                    grads.scale(limit / norm);
                }
            }
            apply(model, &grads, config, &mut adam);
        }
        let mean = total / sentences.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: format!("epoch loss is {mean}"),
            });
        }
        report.epoch_losses.push(mean);
    }
    Ok(report)
}

fn apply(model: &mut EncoderModel, grads: &ModelGradients, config: &TrainConfig, adam: &mut AdamState) {
    let lr = config.learning_rate;
    adam.t += 1;
    for (i, (param, grad)) in model.parameters_mut().into_iter().zip(&grads.grads).enumerate() {
        let Some(grad) = grad else { continue };
        let data = param.data_mut();
        match config.optimizer {
            Optimizer::Sgd => data.iter_mut().zip(grad).for_each(|(w, g)| *w -= lr * g),
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(adam.t);
                let c2 = 1.0 - beta2.powi(adam.t);
                let (m, v) = (&mut adam.m[i], &mut adam.v[i]);
                for k in 0..data.len() {
                    m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
                    v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
                    data[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
                }
            }
        }
    }
}
