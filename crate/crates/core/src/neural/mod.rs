//! A small reverse-mode autodiff tape and the GRU sentence auto-encoder
//! built on it.

mod attention;
mod checkpoint;
#[cfg(test)]
mod gradcheck;
mod gru;
mod model;
mod tape;
mod train;

pub use attention::{attention, AttentionParams, AttentionVars};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use gru::{gru_step, GruParams, GruVars};
pub use model::{DecodeOutcome, EncoderModel, Encoding, ModelConfig, ModelGradients};
pub use tape::{Gradients, Tape, Tensor, Var};
pub use train::{train_autoencoder, Optimizer, TrainConfig, TrainReport, MIN_TRAINING_SENTENCES};
