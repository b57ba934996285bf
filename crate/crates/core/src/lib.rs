//! Caption evaluation metrics.
//!
//! Hard-matching scores ([`classic`]) count exact n-gram overlap. Soft-matching
//! scores compare captions in a vector space: [`embeddings`] averages word
//! vectors, [`transport`] solves Word Mover's Distance, and [`i2ce`] compares
//! the final hidden states of a GRU auto-encoder ([`neural`]) trained to
//! reconstruct sentences. [`registry`] exposes every metric behind one trait so
//! callers can select them by name.

pub mod classic;
pub mod embeddings;
pub mod error;
pub mod i2ce;
pub mod metric;
pub mod neural;
pub mod registry;
pub mod text;
pub mod transport;

pub use error::{Error, Result};
pub use metric::{cosine, Direction, MetricScore, ReferenceSet};
pub use text::{tokenize, TokenSequence, Vocabulary};
