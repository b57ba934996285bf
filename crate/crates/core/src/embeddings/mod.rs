//! Word vectors: storage, text-format IO, skip-gram training and the MEAN
//! centroid metric.

mod mean;
mod skipgram;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::Vocabulary;

pub use mean::{mean_metric, mean_vector};
pub use skipgram::{
    skipgram_gradients, skipgram_loss, train_skipgram, NoiseDistribution, SkipGramBatch,
    SkipGramConfig, SkipGramGradients, SkipGramParams, SkipGramRun, SkipGramSample,
};

/// What a lookup of an unknown or missing token yields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnkPolicy {
    /// The token is dropped.
    #[default]
    Skip,
    /// The token resolves to the zero vector.
    ZeroVector,
}

/// A vocabulary with one dense row per id.
///
/// Rows for reserved ids and for tokens that had no vector in the source file
/// are zero and flagged as missing.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    dim: usize,
    data: Vec<f64>,
    present: Vec<bool>,
    zeros: Vec<f64>,
    unk_policy: UnkPolicy,
}

impl EmbeddingTable {
    /// Builds a table from a row-major `vocab.len() x dim` matrix. Every
    /// non-reserved row is marked present.
    pub fn from_matrix(vocab: Vocabulary, dim: usize, data: Vec<f64>) -> Result<Self> {
        let present = (0..vocab.len()).map(|id| !Vocabulary::is_reserved(id)).collect();
        Self::with_presence(vocab, dim, data, present)
    }

    fn with_presence(vocab: Vocabulary, dim: usize, mut data: Vec<f64>, present: Vec<bool>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!(
                "embedding width must be at least 2, got {dim}"
            )));
        }
        if data.len() != vocab.len() * dim {
            return Err(Error::ShapeMismatch {
                op: "EmbeddingTable",
                expected: format!("{} x {dim}", vocab.len()),
                found: format!("{} values", data.len()),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("embedding row {}", i / dim)));
        }
        for (id, &p) in present.iter().enumerate() {
            if !p {
                data[id * dim..(id + 1) * dim].fill(0.0);
            }
        }
        Ok(Self {
            vocab,
            dim,
            data,
            present,
            zeros: vec![0.0; dim],
            unk_policy: UnkPolicy::default(),
        })
    }

    pub fn with_unk_policy(mut self, policy: UnkPolicy) -> Self {
        self.unk_policy = policy;
        self
    }

    pub fn unk_policy(&self) -> UnkPolicy {
        self.unk_policy
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The full row-major matrix, reserved and missing rows included.
    pub fn matrix(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn is_present(&self, id: usize) -> bool {
        self.present.get(id).copied().unwrap_or(false)
    }

    /// Vocabulary tokens that had no vector.
    pub fn missing(&self) -> impl Iterator<Item = &str> {
        self.vocab
            .words()
            .filter(|(id, _)| !self.present[*id])
            .map(|(_, t)| t)
    }

    /// The vector for `token` if it is known, regardless of policy.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vocab
            .id(token)
            .filter(|&id| self.present[id])
            .map(|id| self.row(id))
    }

    /// The vector for `token` under the table's unknown-token policy.
    pub fn resolve(&self, token: &str) -> Option<&[f64]> {
        match (self.get(token), self.unk_policy) {
            (Some(v), _) => Some(v),
            (None, UnkPolicy::Skip) => None,
            (None, UnkPolicy::ZeroVector) => Some(&self.zeros),
        }
    }

    /// Fraction of `tokens` that have a vector.
    pub fn coverage<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> f64 {
        let (mut hit, mut total) = (0usize, 0usize);
        for t in tokens {
            total += 1;
            hit += usize::from(self.get(t).is_some());
        }
        if total == 0 {
            1.0
        } else {
            hit as f64 / total as f64
        }
    }

    /// Reads a text vector file, keeping every token in file order.
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let rows = parse_rows(path, &text)?;
        let vocab = Vocabulary::from_tokens(rows.iter().map(|(t, _)| *t));
        fill(path, vocab, rows)
    }

    /// Writes present rows in id order as `token v1 .. vd`. Values use the
    /// shortest representation that parses back to the same bits.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (id, token) in self.vocab.words() {
            if !self.present[id] {
                continue;
            }
            out.push_str(token);
            for v in self.row(id) {
                write!(out, " {v}").expect("writing to a String");
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Loads vectors for the tokens of `vocab` from a whitespace-separated text
/// file (`token v1 .. vd` per line). The width is taken from the first line.
/// File tokens outside the vocabulary are ignored; vocabulary tokens without a
/// line are flagged missing.
pub fn load_embeddings(path: &Path, vocab: &Vocabulary) -> Result<EmbeddingTable> {
    let text = fs::read_to_string(path)?;
    let rows = parse_rows(path, &text)?;
    fill(path, vocab.clone(), rows)
}

fn parse_rows<'t>(path: &Path, text: &'t str) -> Result<Vec<(&'t str, Vec<f64>)>> {
    let mut rows = Vec::new();
    let mut dim = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let values = fields
            .map(|f| {
                f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    message: format!("not a finite number: {f:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let expected = *dim.get_or_insert(values.len());
        if values.len() != expected || expected == 0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("expected {expected} values, found {}", values.len()),
            });
        }
        rows.push((token, values));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no vectors in file".into(),
        });
    }
    Ok(rows)
}

fn fill(path: &Path, vocab: Vocabulary, rows: Vec<(&str, Vec<f64>)>) -> Result<EmbeddingTable> {
    let dim = rows[0].1.len();
    if dim < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("embedding width must be at least 2, got {dim}"),
        });
    }
    let mut data = vec![0.0; vocab.len() * dim];
    let mut present = vec![false; vocab.len()];
    for (token, values) in rows {
        if let Some(id) = vocab.id(token).filter(|&id| !Vocabulary::is_reserved(id)) {
            data[id * dim..(id + 1) * dim].copy_from_slice(&values);
            present[id] = true;
        }
    }
    EmbeddingTable::with_presence(vocab, dim, data, present)
}
