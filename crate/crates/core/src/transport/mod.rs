//! Word Mover's Distance: the cheapest way to move one caption's bag of word
//! vectors onto another's, with Euclidean distances as ground costs.

mod simplex;

use std::collections::BTreeMap;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::metric::{order_free_mean, MetricScore, ReferenceSet};
use crate::text::TokenSequence;

pub use simplex::{solve_transport, TransportSolution};

/// Pairwise ground costs, row-major `rows x cols`. Entries are finite and
/// non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                op: "CostMatrix",
                expected: format!("{rows} x {cols}"),
                found: format!("{} values", data.len()),
            });
        }
        if data.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidArgument("costs must be finite and non-negative".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Euclidean distances between every vector of `from` and every vector of `to`.
    pub fn euclidean(from: &[&[f64]], to: &[&[f64]]) -> Self {
        let data = from
            .iter()
            .flat_map(|a| {
                to.iter().map(move |b| {
                    a.iter()
                        .zip(b.iter())
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                })
            })
            .collect();
        Self {
            rows: from.len(),
            cols: to.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// Mass shipped from each supply row to each demand column.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    flows: Vec<f64>,
}

impl TransportPlan {
    pub fn new(rows: usize, cols: usize, flows: Vec<f64>) -> Self {
        assert_eq!(flows.len(), rows * cols);
        Self { rows, cols, flows }
    }

    pub fn flow(&self, i: usize, j: usize) -> f64 {
        self.flows[i * self.cols + j]
    }

    pub fn flows(&self) -> &[f64] {
        &self.flows
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.flows.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.flow(i, j)).sum())
            .collect()
    }

    /// Total cost of this plan under `cost`.
    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        self.flows.iter().zip(cost.data()).map(|(f, c)| f * c).sum()
    }
}

/// Normalized bag-of-words weights over the tokens that resolve in a table,
/// in token order.
#[derive(Debug, Clone, PartialEq)]
pub struct WordWeights {
    pub tokens: Vec<String>,
    pub weights: Vec<f64>,
}

impl WordWeights {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn word_weights(seq: &TokenSequence, table: &EmbeddingTable) -> WordWeights {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for token in seq.iter().filter(|t| table.resolve(t).is_some()) {
        *counts.entry(token).or_insert(0) += 1;
    }
    let total: usize = counts.values().sum();
    WordWeights {
        tokens: counts.keys().map(|t| t.to_string()).collect(),
        weights: counts.values().map(|&c| c as f64 / total as f64).collect(),
    }
}

/// Word Mover's Distance between two captions.
pub fn wmd_distance(a: &TokenSequence, b: &TokenSequence, table: &EmbeddingTable) -> Result<f64> {
    let wa = word_weights(a, table);
    let wb = word_weights(b, table);
    if wa.is_empty() || wb.is_empty() {
        return Err(Error::UndefinedTransport(
            "a caption has no token with a word vector".into(),
        ));
    }
    let vectors = |w: &WordWeights| -> Vec<&[f64]> {
        w.tokens
            .iter()
            .map(|t| table.resolve(t).expect("weights only hold resolvable tokens"))
            .collect()
    };
    let cost = CostMatrix::euclidean(&vectors(&wa), &vectors(&wb));
    Ok(solve_transport(&cost, &wa.weights, &wb.weights)?.objective)
}

/// Mean WMD from the candidate to each reference (lower is better).
/// References where either side has no resolvable token are skipped; if none
/// remain the score is missing.
pub fn wmd(candidate: &TokenSequence, refs: &ReferenceSet, table: &EmbeddingTable) -> Option<MetricScore> {
    let distances = refs
        .iter()
        .filter_map(|r| wmd_distance(candidate, r, table).ok())
        .collect();
    order_free_mean(distances).map(|v| MetricScore::lower("WMD", v))
}
