use std::fmt;

use crate::error::{Error, Result};
use crate::text::TokenSequence;

/// Whether larger values of a metric mean better captions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::HigherBetter => "higher-better",
            Direction::LowerBetter => "lower-better",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One named score value.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricScore {
    pub metric_name: String,
    pub value: f64,
    pub direction: Direction,
}

impl MetricScore {
    pub fn new(metric_name: impl Into<String>, value: f64, direction: Direction) -> Self {
        let metric_name = metric_name.into();
        debug_assert!(value.is_finite(), "{metric_name} produced {value}");
        Self {
            metric_name,
            value,
            direction,
        }
    }

    pub fn higher(metric_name: impl Into<String>, value: f64) -> Self {
        Self::new(metric_name, value, Direction::HigherBetter)
    }

    pub fn lower(metric_name: impl Into<String>, value: f64) -> Self {
        Self::new(metric_name, value, Direction::LowerBetter)
    }
}

/// The ground-truth captions for one candidate. Never empty, and no
/// reference is empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSet {
    references: Vec<TokenSequence>,
}

impl ReferenceSet {
    pub fn new(references: Vec<TokenSequence>) -> Result<Self> {
        if references.is_empty() {
            return Err(Error::InvalidArgument("reference set is empty".into()));
        }
        if references.iter().any(TokenSequence::is_empty) {
            return Err(Error::InvalidArgument(
                "reference set contains an empty reference".into(),
            ));
        }
        Ok(Self { references })
    }

    pub fn references(&self) -> &[TokenSequence] {
        &self.references
    }

    pub fn len(&self) -> usize {
        self.references.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TokenSequence> {
        self.references.iter()
    }

    /// Applies `f` to every reference. Fails if any reference becomes empty.
    pub fn map(&self, f: impl FnMut(&TokenSequence) -> TokenSequence) -> Result<Self> {
        Self::new(self.references.iter().map(f).collect())
    }

    /// Like [`ReferenceSet::map`] but allows references to become empty; the
    /// result is a plain list.
    pub fn map_lossy(&self, f: impl FnMut(&TokenSequence) -> TokenSequence) -> Vec<TokenSequence> {
        self.references.iter().map(f).collect()
    }
}

impl<'a> IntoIterator for &'a ReferenceSet {
    type Item = &'a TokenSequence;
    type IntoIter = std::slice::Iter<'a, TokenSequence>;

    fn into_iter(self) -> Self::IntoIter {
        self.references.iter()
    }
}

/// Cosine similarity, defined as 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            op: "cosine",
            expected: a.len().to_string(),
            found: b.len().to_string(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    // Rounding can push |cos| a hair past 1.
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Mean that does not depend on the order of `values`: they are summed in
/// sorted order. Returns `None` for an empty input.
pub fn order_free_mean(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}
