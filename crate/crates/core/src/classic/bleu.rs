use crate::error::{Error, Result};
use crate::metric::{MetricScore, ReferenceSet};
use crate::text::{ngrams, NGramProfile, TokenSequence};

use super::clipped_counts;

/// Corpus-level BLEU statistics for orders `1..=max_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuScores {
    /// `scores[n - 1]` is the clipped n-gram precision times the brevity penalty.
    pub scores: Vec<f64>,
    pub brevity_penalty: f64,
    /// Summed clipped matches per order.
    pub matches: Vec<usize>,
    /// Summed candidate n-gram counts per order.
    pub totals: Vec<usize>,
    pub candidate_len: usize,
    /// Sum over candidates of the closest reference length.
    pub reference_len: usize,
}

impl BleuScores {
    pub fn score(&self, n: usize) -> f64 {
        self.scores[n - 1]
    }

    /// `B@1` .. `B@max_n`.
    pub fn metric_scores(&self) -> Vec<MetricScore> {
        self.scores
            .iter()
            .enumerate()
            .map(|(i, &v)| MetricScore::higher(format!("B@{}", i + 1), v))
            .collect()
    }
}

/// Length of the reference closest to `candidate_len`; ties go to the shorter.
fn closest_ref_len(candidate_len: usize, refs: &ReferenceSet) -> usize {
    refs.iter()
        .map(TokenSequence::len)
        .min_by_key(|&r| (r.abs_diff(candidate_len), r))
        .unwrap_or(0)
}

fn brevity_penalty(candidate_len: usize, reference_len: usize) -> f64 {
    if candidate_len == 0 {
        0.0
    } else if candidate_len >= reference_len {
        1.0
    } else {
        (1.0 - reference_len as f64 / candidate_len as f64).exp()
    }
}

/// Corpus BLEU: clipped matches and candidate n-gram counts are summed over
/// the whole corpus before dividing, and one brevity penalty is applied at
/// corpus level.
pub fn bleu<'a, I>(corpus: I, max_n: usize) -> Result<BleuScores>
where
    I: IntoIterator<Item = (&'a TokenSequence, &'a ReferenceSet)>,
{
    if !(1..=4).contains(&max_n) {
        return Err(Error::InvalidArgument(format!(
            "BLEU order must be in 1..=4, got {max_n}"
        )));
    }
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    let mut candidate_len = 0;
    let mut reference_len = 0;
    let mut seen = 0usize;

    for (candidate, refs) in corpus {
        seen += 1;
        candidate_len += candidate.len();
        reference_len += closest_ref_len(candidate.len(), refs);
        for n in 1..=max_n {
            let cand = ngrams(candidate, n)?;
            let ref_profiles: Vec<NGramProfile> = refs
                .iter()
                .map(|r| ngrams(r, n))
                .collect::<Result<_>>()?;
            matches[n - 1] += clipped_counts(&cand, &ref_profiles).values().sum::<usize>();
            totals[n - 1] += cand.total();
        }
    }
    if seen == 0 {
        return Err(Error::InvalidArgument("BLEU needs a non-empty corpus".into()));
    }

    let bp = brevity_penalty(candidate_len, reference_len);
    let scores = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { bp * m as f64 / t as f64 })
        .collect();
    Ok(BleuScores {
        scores,
        brevity_penalty: bp,
        matches,
        totals,
        candidate_len,
        reference_len,
    })
}

/// BLEU of a single candidate, i.e. a corpus of one.
pub fn sentence_bleu(candidate: &TokenSequence, refs: &ReferenceSet, max_n: usize) -> Result<BleuScores> {
    bleu(std::iter::once((candidate, refs)), max_n)
}
