use crate::metric::{MetricScore, ReferenceSet};
use crate::text::TokenSequence;

/// Recall weight of the ROUGE-L F-measure.
pub const ROUGE_BETA: f64 = 1.2;

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn f_measure(lcs: usize, candidate_len: usize, reference_len: usize) -> f64 {
    if lcs == 0 {
        return 0.0;
    }
    let recall = lcs as f64 / reference_len as f64;
    let precision = lcs as f64 / candidate_len as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * recall * precision / (recall + b2 * precision)
}

/// Best LCS-based F-measure over the references.
pub fn rouge_l(candidate: &TokenSequence, refs: &ReferenceSet) -> MetricScore {
    let value = refs
        .iter()
        .map(|r| f_measure(lcs_len(candidate.tokens(), r.tokens()), candidate.len(), r.len()))
        .fold(0.0, f64::max);
    MetricScore::higher("ROUGE-L", value)
}
