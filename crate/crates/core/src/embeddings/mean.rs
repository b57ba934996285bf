use crate::metric::{cosine, order_free_mean, MetricScore, ReferenceSet};
use crate::text::{remove_stopwords, StopWords, TokenSequence};

use super::EmbeddingTable;

/// Centroid of the vectors of the tokens that resolve in `table`, or `None`
/// when nothing resolves. Tokens are accumulated in sorted order so the result
/// is bit-identical under any permutation of `seq`.
pub fn mean_vector(seq: &TokenSequence, table: &EmbeddingTable) -> Option<Vec<f64>> {
    let mut tokens: Vec<&str> = seq.iter().collect();
    tokens.sort_unstable();
    let mut sum = vec![0.0; table.dim()];
    let mut k = 0usize;
    for v in tokens.into_iter().filter_map(|t| table.resolve(t)) {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        k += 1;
    }
    if k == 0 {
        return None;
    }
    sum.iter_mut().for_each(|s| *s /= k as f64);
    Some(sum)
}

/// MEAN: stop words are removed from both sides, then the cosine between
/// centroids is averaged over the references. A side with no resolvable
/// token contributes 0 for that pair.
pub fn mean_metric(
    candidate: &TokenSequence,
    refs: &ReferenceSet,
    table: &EmbeddingTable,
    stopwords: &StopWords,
) -> MetricScore {
    let cand = mean_vector(&remove_stopwords(candidate, stopwords), table);
    let pair_scores = refs
        .iter()
        .map(|r| {
            let reference = mean_vector(&remove_stopwords(r, stopwords), table);
            match (&cand, reference) {
                (Some(c), Some(r)) => cosine(c, &r).expect("rows share the table width"),
                _ => 0.0,
            }
        })
        .collect();
    let value = order_free_mean(pair_scores).unwrap_or(0.0);
    MetricScore::higher("MEAN", value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{tokenize, Vocabulary};

    fn table() -> EmbeddingTable {
        let vocab = Vocabulary::from_tokens(["cat", "dog", "mat", "sits"]);
        let mut data = vec![0.0; vocab.len() * 2];
        let rows = [("cat", [1.0, 0.0]), ("dog", [0.0, 1.0]), ("mat", [0.6, 0.8]), ("sits", [-0.3, 0.2])];
        for (t, v) in rows {
            let id = vocab.id(t).unwrap();
            data[id * 2..id * 2 + 2].copy_from_slice(&v);
        }
        EmbeddingTable::from_matrix(vocab, 2, data).unwrap()
    }

    fn refs(lines: &[&str]) -> ReferenceSet {
        ReferenceSet::new(lines.iter().map(|l| tokenize(l)).collect()).unwrap()
    }

    #[test]
    fn mean_vector_examples() {
        let t = table();
        assert_eq!(mean_vector(&tokenize("cat"), &t), Some(vec![1.0, 0.0]));
        assert_eq!(mean_vector(&tokenize("cat dog"), &t), Some(vec![0.5, 0.5]));
        assert_eq!(mean_vector(&tokenize("zebra yak"), &t), None);
    }

    #[test]
    fn identical_reference_scores_one() {
        let t = table();
        let sw = StopWords::english();
        let s = mean_metric(&tokenize("the cat sits on the mat"), &refs(&["the cat sits on the mat"]), &t, &sw);
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn candidate_of_only_stopwords_scores_zero() {
        let s = mean_metric(&tokenize("the a of"), &refs(&["a cat"]), &table(), &StopWords::english());
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn word_order_does_not_matter() {
        let t = table();
        let sw = StopWords::english();
        let r = refs(&["a dog sits", "the mat"]);
        let a = mean_metric(&tokenize("cat sits on mat dog"), &r, &t, &sw);
        let b = mean_metric(&tokenize("dog mat on cat sits"), &r, &t, &sw);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn pairs_with_an_empty_side_contribute_zero() {
        let s = mean_metric(&tokenize("cat"), &refs(&["cat", "zebra"]), &table(), &StopWords::english());
        assert!((s.value - 0.5).abs() < 1e-15);
    }
}
