//! Hard-matching reference metrics: corpus BLEU, ROUGE-L, METEOR-lite and
//! CIDEr.
//!
//! All of them compare exact tokens; a synonym in the candidate counts as a
//! miss. Zero denominators (empty candidates, no matches) score 0.

mod bleu;
mod cider;
mod meteor;
mod rouge;

use std::collections::BTreeMap;

pub use bleu::{bleu, sentence_bleu, BleuScores};
pub use cider::{cider, CiderScores, CIDER_SCALE};
pub use meteor::{meteor_alignment, meteor_lite, Alignment};
pub use rouge::{lcs_len, rouge_l, ROUGE_BETA};

use crate::text::{NGram, NGramProfile};

/// For every n-gram of the candidate, its count clipped by the largest count
/// of the same n-gram in any one reference.
pub fn clipped_counts(candidate: &NGramProfile, refs: &[NGramProfile]) -> BTreeMap<NGram, usize> {
    candidate
        .iter()
        .map(|(gram, count)| {
            let max_ref = refs.iter().map(|r| r.count(gram)).max().unwrap_or(0);
            (gram.clone(), count.min(max_ref))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(pairs: &[(&str, usize)]) -> NGramProfile {
        NGramProfile::from_counts(
            1,
            pairs.iter().map(|(g, c)| (vec![g.to_string()], *c)).collect(),
        )
    }

    #[test]
    fn clipped_counts_examples() {
        let out = clipped_counts(
            &profile(&[("the", 3)]),
            &[profile(&[("the", 1)]), profile(&[("the", 2)])],
        );
        assert_eq!(out[&vec!["the".to_string()]], 2);

        let out = clipped_counts(&profile(&[("cat", 1)]), &[profile(&[("dog", 1)])]);
        assert_eq!(out[&vec!["cat".to_string()]], 0);

        assert!(clipped_counts(&profile(&[]), &[profile(&[("dog", 1)])]).is_empty());
    }
}
