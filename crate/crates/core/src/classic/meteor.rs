use std::collections::{BTreeMap, HashMap};

use crate::metric::{MetricScore, ReferenceSet};
use crate::text::TokenSequence;

const ALPHA_WEIGHT: f64 = 9.0;
const PENALTY_GAMMA: f64 = 0.5;
const PENALTY_BETA: f64 = 3.0;

/// Beyond this reference length the exact search falls back to a greedy
/// left-to-right alignment.
const EXACT_LIMIT: usize = 128;

/// An exact-match unigram alignment summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    pub matches: usize,
    pub chunks: usize,
}

/// Aligns candidate and reference tokens by exact match, taking the largest
/// possible number of matches and, among those, the fewest chunks. A chunk is
/// a maximal run of matches that are adjacent in both sentences.
pub fn meteor_alignment(candidate: &[String], reference: &[String]) -> Alignment {
    let mut cand_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in candidate {
        *cand_counts.entry(t).or_insert(0) += 1;
    }
    let mut ref_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in reference {
        *ref_counts.entry(t).or_insert(0) += 1;
    }
    let matches: usize = cand_counts
        .iter()
        .map(|(t, c)| (*c).min(ref_counts.get(t).copied().unwrap_or(0)))
        .sum();
    if matches == 0 {
        return Alignment {
            matches: 0,
            chunks: 0,
        };
    }
    let chunks = if reference.len() > EXACT_LIMIT {
        greedy_chunks(candidate, reference)
    } else {
        let mut search = ChunkSearch {
            candidate,
            reference,
            target: matches,
            memo: HashMap::new(),
        };
        search.min_chunks(0, 0, None)
    };
    Alignment { matches, chunks }
}

struct ChunkSearch<'a> {
    candidate: &'a [String],
    reference: &'a [String],
    target: usize,
    memo: HashMap<(usize, u128, Option<usize>), usize>,
}

impl ChunkSearch<'_> {
    const INFEASIBLE: usize = usize::MAX / 2;

    /// Fewest chunks for candidate positions `i..` given the set of used
    /// reference positions and the reference position aligned to `i - 1`.
    fn min_chunks(&mut self, i: usize, used: u128, prev: Option<usize>) -> usize {
        let matched = used.count_ones() as usize;
        if matched == self.target {
            return 0;
        }
        if i == self.candidate.len() || matched + (self.candidate.len() - i) < self.target {
            return Self::INFEASIBLE;
        }
        if let Some(&hit) = self.memo.get(&(i, used, prev)) {
            return hit;
        }
        let mut best = self.min_chunks(i + 1, used, None);
        for j in 0..self.reference.len() {
            if used & (1u128 << j) != 0 || self.reference[j] != self.candidate[i] {
                continue;
            }
            let opens = usize::from(!(j > 0 && prev == Some(j - 1)));
            let rest = self.min_chunks(i + 1, used | (1u128 << j), Some(j));
            best = best.min(rest.saturating_add(opens));
        }
        self.memo.insert((i, used, prev), best);
        best
    }
}

fn greedy_chunks(candidate: &[String], reference: &[String]) -> usize {
    let mut used = vec![false; reference.len()];
    let mut prev: Option<usize> = None;
    let mut chunks = 0;
    for token in candidate {
        let hit = (0..reference.len()).find(|&j| !used[j] && &reference[j] == token);
        match hit {
            Some(j) => {
                used[j] = true;
                if !(j > 0 && prev == Some(j - 1)) {
                    chunks += 1;
                }
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    chunks
}

fn score_against(candidate: &TokenSequence, reference: &TokenSequence) -> f64 {
    let Alignment { matches, chunks } = meteor_alignment(candidate.tokens(), reference.tokens());
    if matches == 0 {
        return 0.0;
    }
    let m = matches as f64;
    let precision = m / candidate.len() as f64;
    let recall = m / reference.len() as f64;
    let f_mean = (1.0 + ALPHA_WEIGHT) * precision * recall / (recall + ALPHA_WEIGHT * precision);
    let penalty = PENALTY_GAMMA * (chunks as f64 / m).powf(PENALTY_BETA);
    f_mean * (1.0 - penalty)
}

/// METEOR with exact matching only: harmonic mean weighted towards recall,
/// times a fragmentation penalty. The best reference is taken.
pub fn meteor_lite(candidate: &TokenSequence, refs: &ReferenceSet) -> MetricScore {
    let value = refs
        .iter()
        .map(|r| score_against(candidate, r))
        .fold(0.0, f64::max);
    MetricScore::higher("METEOR", value)
}
