use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::metric::{MetricScore, ReferenceSet};
use crate::text::{ngrams, NGram, TokenSequence};

/// Overall scale applied to the averaged cosine similarities.
pub const CIDER_SCALE: f64 = 10.0;
const MAX_N: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CiderScores {
    pub corpus: f64,
    pub per_candidate: Vec<f64>,
}

impl CiderScores {
    pub fn metric_score(&self) -> MetricScore {
        MetricScore::higher("CIDEr", self.corpus)
    }
}

type Counts = BTreeMap<NGram, usize>;

/// Per-order n-gram counts of one sentence.
fn all_counts(seq: &TokenSequence) -> Result<Vec<Counts>> {
    (1..=MAX_N)
        .map(|n| Ok(ngrams(seq, n)?.counts().clone()))
        .collect()
}

struct Idf {
    log_docs: f64,
    doc_freq: BTreeMap<NGram, usize>,
}

impl Idf {
    fn weight(&self, gram: &NGram) -> f64 {
        let df = self.doc_freq.get(gram).copied().unwrap_or(0).max(1);
        self.log_docs - (df as f64).ln()
    }

    fn vector<'c>(&self, counts: &'c Counts) -> BTreeMap<&'c NGram, f64> {
        counts
            .iter()
            .map(|(g, &c)| (g, c as f64 * self.weight(g)))
            .collect()
    }
}

fn sparse_cosine(a: &BTreeMap<&NGram, f64>, b: &BTreeMap<&NGram, f64>) -> f64 {
    let norm = |v: &BTreeMap<&NGram, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a
        .iter()
        .filter_map(|(g, x)| b.get(g).map(|y| x * y))
        .sum();
    dot / (na * nb)
}

/// CIDEr with tf-idf n-gram vectors for n = 1..4. Document frequencies are
/// counted over reference sets: an n-gram's df is the number of items whose
/// references contain it at least once.
pub fn cider<'a, I>(corpus: I) -> Result<CiderScores>
where
    I: IntoIterator<Item = (&'a TokenSequence, &'a ReferenceSet)>,
{
    let corpus: Vec<(&TokenSequence, &ReferenceSet)> = corpus.into_iter().collect();
    if corpus.len() < 2 {
        return Err(Error::IdfUndefined(corpus.len()));
    }

    let mut ref_counts: Vec<Vec<Vec<Counts>>> = Vec::with_capacity(corpus.len());
    let mut doc_freq: BTreeMap<NGram, usize> = BTreeMap::new();
    for (_, refs) in &corpus {
        let per_ref: Vec<Vec<Counts>> = refs.iter().map(all_counts).collect::<Result<_>>()?;
        let distinct: BTreeSet<&NGram> = per_ref
            .iter()
            .flat_map(|orders| orders.iter().flat_map(BTreeMap::keys))
            .collect();
        for gram in distinct {
            *doc_freq.entry(gram.clone()).or_insert(0) += 1;
        }
        ref_counts.push(per_ref);
    }
    let idf = Idf {
        log_docs: (corpus.len() as f64).ln(),
        doc_freq,
    };

    let mut per_candidate = Vec::with_capacity(corpus.len());
    for ((candidate, _), refs) in corpus.iter().zip(&ref_counts) {
        let cand = all_counts(candidate)?;
        let mut total = 0.0;
        for n in 0..MAX_N {
            let cv = idf.vector(&cand[n]);
            let mean: f64 = refs
                .iter()
                .map(|r| sparse_cosine(&cv, &idf.vector(&r[n])))
                .sum::<f64>()
                / refs.len() as f64;
            total += mean;
        }
        per_candidate.push(CIDER_SCALE * total / MAX_N as f64);
    }
    let corpus_score = per_candidate.iter().sum::<f64>() / per_candidate.len() as f64;
    Ok(CiderScores {
        corpus: corpus_score,
        per_candidate,
    })
}
