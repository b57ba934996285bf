//! I²CE: cosine similarity between the intrinsic vectors a trained sentence
//! auto-encoder assigns to a candidate and its references.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::metric::{cosine, order_free_mean, MetricScore, ReferenceSet};
use crate::neural::{save_checkpoint, train_autoencoder, EncoderModel, ModelConfig, TrainConfig, TrainReport};
use crate::text::{build_vocab, read_sentences, TokenSequence};

/// Training sentences below this embedding coverage trigger a warning.
pub const MIN_EMBEDDING_COVERAGE: f64 = 0.8;

/// How pair scores are combined over a reference set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Max => "max",
        }
    }
}

/// Cosine between the intrinsic vectors of two sentences. No stop words are
/// removed.
pub fn i2ce_pair(model: &EncoderModel, candidate: &TokenSequence, reference: &TokenSequence) -> Result<f64> {
    let a = model.intrinsic(candidate)?;
    let b = model.intrinsic(reference)?;
    cosine(&a, &b)
}

/// Pair scores of `candidate` against every reference, combined by `agg`.
pub fn i2ce_candidate(
    model: &EncoderModel,
    candidate: &TokenSequence,
    refs: &ReferenceSet,
    agg: Aggregation,
) -> Result<MetricScore> {
    let c = model.intrinsic(candidate)?;
    let pairs = refs
        .iter()
        .map(|r| cosine(&c, &model.intrinsic(r)?))
        .collect::<Result<Vec<f64>>>()?;
    let value = match agg {
        Aggregation::Mean => order_free_mean(pairs),
        Aggregation::Max => pairs.into_iter().reduce(f64::max),
    }
    .expect("reference sets are non-empty");
    Ok(MetricScore::higher("I2CE", value))
}

/// Mean of [`i2ce_candidate`] over a corpus.
pub fn i2ce_corpus(
    model: &EncoderModel,
    corpus: &[(TokenSequence, ReferenceSet)],
    agg: Aggregation,
) -> Result<MetricScore> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let scores = corpus
        .par_iter()
        .map(|(c, refs)| i2ce_candidate(model, c, refs, agg).map(|s| s.value))
        .collect::<Result<Vec<f64>>>()?;
    let value = order_free_mean(scores).expect("corpus is non-empty");
    Ok(MetricScore::higher("I2CE", value))
}

/// Generic sentences first, then caption references.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPlan {
    pub stage1_corpus: Option<PathBuf>,
    pub stage2_corpus: PathBuf,
    pub stage1: TrainConfig,
    pub stage2: TrainConfig,
    /// Must be set to leave out stage 1; a missing or empty stage-1 corpus is
    /// otherwise an error.
    pub skip_stage1: bool,
    pub model: ModelConfig,
    /// Seed for weight initialization.
    pub init_seed: u64,
    /// Vocabulary cut-off over both corpora.
    pub min_count: usize,
    /// Where `stage1.ckpt` and `stage2.ckpt` go, if anywhere.
    pub checkpoint_dir: Option<PathBuf>,
}

impl TrainingPlan {
    pub fn new(stage1_corpus: impl Into<PathBuf>, stage2_corpus: impl Into<PathBuf>) -> Self {
        Self {
            stage1_corpus: Some(stage1_corpus.into()),
            stage2_corpus: stage2_corpus.into(),
            stage1: TrainConfig::default(),
            stage2: TrainConfig::default(),
            skip_stage1: false,
            model: ModelConfig::default(),
            init_seed: 0,
            min_count: 1,
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoStageRun {
    pub model: EncoderModel,
    pub stage1: Option<TrainReport>,
    pub stage2: TrainReport,
    /// Share of training-token occurrences that had a pretrained vector.
    pub coverage: f64,
    pub warnings: Vec<String>,
    pub checkpoints: Vec<PathBuf>,
}

/// Reads both corpora and runs [`train_two_stage_on`].
pub fn train_two_stage(plan: &TrainingPlan, embeddings: &EmbeddingTable) -> Result<TwoStageRun> {
    let stage1 = match (&plan.stage1_corpus, plan.skip_stage1) {
        (_, true) => Vec::new(),
        (Some(path), false) => read_sentences(path)?,
        (None, false) => {
            return Err(Error::InvalidArgument(
                "no stage-1 corpus given and stage 1 not explicitly skipped".into(),
            ))
        }
    };
    let stage2 = read_sentences(&plan.stage2_corpus)?;
    train_two_stage_on(plan, &stage1, &stage2, embeddings)
}

/// Builds a model whose vocabulary spans both corpora, with the embedding
/// copied from `embeddings` and frozen, then trains on `stage1` followed by
/// `stage2`.
pub fn train_two_stage_on(
    plan: &TrainingPlan,
    stage1: &[TokenSequence],
    stage2: &[TokenSequence],
    embeddings: &EmbeddingTable,
) -> Result<TwoStageRun> {
    if stage2.is_empty() {
        return Err(Error::Stage {
            stage: 2,
            source: Box::new(Error::EmptyCorpus),
        });
    }
    if stage1.is_empty() && !plan.skip_stage1 {
        return Err(Error::Stage {
            stage: 1,
            source: Box::new(Error::EmptyCorpus),
        });
    }
    let stage1 = if plan.skip_stage1 { &[][..] } else { stage1 };
    let all: Vec<TokenSequence> = stage1.iter().chain(stage2).cloned().collect();
    let vocab = build_vocab(&all, plan.min_count)?;
    let coverage = embeddings.coverage(all.iter().flat_map(TokenSequence::iter));
    let mut warnings = Vec::new();
    if coverage < MIN_EMBEDDING_COVERAGE {
        warnings.push(format!(
            "embeddings cover {:.1}% of training tokens (below {:.0}%)",
            coverage * 100.0,
            MIN_EMBEDDING_COVERAGE * 100.0
        ));
    }
    let mut model = EncoderModel::new(vocab, plan.model, Some(embeddings), plan.init_seed)?;
    model.set_embedding_frozen(true);

    let mut checkpoints = Vec::new();
    let mut checkpoint = |model: &EncoderModel, stage: u8| -> Result<()> {
        if let Some(dir) = &plan.checkpoint_dir {
            let path = dir.join(format!("stage{stage}.ckpt"));
            save_checkpoint(model, &path).map_err(|e| Error::Stage {
                stage,
                source: Box::new(e),
            })?;
            checkpoints.push(path);
        }
        Ok(())
    };

    let report1 = if plan.skip_stage1 {
        None
    } else {
        let r = train_autoencoder(&mut model, stage1, &plan.stage1).map_err(|e| Error::Stage {
            stage: 1,
            source: Box::new(e),
        })?;
        checkpoint(&model, 1)?;
        Some(r)
    };
    let report2 = train_autoencoder(&mut model, stage2, &plan.stage2).map_err(|e| Error::Stage {
        stage: 2,
        source: Box::new(e),
    })?;
    checkpoint(&model, 2)?;

    Ok(TwoStageRun {
        model,
        stage1: report1,
        stage2: report2,
        coverage,
        warnings,
        checkpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{tokenize, Vocabulary};

    fn model() -> EncoderModel {
        let vocab = Vocabulary::from_tokens(["a", "cat", "dog", "sits", "on", "the", "mat"]);
        let config = ModelConfig {
            embed_dim: 4,
            hidden: 6,
            attention: 3,
            max_len: 8,
        };
        EncoderModel::new(vocab, config, None, 3).unwrap()
    }

    fn refs(lines: &[&str]) -> ReferenceSet {
        ReferenceSet::new(lines.iter().map(|l| tokenize(l)).collect()).unwrap()
    }

    #[test]
    fn identical_sentences_score_one() {
        let m = model();
        let s = tokenize("a cat sits on the mat");
        assert!((i2ce_pair(&m, &s, &s).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn pair_is_symmetric() {
        let m = model();
        let (a, b) = (tokenize("a cat sits"), tokenize("the dog on a mat"));
        assert_eq!(i2ce_pair(&m, &a, &b).unwrap(), i2ce_pair(&m, &b, &a).unwrap());
    }

    #[test]
    fn empty_sentence_is_an_error() {
        let m = model();
        assert!(i2ce_pair(&m, &tokenize(""), &tokenize("a cat")).is_err());
    }

    #[test]
    fn candidate_is_the_mean_of_pairs() {
        let m = model();
        let c = tokenize("a cat sits");
        let (x, y) = (tokenize("a dog sits"), tokenize("the mat"));
        let want = (i2ce_pair(&m, &c, &x).unwrap() + i2ce_pair(&m, &c, &y).unwrap()) / 2.0;
        let got = i2ce_candidate(&m, &c, &refs(&["a dog sits", "the mat"]), Aggregation::Mean).unwrap();
        assert!((got.value - want).abs() < 1e-15);
        let max = i2ce_candidate(&m, &c, &refs(&["a dog sits", "the mat"]), Aggregation::Max).unwrap();
        assert!(max.value >= got.value);
    }

    #[test]
    fn reference_order_does_not_matter() {
        let m = model();
        let c = tokenize("the cat sits on a mat");
        let a = i2ce_candidate(&m, &c, &refs(&["a dog", "the mat", "cat sits on"]), Aggregation::Mean).unwrap();
        let b = i2ce_candidate(&m, &c, &refs(&["cat sits on", "a dog", "the mat"]), Aggregation::Mean).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn corpus_of_one_equals_candidate() {
        let m = model();
        let c = tokenize("a cat");
        let r = refs(&["a dog", "the cat"]);
        let single = i2ce_candidate(&m, &c, &r, Aggregation::Mean).unwrap();
        let corpus = i2ce_corpus(&m, &[(c, r)], Aggregation::Mean).unwrap();
        assert_eq!(single.value, corpus.value);
        assert!(i2ce_corpus(&m, &[], Aggregation::Mean).is_err());
    }

    #[test]
    fn exact_copies_score_one_over_a_corpus() {
        let m = model();
        let items = vec![
            (tokenize("a cat sits"), refs(&["a cat sits"])),
            (tokenize("the dog"), refs(&["the dog"])),
        ];
        let s = i2ce_corpus(&m, &items, Aggregation::Mean).unwrap();
        assert!((s.value - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn cosine_is_scale_invariant() {
        let m = model();
        let a = m.intrinsic(&tokenize("a cat sits")).unwrap();
        let b = m.intrinsic(&tokenize("the dog")).unwrap();
        let base = cosine(&a, &b).unwrap();
        for k in [1e-3, 0.5, 7.0, 1e4] {
            let sa: Vec<f64> = a.iter().map(|x| x * k).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * k * 3.0).collect();
            assert!((cosine(&sa, &sb).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_stage_one_needs_the_flag() {
        let table = EmbeddingTable::from_matrix(Vocabulary::from_tokens(["cat"]), 2, vec![0.0; 10]).unwrap();
        let mut plan = TrainingPlan::new("unused", "unused");
        plan.stage1_corpus = None;
        assert!(matches!(train_two_stage(&plan, &table), Err(Error::InvalidArgument(_))));
        let stage2 = vec![tokenize("a cat")];
        let err = train_two_stage_on(&plan, &[], &stage2, &table).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: 1, .. }));
    }
}
