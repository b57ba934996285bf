//! Every metric behind one trait, looked up by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::classic::{bleu, cider, meteor_lite, rouge_l, sentence_bleu};
use crate::embeddings::{mean_metric, EmbeddingTable};
use crate::error::{Error, Result};
use crate::i2ce::{i2ce_candidate, Aggregation};
use crate::metric::{order_free_mean, Direction, ReferenceSet};
use crate::neural::EncoderModel;
use crate::text::{StopWords, TokenSequence};
use crate::transport::wmd;

/// One candidate with its references.
pub type Item = (TokenSequence, ReferenceSet);

/// Scores of one named quantity over a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub name: String,
    pub direction: Direction,
    /// `None` when no item could be scored.
    pub corpus: Option<f64>,
    /// One entry per item, `None` where the item could not be scored.
    pub per_item: Vec<Option<f64>>,
}

impl MetricSeries {
    /// Corpus value taken as the mean of the per-item scores that exist.
    pub fn from_items(name: impl Into<String>, direction: Direction, per_item: Vec<Option<f64>>) -> Self {
        let corpus = order_free_mean(per_item.iter().flatten().copied().collect());
        Self {
            name: name.into(),
            direction,
            corpus,
            per_item,
        }
    }
}

pub trait CaptionMetric: Send + Sync {
    fn name(&self) -> &str;

    /// Scores a corpus. Metrics with several orders (BLEU) return one
    /// series per order.
    fn score(&self, items: &[Item]) -> Result<Vec<MetricSeries>>;
}

/// Shared inputs some metrics need.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub embeddings: Option<Arc<EmbeddingTable>>,
    pub model: Option<Arc<EncoderModel>>,
    pub stopwords: StopWords,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    pub bleu_max_n: usize,
    pub i2ce_aggregation: Aggregation,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            bleu_max_n: 4,
            i2ce_aggregation: Aggregation::Mean,
        }
    }
}

pub type MetricBuilder = fn(&Resources, &MetricOptions) -> Result<Box<dyn CaptionMetric>>;

/// Name → constructor map.
pub struct MetricRegistry {
    builders: BTreeMap<String, MetricBuilder>,
}

impl MetricRegistry {
    pub fn empty() -> Self {
        Self {
            builders: BTreeMap::new(),
        }
    }

    /// Registers `bleu`, `rouge_l`, `meteor`, `cider`, `mean`, `wmd` and `i2ce`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register("bleu", |_, o| Ok(Box::new(Bleu { max_n: o.bleu_max_n })));
        r.register("rouge_l", |_, _| Ok(Box::new(RougeL)));
        r.register("meteor", |_, _| Ok(Box::new(Meteor)));
        r.register("cider", |_, _| Ok(Box::new(Cider)));
        r.register("mean", |res, _| {
            Ok(Box::new(Mean {
                table: require(&res.embeddings, "mean", "an embedding table")?,
                stopwords: res.stopwords.clone(),
            }))
        });
        r.register("wmd", |res, _| {
            Ok(Box::new(Wmd {
                table: require(&res.embeddings, "wmd", "an embedding table")?,
            }))
        });
        r.register("i2ce", |res, o| {
            Ok(Box::new(I2ce {
                model: require(&res.model, "i2ce", "an encoder checkpoint")?,
                aggregation: o.i2ce_aggregation,
            }))
        });
        r
    }

    pub fn register(&mut self, name: &str, builder: MetricBuilder) {
        self.builders.insert(name.to_string(), builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.builders.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.builders.contains_key(name)
    }

    pub fn build(&self, name: &str, resources: &Resources, options: &MetricOptions) -> Result<Box<dyn CaptionMetric>> {
        let builder = self
            .builders
            .get(name)
            .ok_or_else(|| Error::UnknownMetric(name.to_string()))?;
        builder(resources, options)
    }
}

impl Default for MetricRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

fn require<T>(slot: &Option<Arc<T>>, metric: &str, resource: &'static str) -> Result<Arc<T>> {
    slot.clone().ok_or_else(|| Error::MissingResource {
        metric: metric.to_string(),
        resource,
    })
}

/// Scores every item independently, in parallel, keeping item order.
fn per_item(items: &[Item], f: impl Fn(&TokenSequence, &ReferenceSet) -> Option<f64> + Sync) -> Vec<Option<f64>> {
    items.par_iter().map(|(c, r)| f(c, r)).collect()
}

struct Bleu {
    max_n: usize,
}

impl CaptionMetric for Bleu {
    fn name(&self) -> &str {
        "bleu"
    }

    fn score(&self, items: &[Item]) -> Result<Vec<MetricSeries>> {
        let corpus = bleu(items.iter().map(|(c, r)| (c, r)), self.max_n)?;
        let sentences: Vec<Option<Vec<f64>>> = items
            .par_iter()
            .map(|(c, r)| sentence_bleu(c, r, self.max_n).ok().map(|s| s.scores))
            .collect();
        Ok((1..=self.max_n)
            .map(|n| MetricSeries {
                name: format!("B@{n}"),
                direction: Direction::HigherBetter,
                corpus: Some(corpus.score(n)),
                per_item: sentences.iter().map(|s| s.as_ref().map(|v| v[n - 1])).collect(),
            })
            .collect())
    }
}

struct RougeL;

impl CaptionMetric for RougeL {
    fn name(&self) -> &str {
        "rouge_l"
    }

    fn score(&self, items: &[Item]) -> Result<Vec<MetricSeries>> {
        let scores = per_item(items, |c, r| Some(rouge_l(c, r).value));
        Ok(vec![MetricSeries::from_items("ROUGE-L", Direction::HigherBetter, scores)])
    }
}

struct Meteor;

impl CaptionMetric for Meteor {
    fn name(&self) -> &str {
        "meteor"
    }

    fn score(&self, items: &[Item]) -> Result<Vec<MetricSeries>> {
        let scores = per_item(items, |c, r| Some(meteor_lite(c, r).value));
        Ok(vec![MetricSeries::from_items("METEOR", Direction::HigherBetter, scores)])
    }
}

struct Cider;

impl CaptionMetric for Cider {
    fn name(&self) -> &str {
        "cider"
    }

    fn score(&self, items: &[Item]) -> Result<Vec<MetricSeries>> {
        let s = cider(items.iter().map(|(c, r)| (c, r)))?;
        Ok(vec![MetricSeries {
            name: "CIDEr".into(),
            direction: Direction::HigherBetter,
            corpus: Some(s.corpus),
            per_item: s.per_candidate.into_iter().map(Some).collect(),
        }])
    }
}

struct Mean {
    table: Arc<EmbeddingTable>,
    stopwords: StopWords,
}

impl CaptionMetric for Mean {
    fn name(&self) -> &str {
        "mean"
    }

    fn score(&self, items: &[Item]) -> Result<Vec<MetricSeries>> {
        let scores = per_item(items, |c, r| Some(mean_metric(c, r, &self.table, &self.stopwords).value));
        Ok(vec![MetricSeries::from_items("MEAN", Direction::HigherBetter, scores)])
    }
}

struct Wmd {
    table: Arc<EmbeddingTable>,
}

impl CaptionMetric for Wmd {
    fn name(&self) -> &str {
        "wmd"
    }

    fn score(&self, items: &[Item]) -> Result<Vec<MetricSeries>> {
        let scores = per_item(items, |c, r| wmd(c, r, &self.table).map(|s| s.value));
        Ok(vec![MetricSeries::from_items("WMD", Direction::LowerBetter, scores)])
    }
}

struct I2ce {
    model: Arc<EncoderModel>,
    aggregation: Aggregation,
}

impl CaptionMetric for I2ce {
    fn name(&self) -> &str {
        "i2ce"
    }

    fn score(&self, items: &[Item]) -> Result<Vec<MetricSeries>> {
        let scores = per_item(items, |c, r| {
            i2ce_candidate(&self.model, c, r, self.aggregation).ok().map(|s| s.value)
        });
        Ok(vec![MetricSeries::from_items("I2CE", Direction::HigherBetter, scores)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn items(pairs: &[(&str, &[&str])]) -> Vec<Item> {
        pairs
            .iter()
            .map(|(c, refs)| {
                let refs = refs.iter().map(|r| tokenize(r)).collect();
                (tokenize(c), ReferenceSet::new(refs).unwrap())
            })
            .collect()
    }

    #[test]
    fn builtin_names() {
        let r = MetricRegistry::builtin();
        assert_eq!(
            r.names().collect::<Vec<_>>(),
            ["bleu", "cider", "i2ce", "mean", "meteor", "rouge_l", "wmd"]
        );
    }

    #[test]
    fn identity_corpus_scores_one_on_every_bleu_order() {
        let r = MetricRegistry::builtin();
        let bleu = r.build("bleu", &Resources::default(), &MetricOptions::default()).unwrap();
        let data = items(&[
            ("a cat sits on the mat", &["a cat sits on the mat", "the cat is here"]),
            ("two dogs run in a park", &["two dogs run in a park"]),
        ]);
        let series = bleu.score(&data).unwrap();
        assert_eq!(series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(), ["B@1", "B@2", "B@3", "B@4"]);
        for s in series {
            assert_eq!(s.corpus, Some(1.0));
            assert_eq!(s.per_item, vec![Some(1.0), Some(1.0)]);
        }
    }

    #[test]
    fn missing_resources_are_reported() {
        let r = MetricRegistry::builtin();
        let res = Resources::default();
        let opts = MetricOptions::default();
        for name in ["mean", "wmd", "i2ce"] {
            let err = r.build(name, &res, &opts).err().unwrap();
            assert!(matches!(err, Error::MissingResource { .. }), "{err}");
        }
        assert!(matches!(r.build("spice", &res, &opts), Err(Error::UnknownMetric(_))));
    }

    #[test]
    fn per_item_corpus_is_the_mean_of_present_items() {
        let s = MetricSeries::from_items("X", Direction::LowerBetter, vec![Some(1.0), None, Some(3.0)]);
        assert_eq!(s.corpus, Some(2.0));
        let none = MetricSeries::from_items("X", Direction::LowerBetter, vec![None]);
        assert_eq!(none.corpus, None);
    }

    #[test]
    fn custom_metrics_can_be_registered() {
        struct Length;
        impl CaptionMetric for Length {
            fn name(&self) -> &str {
                "length"
            }
            fn score(&self, items: &[Item]) -> Result<Vec<MetricSeries>> {
                let v = items.iter().map(|(c, _)| Some(c.len() as f64)).collect();
                Ok(vec![MetricSeries::from_items("LEN", Direction::HigherBetter, v)])
            }
        }
        let mut r = MetricRegistry::empty();
        r.register("length", |_, _| Ok(Box::new(Length)));
        let m = r.build("length", &Resources::default(), &MetricOptions::default()).unwrap();
        let out = m.score(&items(&[("a b c", &["x"])])).unwrap();
        assert_eq!(out[0].corpus, Some(3.0));
    }
}
