//! Stop-word, perturbation and correlation experiments.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use capeval_core::classic::bleu;
use capeval_core::registry::{MetricOptions, MetricRegistry, Resources};
use capeval_core::text::{remove_stopwords, tokenize, StopWords, TokenSequence};
use capeval_core::ReferenceSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{DatasetError, EvaluationDataset};
use crate::report::{evaluate, ModelReport};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metric(#[from] capeval_core::Error),
    #[error("synonym perturbation needs a synonym table")]
    NoSynonymTable,
    #[error("{path}:{line}: {message}")]
    SynonymParse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("reports cover different items")]
    MismatchedItems,
    #[error("reports cover different metrics: {0}")]
    MismatchedMetrics(String),
    #[error("metric {0:?} not in report")]
    MissingMetric(String),
    #[error("unknown {what} {value:?}")]
    UnknownName { what: &'static str, value: String },
}

type Result<T> = std::result::Result<T, ExperimentError>;

/// Which side loses its stop words for the starred BLEU row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopwordMode {
    Cand,
    Refs,
    #[default]
    Both,
}

impl FromStr for StopwordMode {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cand" => Ok(StopwordMode::Cand),
            "refs" => Ok(StopwordMode::Refs),
            "both" => Ok(StopwordMode::Both),
            other => Err(ExperimentError::UnknownName {
                what: "stop-word mode",
                value: other.to_string(),
            }),
        }
    }
}

impl StopwordMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StopwordMode::Cand => "cand",
            StopwordMode::Refs => "refs",
            StopwordMode::Both => "both",
        }
    }
}

/// `B@1`, `B@1*` (stop words removed) and `MEAN` for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct StopwordComparison {
    pub model: String,
    pub bleu1: f64,
    pub bleu1_stripped: f64,
    /// `Err` holds the reason MEAN could not be computed.
    pub mean: std::result::Result<f64, String>,
}

impl StopwordComparison {
    pub fn rows(comparisons: &[StopwordComparison]) -> Vec<(String, Vec<Option<f64>>)> {
        vec![
            ("B@1".into(), comparisons.iter().map(|c| Some(c.bleu1)).collect()),
            ("B@1*".into(), comparisons.iter().map(|c| Some(c.bleu1_stripped)).collect()),
            ("MEAN".into(), comparisons.iter().map(|c| c.mean.clone().ok()).collect()),
        ]
    }
}

pub fn stopword_experiment(
    dataset: &EvaluationDataset,
    mode: StopwordMode,
    resources: &Resources,
) -> Result<StopwordComparison> {
    let items = dataset.tokenized()?;
    let sw = &resources.stopwords;
    let bleu1 = bleu(items.iter().map(|(c, r)| (c, r)), 1)?.score(1);

    let strip_cand = matches!(mode, StopwordMode::Cand | StopwordMode::Both);
    let strip_refs = matches!(mode, StopwordMode::Refs | StopwordMode::Both);
    // An item whose references are all stop words has nothing left to match
    // and is left out of the starred row.
    let stripped: Vec<(TokenSequence, ReferenceSet)> = items
        .iter()
        .filter_map(|(c, r)| {
            let c = if strip_cand { remove_stopwords(c, sw) } else { c.clone() };
            let r = if strip_refs {
                ReferenceSet::new(r.map_lossy(|s| remove_stopwords(s, sw))).ok()?
            } else {
                r.clone()
            };
            Some((c, r))
        })
        .collect();
    let bleu1_stripped = bleu(stripped.iter().map(|(c, r)| (c, r)), 1)?.score(1);

    let mean = evaluate(
        dataset,
        &["mean".to_string()],
        &MetricRegistry::builtin(),
        resources,
        &MetricOptions::default(),
    )?;
    let mean = match mean.series("MEAN").and_then(|s| s.corpus) {
        Some(v) => Ok(v),
        None => Err(mean
            .failures
            .get("mean")
            .cloned()
            .unwrap_or_else(|| "no item could be scored".into())),
    };
    Ok(StopwordComparison {
        model: dataset.model.clone(),
        bleu1,
        bleu1_stripped,
        mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbKind {
    Synonym,
    Shuffle,
    StopwordDrop,
}

impl FromStr for PerturbKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synonym" => Ok(PerturbKind::Synonym),
            "shuffle" => Ok(PerturbKind::Shuffle),
            "stopword-drop" => Ok(PerturbKind::StopwordDrop),
            other => Err(ExperimentError::UnknownName {
                what: "perturbation",
                value: other.to_string(),
            }),
        }
    }
}

/// Word → replacement, read from `word<TAB>replacement` lines.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SynonymTable {
    map: BTreeMap<String, String>,
}

impl SynonymTable {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self {
            map: pairs.into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ExperimentError::SynonymParse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        let mut map = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            match fields.as_slice() {
                [word, replacement] if !word.is_empty() && !replacement.is_empty() => {
                    map.insert(word.to_lowercase(), replacement.to_lowercase());
                }
                _ => {
                    return Err(ExperimentError::SynonymParse {
                        path: path.to_path_buf(),
                        line: idx + 1,
                        message: "expected `word<TAB>replacement`".into(),
                    })
                }
            }
        }
        Ok(Self { map })
    }

    pub fn get(&self, word: &str) -> Option<&str> {
        self.map.get(word).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Rewrites every candidate; references are left as they are. Candidates
/// come out tokenized and space-joined.
pub fn perturb(
    dataset: &EvaluationDataset,
    kind: PerturbKind,
    synonyms: Option<&SynonymTable>,
    stopwords: &StopWords,
    seed: u64,
) -> Result<EvaluationDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = match kind {
        PerturbKind::Synonym => {
            let table = synonyms.ok_or(ExperimentError::NoSynonymTable)?;
            dataset.map_candidates(|item| {
                let tokens = tokenize(&item.candidate);
                let swapped: Vec<&str> = tokens.iter().map(|t| table.get(t).unwrap_or(t)).collect();
                swapped.join(" ")
            })
        }
        PerturbKind::Shuffle => dataset.map_candidates(|item| {
            let mut tokens: Vec<String> = tokenize(&item.candidate).iter().map(String::from).collect();
            tokens.shuffle(&mut rng);
            tokens.join(" ")
        }),
        PerturbKind::StopwordDrop => {
            dataset.map_candidates(|item| remove_stopwords(&tokenize(&item.candidate), stopwords).join())
        }
    };
    Ok(out)
}

/// Change of one score under a perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct Delta {
    pub name: String,
    pub original: Option<f64>,
    pub perturbed: Option<f64>,
    /// `(original - perturbed) / original`, sign-flipped for lower-better
    /// scores so a positive value always means "got worse". Missing when
    /// either side is missing or the original is zero.
    pub normalized_drop: Option<f64>,
}

pub fn robustness_compare(original: &ModelReport, perturbed: &ModelReport) -> Result<Vec<Delta>> {
    if original.item_ids != perturbed.item_ids {
        return Err(ExperimentError::MismatchedItems);
    }
    let names = |r: &ModelReport| r.series.iter().map(|s| s.name.clone()).collect::<Vec<_>>();
    if names(original) != names(perturbed) {
        return Err(ExperimentError::MismatchedMetrics(format!(
            "{:?} vs {:?}",
            names(original),
            names(perturbed)
        )));
    }
    Ok(original
        .series
        .iter()
        .zip(&perturbed.series)
        .map(|(o, p)| {
            let normalized_drop = match (o.corpus, p.corpus) {
                (Some(a), Some(b)) if a != 0.0 => {
                    let drop = (a - b) / a;
                    Some(if o.direction == "lower-better" { -drop } else { drop })
                }
                _ => None,
            };
            Delta {
                name: o.name.clone(),
                original: o.corpus,
                perturbed: p.corpus,
                normalized_drop,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    /// Items where both metrics have a score.
    pub n: usize,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

pub fn correlate(report: &ModelReport, a: &str, b: &str) -> Result<Correlation> {
    let sa = report.series(a).ok_or_else(|| ExperimentError::MissingMetric(a.to_string()))?;
    let sb = report.series(b).ok_or_else(|| ExperimentError::MissingMetric(b.to_string()))?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = sa
        .per_item
        .iter()
        .zip(&sb.per_item)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip();
    Ok(Correlation {
        n: xs.len(),
        pearson: pearson(&xs, &ys),
        spearman: pearson(&average_ranks(&xs), &average_ranks(&ys)),
    })
}

/// Missing for fewer than two points or a constant input.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if n < 2 || n != y.len() || constant(x) || constant(y) {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}
