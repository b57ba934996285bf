//! Running metrics over datasets and rendering the results.
//!
//! The machine-readable report is JSON with this layout (schema version 1):
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "config": { "seed", "metrics", "flags": {..}, "inputs": {path: sha256} },
//!   "models": [
//!     { "model", "source", "item_ids": [..],
//!       "series": [ { "name", "metric", "direction", "corpus", "per_item": [..] } ],
//!       "failures": { metric: reason } }
//!   ]
//! }
//! ```
//!
//! Missing scores are `null`. Keys of maps are sorted and no timestamps are
//! written, so identical runs produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use capeval_core::registry::{MetricOptions, MetricRegistry, Resources};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{DatasetError, EvaluationDataset};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub models: Vec<ModelReport>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub metrics: Vec<String>,
    pub flags: BTreeMap<String, String>,
    /// Input path → hex SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub source: String,
    pub item_ids: Vec<String>,
    pub series: Vec<SeriesReport>,
    /// Requested metric → why it produced nothing.
    pub failures: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    /// Row label, e.g. `B@2`.
    pub name: String,
    /// Registry name of the metric that produced it, e.g. `bleu`.
    pub metric: String,
    pub direction: String,
    pub corpus: Option<f64>,
    pub per_item: Vec<Option<f64>>,
}

impl ModelReport {
    pub fn series(&self, name: &str) -> Option<&SeriesReport> {
        self.series.iter().find(|s| s.name == name)
    }
}

impl EvaluationReport {
    pub fn new(config: RunConfig, models: Vec<ModelReport>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config,
            models,
        }
    }

    pub fn has_failures(&self) -> bool {
        self.models.iter().any(|m| !m.failures.is_empty())
    }

    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Table with one row per score and one column per model.
    pub fn render_table(&self) -> String {
        let columns: Vec<String> = self.models.iter().map(|m| m.model.clone()).collect();
        let mut labels: Vec<(String, String)> = Vec::new();
        for m in &self.models {
            for s in &m.series {
                if !labels.iter().any(|(l, _)| *l == s.name) {
                    labels.push((s.name.clone(), s.metric.clone()));
                }
            }
        }
        for metric in &self.config.metrics {
            let failed_somewhere = self.models.iter().any(|m| m.failures.contains_key(metric));
            let has_rows = labels.iter().any(|(_, owner)| owner == metric);
            if failed_somewhere && !has_rows {
                labels.push((metric.clone(), metric.clone()));
            }
        }
        let rows: Vec<(String, Vec<Cell>)> = labels
            .iter()
            .map(|(label, metric)| {
                let cells = self
                    .models
                    .iter()
                    .map(|m| match (m.series(label), m.failures.get(metric)) {
                        (Some(s), _) => s.corpus.map_or(Cell::Missing, Cell::Value),
                        (None, Some(_)) => Cell::Failed,
                        (None, None) => Cell::Missing,
                    })
                    .collect();
                let marked = match self.models.iter().find_map(|m| m.series(label)) {
                    Some(s) if s.direction == "lower-better" => format!("{label} (lower)"),
                    _ => label.clone(),
                };
                (marked, cells)
            })
            .collect();
        let mut out = render_cells("Metric", &columns, &rows);
        for m in &self.models {
            for (metric, reason) in &m.failures {
                writeln!(out, "failed: {} / {metric}: {reason}", m.model).expect("writing to a String");
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Value(f64),
    Missing,
    Failed,
}

impl Cell {
    fn text(self) -> String {
        match self {
            Cell::Value(v) => format!("{v:.3}"),
            Cell::Missing => "-".into(),
            Cell::Failed => "failed".into(),
        }
    }
}

/// Aligned plain-text table; values are printed with three decimals.
pub fn render_rows(corner: &str, columns: &[String], rows: &[(String, Vec<Option<f64>>)]) -> String {
    let rows: Vec<(String, Vec<Cell>)> = rows
        .iter()
        .map(|(l, v)| (l.clone(), v.iter().map(|x| x.map_or(Cell::Missing, Cell::Value)).collect()))
        .collect();
    render_cells(corner, columns, &rows)
}

fn render_cells(corner: &str, columns: &[String], rows: &[(String, Vec<Cell>)]) -> String {
    let label_width = rows
        .iter()
        .map(|(l, _)| l.chars().count())
        .chain([corner.chars().count()])
        .max()
        .unwrap_or(0);
    let widths: Vec<usize> = columns
        .iter()
        .enumerate()
        .map(|(j, c)| {
            rows.iter()
                .map(|(_, cells)| cells.get(j).map_or(1, |c| c.text().len()))
                .chain([c.chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let mut line = format!("{corner:<label_width$}");
    for (c, w) in columns.iter().zip(&widths) {
        write!(line, "  {c:>w$}").expect("writing to a String");
    }
    out.push_str(line.trim_end());
    out.push('\n');
    let total = label_width + widths.iter().map(|w| w + 2).sum::<usize>();
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for (label, cells) in rows {
        let mut line = format!("{label:<label_width$}");
        for (j, w) in widths.iter().enumerate() {
            let text = cells.get(j).map_or_else(|| "-".to_string(), |c| c.text());
            write!(line, "  {text:>w$}").expect("writing to a String");
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Runs `metrics` over one dataset. A metric that cannot be built or fails
/// is recorded in `failures`; the rest still run.
pub fn evaluate(
    dataset: &EvaluationDataset,
    metrics: &[String],
    registry: &MetricRegistry,
    resources: &Resources,
    options: &MetricOptions,
) -> Result<ModelReport, DatasetError> {
    let items = dataset.tokenized()?;
    let mut report = ModelReport {
        model: dataset.model.clone(),
        source: dataset.source.display().to_string(),
        item_ids: dataset.ids(),
        series: Vec::new(),
        failures: BTreeMap::new(),
    };
    for name in metrics {
        let outcome = registry
            .build(name, resources, options)
            .and_then(|metric| metric.score(&items));
        match outcome {
            Ok(series) => report.series.extend(series.into_iter().map(|s| SeriesReport {
                name: s.name,
                metric: name.clone(),
                direction: s.direction.as_str().to_string(),
                corpus: s.corpus,
                per_item: s.per_item,
            })),
            Err(e) => {
                report.failures.insert(name.clone(), e.to_string());
            }
        }
    }
    Ok(report)
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DatasetItem;
    use std::path::PathBuf;

    fn dataset() -> EvaluationDataset {
        let items = vec![
            DatasetItem {
                id: "1".into(),
                candidate: "a cat sits on the mat".into(),
                references: vec!["a cat sits on the mat".into(), "there is a cat".into()],
            },
            DatasetItem {
                id: "2".into(),
                candidate: "two dogs play".into(),
                references: vec!["two dogs play".into()],
            },
        ];
        EvaluationDataset::new(items, PathBuf::from("identity.jsonl"), "identity".into()).unwrap()
    }

    fn run(metrics: &[&str]) -> ModelReport {
        let metrics: Vec<String> = metrics.iter().map(|s| s.to_string()).collect();
        evaluate(
            &dataset(),
            &metrics,
            &MetricRegistry::builtin(),
            &Resources::default(),
            &MetricOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn identity_dataset_scores_one() {
        let r = run(&["bleu"]);
        for n in 1..=4 {
            assert_eq!(r.series(&format!("B@{n}")).unwrap().corpus, Some(1.0));
        }
        assert!(r.failures.is_empty());
    }

    #[test]
    fn missing_checkpoint_fails_only_that_metric() {
        let r = run(&["bleu", "i2ce"]);
        assert!(r.failures.contains_key("i2ce"));
        assert!(r.series("B@1").is_some());
        let report = EvaluationReport::new(
            RunConfig {
                metrics: vec!["bleu".into(), "i2ce".into()],
                ..RunConfig::default()
            },
            vec![r],
        );
        assert!(report.has_failures());
        let table = report.render_table();
        assert!(table.lines().any(|l| l.starts_with("i2ce") && l.ends_with("failed")), "{table}");
    }

    #[test]
    fn json_round_trip() {
        let report = EvaluationReport::new(RunConfig::default(), vec![run(&["bleu", "rouge_l"])]);
        let json = report.to_json();
        assert_eq!(EvaluationReport::from_json(&json).unwrap(), report);
        assert_eq!(json, report.to_json());
    }

    #[test]
    fn rows_render_three_decimals() {
        let t = render_rows(
            "Metric",
            &["a".into(), "long-name".into()],
            &[("B@1".into(), vec![Some(0.7), Some(0.7494)]), ("X".into(), vec![None, Some(1.0)])],
        );
        let want = "Metric      a  long-name\n------------------------\nB@1     0.700      0.749\nX           -      1.000\n";
        assert_eq!(t, want);
    }
}
