//! Command-line evaluation harness: dataset ingestion, metric runs, reports
//! and robustness experiments on top of `capeval-core`.

pub mod dataset;
pub mod experiments;
pub mod report;

pub use dataset::{load_coco_split, load_dataset, DatasetError, DatasetItem, EvaluationDataset, Format};
pub use report::{evaluate, EvaluationReport, ModelReport, RunConfig, SeriesReport};
