//! Caption datasets: one candidate and its references per item.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use capeval_core::registry::Item;
use capeval_core::{tokenize, ReferenceSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: duplicate item id {id:?}")]
    DuplicateId { path: PathBuf, id: String },
    #[error("{path}: item {id:?} has no references")]
    NoReferences { path: PathBuf, id: String },
    #[error("{path}: item {id:?} has no candidate")]
    MissingCandidate { path: PathBuf, id: String },
    #[error("item {id:?}: reference {index} has no tokens")]
    EmptyReference { id: String, index: usize },
    #[error("unknown dataset format {0:?} (expected coco-json, jsonl or tsv)")]
    UnknownFormat(String),
}

type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// `{"annotations": [{image_id, caption}], "results": [{image_id, caption}]}`
    CocoJson,
    /// One `{"id", "candidate", "references"}` object per line.
    Jsonl,
    /// `id <TAB> candidate <TAB> reference <TAB> ...`
    Tsv,
}

impl Format {
    /// Guesses from the file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "json" => Some(Format::CocoJson),
            "jsonl" => Some(Format::Jsonl),
            "tsv" => Some(Format::Tsv),
            _ => None,
        }
    }
}

impl FromStr for Format {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coco-json" | "coco" => Ok(Format::CocoJson),
            "jsonl" => Ok(Format::Jsonl),
            "tsv" => Ok(Format::Tsv),
            other => Err(DatasetError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::CocoJson => "coco-json",
            Format::Jsonl => "jsonl",
            Format::Tsv => "tsv",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetItem {
    pub id: String,
    pub candidate: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationDataset {
    pub items: Vec<DatasetItem>,
    /// File the candidates came from.
    pub source: PathBuf,
    /// Name of the captioning model, by default the candidate file's stem.
    pub model: String,
}

impl EvaluationDataset {
    /// Checks that ids are unique and every item has a reference.
    pub fn new(items: Vec<DatasetItem>, source: PathBuf, model: String) -> Result<Self> {
        let mut seen = HashSet::new();
        for item in &items {
            if !seen.insert(item.id.as_str()) {
                return Err(DatasetError::DuplicateId {
                    path: source.clone(),
                    id: item.id.clone(),
                });
            }
            if item.references.is_empty() {
                return Err(DatasetError::NoReferences {
                    path: source.clone(),
                    id: item.id.clone(),
                });
            }
        }
        Ok(Self { items, source, model })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.id.clone()).collect()
    }

    /// Tokenized candidates and reference sets in item order.
    pub fn tokenized(&self) -> Result<Vec<Item>> {
        self.items
            .iter()
            .map(|item| {
                let refs: Vec<_> = item.references.iter().map(|r| tokenize(r)).collect();
                if let Some(index) = refs.iter().position(|r| r.is_empty()) {
                    return Err(DatasetError::EmptyReference {
                        id: item.id.clone(),
                        index,
                    });
                }
                let refs = ReferenceSet::new(refs).expect("checked non-empty");
                Ok((tokenize(&item.candidate), refs))
            })
            .collect()
    }

    /// Same items with candidates replaced by `f(item)`; references untouched.
    pub fn map_candidates(&self, mut f: impl FnMut(&DatasetItem) -> String) -> Self {
        let items = self
            .items
            .iter()
            .map(|item| DatasetItem {
                candidate: f(item),
                ..item.clone()
            })
            .collect();
        Self {
            items,
            source: self.source.clone(),
            model: self.model.clone(),
        }
    }

    /// Writes the dataset as jsonl.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("plain strings serialize"));
            out.push('\n');
        }
        fs::write(path, out).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn model_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json_error(path: &Path, e: serde_json::Error) -> DatasetError {
    DatasetError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    }
}

pub fn load_dataset(path: &Path, format: Format) -> Result<EvaluationDataset> {
    let text = read(path)?;
    let items = match format {
        Format::Jsonl => parse_jsonl(path, &text)?,
        Format::Tsv => parse_tsv(path, &text)?,
        Format::CocoJson => {
            let file: CocoDataset = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
            join_coco(path, &file.annotations, &file.results)?
        }
    };
    EvaluationDataset::new(items, path.to_path_buf(), model_name(path))
}

/// A COCO-style reference file plus a results file holding one model's
/// candidates. The model is named after the results file.
pub fn load_coco_split(references: &Path, results: &Path) -> Result<EvaluationDataset> {
    let refs: CocoReferences = serde_json::from_str(&read(references)?).map_err(|e| json_error(references, e))?;
    let cands: Vec<CocoCaption> = serde_json::from_str(&read(results)?).map_err(|e| json_error(results, e))?;
    let items = join_coco(results, &refs.annotations, &cands)?;
    EvaluationDataset::new(items, results.to_path_buf(), model_name(results))
}

#[derive(Deserialize)]
struct JsonlRow {
    id: IdValue,
    candidate: String,
    references: Vec<String>,
}

/// Item ids may be written as numbers or strings.
#[derive(Deserialize, Clone)]
#[serde(untagged)]
enum IdValue {
    Int(i64),
    Text(String),
}

impl IdValue {
    fn key(&self) -> String {
        match self {
            IdValue::Int(i) => i.to_string(),
            IdValue::Text(s) => s.clone(),
        }
    }
}

#[derive(Deserialize)]
struct CocoCaption {
    image_id: IdValue,
    caption: String,
}

#[derive(Deserialize)]
struct CocoReferences {
    annotations: Vec<CocoCaption>,
}

#[derive(Deserialize)]
struct CocoDataset {
    annotations: Vec<CocoCaption>,
    results: Vec<CocoCaption>,
}

fn parse_jsonl(path: &Path, text: &str) -> Result<Vec<DatasetItem>> {
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonlRow = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        items.push(DatasetItem {
            id: row.id.key(),
            candidate: row.candidate,
            references: row.references,
        });
    }
    Ok(items)
}

fn parse_tsv(path: &Path, text: &str) -> Result<Vec<DatasetItem>> {
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().trim().to_string();
        let Some(candidate) = fields.next() else {
            return Err(DatasetError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: "expected id, candidate and references separated by tabs".into(),
            });
        };
        items.push(DatasetItem {
            id,
            candidate: candidate.to_string(),
            references: fields.map(str::to_string).collect(),
        });
    }
    Ok(items)
}

/// Groups references by image id in order of first appearance and attaches
/// each image's single candidate.
fn join_coco(path: &Path, annotations: &[CocoCaption], results: &[CocoCaption]) -> Result<Vec<DatasetItem>> {
    let mut order: Vec<String> = Vec::new();
    let mut refs: HashMap<String, Vec<String>> = HashMap::new();
    for a in annotations {
        let key = a.image_id.key();
        refs.entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(a.caption.clone());
    }
    let mut cands: BTreeMap<String, String> = BTreeMap::new();
    for r in results {
        let key = r.image_id.key();
        if !refs.contains_key(&key) {
            return Err(DatasetError::NoReferences {
                path: path.to_path_buf(),
                id: key,
            });
        }
        if cands.insert(key.clone(), r.caption.clone()).is_some() {
            return Err(DatasetError::DuplicateId {
                path: path.to_path_buf(),
                id: key,
            });
        }
    }
    order
        .into_iter()
        .map(|id| {
            let candidate = cands.remove(&id).ok_or_else(|| DatasetError::MissingCandidate {
                path: path.to_path_buf(),
                id: id.clone(),
            })?;
            let references = refs.remove(&id).expect("grouped above");
            Ok(DatasetItem {
                id,
                candidate,
                references,
            })
        })
        .collect()
}
