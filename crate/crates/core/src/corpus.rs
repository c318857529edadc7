//! Data model, ingestion, and persistence for abstracts, citation
//! instances, and prediction records.
//!
//! The canonical on-disk format is JSON lines (one record per line),
//! which keeps prediction logs append-friendly and fixtures diffable.
//! CSV export is provided for reports.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from corpus loading, validation, and persistence.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("validation error at line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("duplicate record at line {line}: {key}")]
    Duplicate { line: usize, key: String },
    #[error("invalid train fraction {0} (must be in (0, 1))")]
    InvalidFraction(f64),
    #[error("incomplete triplet for abstract {id}: {missing}")]
    IncompleteTriplet { id: String, missing: String },
}

/// Authorship variant of an abstract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "hum")]
    Hum,
    #[serde(rename = "AI")]
    Ai,
    #[serde(rename = "humAI")]
    HumAi,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::Hum => "hum",
            Variant::Ai => "AI",
            Variant::HumAi => "humAI",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hum" => Ok(Variant::Hum),
            "AI" => Ok(Variant::Ai),
            "humAI" => Ok(Variant::HumAi),
            other => Err(format!("unknown variant '{other}'")),
        }
    }
}

/// Four-way citation type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label4 {
    #[serde(rename = "FI")]
    Fi,
    #[serde(rename = "TB")]
    Tb,
    #[serde(rename = "BG")]
    Bg,
    #[serde(rename = "CP")]
    Cp,
}

impl Label4 {
    /// Collapse the four citation types to significant/incidental.
    pub fn merge(self) -> Label2 {
        match self {
            Label4::Fi | Label4::Tb => Label2::S,
            Label4::Bg | Label4::Cp => Label2::I,
        }
    }
}

/// Two-way citation type after merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label2 {
    S,
    I,
}

/// Merge the 4-class citation label into the 2-class one.
pub fn merge_labels(label4: Label4) -> Label2 {
    label4.merge()
}

/// The four experiment tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "AC1")]
    Ac1,
    #[serde(rename = "AC2")]
    Ac2,
    #[serde(rename = "CC1")]
    Cc1,
    #[serde(rename = "CC2")]
    Cc2,
}

impl Task {
    /// Concrete (non-Unparsed) labels that are legal predictions for this task.
    pub fn legal_labels(self) -> &'static [Label] {
        match self {
            Task::Ac1 | Task::Ac2 => &[Label::Hum, Label::Ai],
            Task::Cc1 => &[Label::Fi, Label::Tb, Label::Bg, Label::Cp],
            Task::Cc2 => &[Label::S, Label::I],
        }
    }

    pub fn is_authorship(self) -> bool {
        matches!(self, Task::Ac1 | Task::Ac2)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Task::Ac1 => "AC1",
            Task::Ac2 => "AC2",
            Task::Cc1 => "CC1",
            Task::Cc2 => "CC2",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "AC1" | "ac1" => Ok(Task::Ac1),
            "AC2" | "ac2" => Ok(Task::Ac2),
            "CC1" | "cc1" => Ok(Task::Cc1),
            "CC2" | "cc2" => Ok(Task::Cc2),
            other => Err(format!("unknown task '{other}' (expected AC1, AC2, CC1, or CC2)")),
        }
    }
}

/// A predicted (or gold) label across all tasks.
///
/// `Unparsed` marks a reply that could not be mapped to a legal label.
/// It is a recorded outcome, never a gold label, and it never agrees
/// with anything, itself included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "hum")]
    Hum,
    #[serde(rename = "AI")]
    Ai,
    #[serde(rename = "FI")]
    Fi,
    #[serde(rename = "TB")]
    Tb,
    #[serde(rename = "BG")]
    Bg,
    #[serde(rename = "CP")]
    Cp,
    S,
    I,
    #[serde(rename = "unparsed")]
    Unparsed,
}

impl Label {
    pub fn is_legal_for(self, task: Task) -> bool {
        self == Label::Unparsed || task.legal_labels().contains(&self)
    }

    /// Whether two labels count as the same prediction. Unparsed
    /// disagrees with everything, including another Unparsed.
    pub fn agrees_with(self, other: Label) -> bool {
        self != Label::Unparsed && self == other
    }
}

impl From<Label4> for Label {
    fn from(l: Label4) -> Self {
        match l {
            Label4::Fi => Label::Fi,
            Label4::Tb => Label::Tb,
            Label4::Bg => Label::Bg,
            Label4::Cp => Label::Cp,
        }
    }
}

impl From<Label2> for Label {
    fn from(l: Label2) -> Self {
        match l {
            Label2::S => Label::S,
            Label2::I => Label::I,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Label::Hum => "hum",
            Label::Ai => "AI",
            Label::Fi => "FI",
            Label::Tb => "TB",
            Label::Bg => "BG",
            Label::Cp => "CP",
            Label::S => "S",
            Label::I => "I",
            Label::Unparsed => "unparsed",
        };
        f.write_str(s)
    }
}

/// An abstract with author, variant tag, and the generator that made it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractRecord {
    pub id: String,
    pub author: String,
    pub title: String,
    pub text: String,
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
}

impl AbstractRecord {
    fn validate(&self) -> Result<(), String> {
        if self.text.is_empty() {
            return Err(format!("abstract {} has empty text", self.id));
        }
        if self.variant == Variant::Hum && self.generator.is_some() {
            return Err(format!("hum abstract {} must not carry a generator", self.id));
        }
        Ok(())
    }

    /// Uniqueness key within a corpus.
    pub fn key(&self) -> (String, Variant, Option<String>) {
        (self.id.clone(), self.variant, self.generator.clone())
    }
}

/// A citation instance: the sentence containing the citation, the phrase
/// denoting the cited work, and optional 4-class/2-class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationInstance {
    pub id: String,
    pub text: String,
    pub ref_key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label4: Option<Label4>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label2: Option<Label2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_note: Option<String>,
}

impl CitationInstance {
    fn validate(&self) -> Result<(), String> {
        if !self.text.contains(&self.ref_key) {
            return Err(format!(
                "citation {}: ref_key '{}' does not occur in text",
                self.id, self.ref_key
            ));
        }
        if let (Some(l4), Some(l2)) = (self.label4, self.label2) {
            if l4.merge() != l2 {
                return Err(format!(
                    "citation {}: label2 {:?} is not the merge of label4 {:?}",
                    self.id, l2, l4
                ));
            }
        }
        Ok(())
    }
}

/// One classification outcome from one model run on one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub model_id: String,
    pub run_id: String,
    /// ISO-8601 timestamp of when the prediction was produced.
    pub timestamp: String,
    pub task: Task,
    pub predicted: Label,
    pub raw_response: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Milliseconds.
    pub latency: u64,
}

impl PredictionRecord {
    fn validate(&self) -> Result<(), String> {
        if !self.predicted.is_legal_for(self.task) {
            return Err(format!(
                "prediction for {}: label {} is not legal for task {}",
                self.sample_id, self.predicted, self.task
            ));
        }
        Ok(())
    }
}

/// Which record type a file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusKind {
    Abstracts,
    Citations,
    Predictions,
}

impl std::str::FromStr for CorpusKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abstracts" => Ok(CorpusKind::Abstracts),
            "citations" => Ok(CorpusKind::Citations),
            "predictions" => Ok(CorpusKind::Predictions),
            other => Err(format!("unknown corpus kind '{other}'")),
        }
    }
}

/// A loaded collection of one record kind, ingestion order preserved.
#[derive(Debug, Clone)]
pub enum RecordCollection {
    Abstracts(Vec<AbstractRecord>),
    Citations(Vec<CitationInstance>),
    Predictions(Vec<PredictionRecord>),
}

impl RecordCollection {
    pub fn len(&self) -> usize {
        match self {
            RecordCollection::Abstracts(v) => v.len(),
            RecordCollection::Citations(v) => v.len(),
            RecordCollection::Predictions(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn load_jsonl<T, F>(path: &Path, validate: F) -> Result<Vec<T>, CorpusError>
where
    T: DeserializeOwned,
    F: Fn(&T) -> Result<(), String>,
{
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        validate(&record).map_err(|message| CorpusError::Validation {
            line: i + 1,
            message,
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Load abstracts from a JSONL file, validating each line and the
/// (id, variant, generator) uniqueness invariant.
pub fn load_abstracts(path: &Path) -> Result<Vec<AbstractRecord>, CorpusError> {
    let records = load_jsonl(path, AbstractRecord::validate)?;
    let mut seen = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        if !seen.insert(r.key()) {
            return Err(CorpusError::Duplicate {
                line: i + 1,
                key: format!("({}, {}, {:?})", r.id, r.variant, r.generator),
            });
        }
    }
    Ok(records)
}

/// Load citation instances from a JSONL file.
pub fn load_citations(path: &Path) -> Result<Vec<CitationInstance>, CorpusError> {
    load_jsonl(path, CitationInstance::validate)
}

/// Load prediction records from a JSONL file.
pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, CorpusError> {
    load_jsonl(path, PredictionRecord::validate)
}

/// Load a corpus file of the given kind.
pub fn load_corpus(path: &Path, kind: CorpusKind) -> Result<RecordCollection, CorpusError> {
    match kind {
        CorpusKind::Abstracts => load_abstracts(path).map(RecordCollection::Abstracts),
        CorpusKind::Citations => load_citations(path).map(RecordCollection::Citations),
        CorpusKind::Predictions => load_predictions(path).map(RecordCollection::Predictions),
    }
}

/// Write records to a JSONL file, one JSON object per line.
pub fn save_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| CorpusError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(writer, "{line}").map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Append a single record to a JSONL file, creating it if needed.
pub fn append_jsonl<T: Serialize>(path: &Path, record: &T) -> Result<(), CorpusError> {
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    let line = serde_json::to_string(record).map_err(|e| CorpusError::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    writeln!(file, "{line}").map_err(|e| io_err(path, e))?;
    Ok(())
}

/// A group that was too small to split and went entirely to training.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitWarning {
    pub group: String,
    pub units: usize,
}

/// Result of a grouped train/test split.
#[derive(Debug, Clone)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub warnings: Vec<SplitWarning>,
}

/// Split records into train/test independently within each group,
/// keeping all records that share a unit key on the same side.
///
/// Units (e.g. abstract ids, under which all variants of one abstract
/// live) are shuffled deterministically per group; the first
/// `floor(train_fraction * units)` go to training, the remainder to
/// test. Groups with fewer than two units go entirely to training and
/// are reported as warnings.
pub fn split_train_test<T, G, U>(
    records: &[T],
    train_fraction: f64,
    seed: u64,
    group_of: G,
    unit_of: U,
) -> Result<Split<T>, CorpusError>
where
    T: Clone,
    G: Fn(&T) -> String,
    U: Fn(&T) -> String,
{
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(train_fraction));
    }

    // group -> ordered set of unit keys
    let mut groups: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in records {
        groups.entry(group_of(r)).or_default().insert(unit_of(r));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_units: HashSet<(String, String)> = HashSet::new();
    let mut warnings = Vec::new();

    for (group, units) in &groups {
        let mut units: Vec<String> = units.iter().cloned().collect();
        if units.len() < 2 {
            warnings.push(SplitWarning {
                group: group.clone(),
                units: units.len(),
            });
            for u in units {
                train_units.insert((group.clone(), u));
            }
            continue;
        }
        units.shuffle(&mut rng);
        let n_train = (train_fraction * units.len() as f64).floor() as usize;
        for u in units.into_iter().take(n_train) {
            train_units.insert((group.clone(), u));
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for r in records {
        let key = (group_of(r), unit_of(r));
        if train_units.contains(&key) {
            train.push(r.clone());
        } else {
            test.push(r.clone());
        }
    }

    Ok(Split {
        train,
        test,
        warnings,
    })
}

/// Check that every abstract id has a hum record and, for each generator
/// that produced variants of it, both the AI and humAI versions.
pub fn check_triplets(records: &[AbstractRecord]) -> Result<(), CorpusError> {
    let mut by_id: BTreeMap<&str, Vec<&AbstractRecord>> = BTreeMap::new();
    for r in records {
        by_id.entry(r.id.as_str()).or_default().push(r);
    }
    for (id, group) in by_id {
        if !group.iter().any(|r| r.variant == Variant::Hum) {
            return Err(CorpusError::IncompleteTriplet {
                id: id.to_string(),
                missing: "hum".to_string(),
            });
        }
        let generators: BTreeSet<&str> = group
            .iter()
            .filter_map(|r| r.generator.as_deref())
            .collect();
        for g in generators {
            for variant in [Variant::Ai, Variant::HumAi] {
                let present = group
                    .iter()
                    .any(|r| r.variant == variant && r.generator.as_deref() == Some(g));
                if !present {
                    return Err(CorpusError::IncompleteTriplet {
                        id: id.to_string(),
                        missing: format!("{variant} by {g}"),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Export abstracts to CSV with a header row.
pub fn export_abstracts_csv(records: &[AbstractRecord], path: &Path) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["id", "author", "title", "text", "variant", "generator"])
        .map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record([
            r.id.as_str(),
            r.author.as_str(),
            r.title.as_str(),
            r.text.as_str(),
            &r.variant.to_string(),
            r.generator.as_deref().unwrap_or(""),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Export citation instances to CSV with a header row.
pub fn export_citations_csv(records: &[CitationInstance], path: &Path) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["id", "text", "ref_key", "label4", "label2", "annotator_note"])
        .map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record([
            r.id.as_str(),
            r.text.as_str(),
            r.ref_key.as_str(),
            &r.label4.map(|l| format!("{:?}", Label::from(l))).unwrap_or_default(),
            &r.label2.map(|l| format!("{:?}", Label::from(l))).unwrap_or_default(),
            r.annotator_note.as_deref().unwrap_or(""),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Export prediction records to CSV with a header row.
pub fn export_predictions_csv(
    records: &[PredictionRecord],
    path: &Path,
) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "sample_id",
        "model_id",
        "run_id",
        "timestamp",
        "task",
        "predicted",
        "raw_response",
        "prompt_tokens",
        "completion_tokens",
        "latency",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record([
            r.sample_id.as_str(),
            r.model_id.as_str(),
            r.run_id.as_str(),
            r.timestamp.as_str(),
            &r.task.to_string(),
            &r.predicted.to_string(),
            r.raw_response.as_str(),
            &r.prompt_tokens.to_string(),
            &r.completion_tokens.to_string(),
            &r.latency.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

fn csv_err(path: &Path, e: csv::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}
