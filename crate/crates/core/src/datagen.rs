//! Dataset generation: produce AI and humAI variants of human-written
//! abstracts through the gateway, with a JSONL cache keyed on
//! (abstract id, variant, generator model) so reruns never repeat a
//! request. Also the paired length analysis of original vs. variant.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{self, AbstractRecord, CorpusError, Variant};
use crate::gateway::{Gateway, GatewayError};
use crate::prompts::{render_generation_prompt, GenerationKind, PromptError};
use crate::text_features::tokenize;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("abstract {0} is not a hum record")]
    NotHuman(String),
    #[error("abstract {0} has an empty {1}")]
    EmptyInput(String, &'static str),
    #[error("model returned an empty completion for abstract {0}")]
    EmptyCompletion(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

impl GenerationKind {
    pub fn variant(self) -> Variant {
        match self {
            GenerationKind::Ai => Variant::Ai,
            GenerationKind::HumAi => Variant::HumAi,
        }
    }
}

/// Append-only JSONL cache of generated variants.
pub struct VariantCache {
    path: PathBuf,
    entries: BTreeMap<(String, Variant, String), AbstractRecord>,
}

impl VariantCache {
    /// Open (or create on first insert) the cache file.
    pub fn open(path: &Path) -> Result<Self, DatagenError> {
        let mut entries = BTreeMap::new();
        if path.exists() {
            for record in corpus::load_abstracts(path)? {
                let generator = record.generator.clone().unwrap_or_default();
                entries.insert((record.id.clone(), record.variant, generator), record);
            }
        }
        Ok(VariantCache {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn get(&self, id: &str, variant: Variant, generator: &str) -> Option<&AbstractRecord> {
        self.entries
            .get(&(id.to_string(), variant, generator.to_string()))
    }

    fn insert(&mut self, record: AbstractRecord) -> Result<(), DatagenError> {
        corpus::append_jsonl(&self.path, &record)?;
        let generator = record.generator.clone().unwrap_or_default();
        self.entries
            .insert((record.id.clone(), record.variant, generator), record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Generate one variant of a hum abstract, or return the cached copy
/// without issuing any request.
pub async fn generate_variant(
    record: &AbstractRecord,
    kind: GenerationKind,
    gateway: &Gateway,
    cache: &mut VariantCache,
) -> Result<AbstractRecord, DatagenError> {
    if record.variant != Variant::Hum {
        return Err(DatagenError::NotHuman(record.id.clone()));
    }
    let payload = match kind {
        GenerationKind::Ai => {
            if record.title.is_empty() {
                return Err(DatagenError::EmptyInput(record.id.clone(), "title"));
            }
            record.title.as_str()
        }
        GenerationKind::HumAi => {
            if record.text.is_empty() {
                return Err(DatagenError::EmptyInput(record.id.clone(), "text"));
            }
            record.text.as_str()
        }
    };

    let model_id = gateway.config().model_id.clone();
    if let Some(hit) = cache.get(&record.id, kind.variant(), &model_id) {
        return Ok(hit.clone());
    }

    let prompt = render_generation_prompt(kind, payload)?;
    let result = gateway.complete(&prompt).await?;
    if result.text.trim().is_empty() {
        return Err(DatagenError::EmptyCompletion(record.id.clone()));
    }

    let generated = AbstractRecord {
        id: record.id.clone(),
        author: record.author.clone(),
        title: record.title.clone(),
        text: result.text,
        variant: kind.variant(),
        generator: Some(model_id),
    };
    cache.insert(generated.clone())?;
    Ok(generated)
}

/// Produce all requested variants for every hum record, returning the
/// originals followed by their variants in input order. Non-hum input
/// records are rejected.
pub async fn generate_corpus(
    records: &[AbstractRecord],
    kinds: &[GenerationKind],
    gateway: &Gateway,
    cache: &mut VariantCache,
) -> Result<Vec<AbstractRecord>, DatagenError> {
    let mut out = Vec::with_capacity(records.len() * (1 + kinds.len()));
    for record in records {
        out.push(record.clone());
        for &kind in kinds {
            out.push(generate_variant(record, kind, gateway, cache).await?);
        }
    }
    Ok(out)
}

/// One original/variant pair for the length analysis.
#[derive(Debug, Clone)]
pub struct TextPair {
    pub id: String,
    pub hum_text: String,
    pub variant_text: String,
}

/// Token lengths of one pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthRow {
    pub id: String,
    pub hum_len: usize,
    pub variant_len: usize,
}

/// Scatter data plus the Pearson correlation of the two length
/// columns. The correlation is omitted for fewer than two pairs, and
/// omitted with `degenerate` set when either column has zero variance.
#[derive(Debug, Clone)]
pub struct LengthReport {
    pub rows: Vec<LengthRow>,
    pub correlation: Option<f64>,
    pub degenerate: bool,
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Word-length comparison of originals against their variants.
pub fn length_stats(pairs: &[TextPair]) -> LengthReport {
    let rows: Vec<LengthRow> = pairs
        .iter()
        .map(|p| LengthRow {
            id: p.id.clone(),
            hum_len: tokenize(&p.hum_text).len(),
            variant_len: tokenize(&p.variant_text).len(),
        })
        .collect();

    if rows.len() < 2 {
        return LengthReport {
            rows,
            correlation: None,
            degenerate: false,
        };
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.hum_len as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.variant_len as f64).collect();
    match pearson(&xs, &ys) {
        Some(r) => LengthReport {
            rows,
            correlation: Some(r),
            degenerate: false,
        },
        None => LengthReport {
            rows,
            correlation: None,
            degenerate: true,
        },
    }
}

/// Write the scatter rows as CSV (id, hum_len, variant_len).
pub fn write_length_csv(report: &LengthReport, path: &Path) -> Result<(), DatagenError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| DatagenError::Corpus(csv_io(path, e)))?;
    w.write_record(["id", "hum_len", "variant_len"])
        .map_err(|e| DatagenError::Corpus(csv_io(path, e)))?;
    for row in &report.rows {
        w.write_record([
            row.id.as_str(),
            &row.hum_len.to_string(),
            &row.variant_len.to_string(),
        ])
        .map_err(|e| DatagenError::Corpus(csv_io(path, e)))?;
    }
    w.flush()
        .map_err(|e| DatagenError::Corpus(CorpusError::Io {
            path: path.display().to_string(),
            source: e,
        }))?;
    Ok(())
}

fn csv_io(path: &Path, e: csv::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}
