//! Turning corpora into task samples and running one of the three
//! classification methods over them.
//!
//! Sample ids for authorship tasks are `{paper id}/{variant}` so that
//! the human and synthetic sides of a pair stay distinguishable in
//! prediction logs. Citation samples keep their instance id.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AbstractRecord, CitationInstance, Label, PredictionRecord, Task, Variant};
use crate::gateway::{BatchItem, Gateway, GatewayError, RunKey, TimestampSource};
use crate::hc::{hc_classify, hc_train, HcError, HcModel};
use crate::prompts::{
    label_or_unparsed, render_ac_prompt, render_cc_prompt, render_hybrid_prompt, CategoryExamples,
    PromptError,
};
use crate::text_features::{count_vector, FeatureError, Vocabulary};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("task {0} does not apply to this corpus")]
    WrongCorpus(Task),
    #[error("method {0} needs a training split")]
    MissingTrain(Method),
    #[error("method {0} needs a gateway")]
    MissingGateway(Method),
    #[error("only the llm method applies to citation tasks")]
    WrongMethod,
    #[error("citation {0} carries no gold label for this task")]
    UnlabeledInstance(String),
    #[error("paper {id} has no {missing} counterpart")]
    IncompletePair { id: String, missing: Variant },
    #[error("several generators present ({0}); select one")]
    AmbiguousGenerator(String),
    #[error("no samples to classify")]
    NoSamples,
    #[error(transparent)]
    Hc(#[from] HcError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// One labeled unit of work for a task.
#[derive(Debug, Clone)]
pub struct Sample {
    pub sample_id: String,
    pub text: String,
    pub gold: Label,
    /// Grouping key for per-group error reports: the author for
    /// authorship tasks, the cited reference for citation tasks.
    pub group: String,
    /// Present only for citation samples.
    pub ref_key: Option<String>,
}

/// Pair human abstracts with their synthetic counterparts and emit
/// one sample per side. The task picks the counterpart variant. With
/// no explicit generator the records must all come from a single one.
pub fn ac_samples(
    task: Task,
    records: &[AbstractRecord],
    generator: Option<&str>,
) -> Result<Vec<Sample>, ExperimentError> {
    if !task.is_authorship() {
        return Err(ExperimentError::WrongCorpus(task));
    }
    let wanted = if task == Task::Ac1 { Variant::Ai } else { Variant::HumAi };

    let chosen = match generator {
        Some(g) => g.to_string(),
        None => {
            let present: BTreeSet<&str> = records
                .iter()
                .filter(|r| r.variant == wanted)
                .filter_map(|r| r.generator.as_deref())
                .collect();
            if present.len() > 1 {
                let list: Vec<&str> = present.into_iter().collect();
                return Err(ExperimentError::AmbiguousGenerator(list.join(", ")));
            }
            present.into_iter().next().unwrap_or_default().to_string()
        }
    };

    let mut hum: BTreeMap<&str, &AbstractRecord> = BTreeMap::new();
    let mut counterpart: BTreeMap<&str, &AbstractRecord> = BTreeMap::new();
    for r in records {
        if r.variant == Variant::Hum {
            hum.insert(&r.id, r);
        } else if r.variant == wanted && r.generator.as_deref() == Some(chosen.as_str()) {
            counterpart.insert(&r.id, r);
        }
    }

    for id in hum.keys() {
        if !counterpart.contains_key(id) {
            return Err(ExperimentError::IncompletePair {
                id: id.to_string(),
                missing: wanted,
            });
        }
    }
    for id in counterpart.keys() {
        if !hum.contains_key(id) {
            return Err(ExperimentError::IncompletePair {
                id: id.to_string(),
                missing: Variant::Hum,
            });
        }
    }
    if hum.is_empty() {
        return Err(ExperimentError::NoSamples);
    }

    let mut out = Vec::with_capacity(hum.len() * 2);
    for (id, h) in &hum {
        let c = counterpart[id];
        out.push(Sample {
            sample_id: format!("{id}/{}", Variant::Hum),
            text: h.text.clone(),
            gold: Label::Hum,
            group: h.author.clone(),
            ref_key: None,
        });
        out.push(Sample {
            sample_id: format!("{id}/{wanted}"),
            text: c.text.clone(),
            gold: Label::Ai,
            group: c.author.clone(),
            ref_key: None,
        });
    }
    Ok(out)
}

/// One sample per labeled citation instance, sorted by id. CC2 gold
/// comes from the 2-class label when present, otherwise by merging
/// the 4-class one.
pub fn cc_samples(task: Task, instances: &[CitationInstance]) -> Result<Vec<Sample>, ExperimentError> {
    if task.is_authorship() {
        return Err(ExperimentError::WrongCorpus(task));
    }
    let mut out = Vec::with_capacity(instances.len());
    for inst in instances {
        let gold = match task {
            Task::Cc1 => inst.label4.map(Label::from),
            _ => inst
                .label2
                .map(Label::from)
                .or_else(|| inst.label4.map(|l| Label::from(l.merge()))),
        }
        .ok_or_else(|| ExperimentError::UnlabeledInstance(inst.id.clone()))?;
        out.push(Sample {
            sample_id: inst.id.clone(),
            text: inst.text.clone(),
            gold,
            group: inst.ref_key.clone(),
            ref_key: Some(inst.ref_key.clone()),
        });
    }
    if out.is_empty() {
        return Err(ExperimentError::NoSamples);
    }
    out.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(out)
}

pub fn gold_map(samples: &[Sample]) -> BTreeMap<String, Label> {
    samples
        .iter()
        .map(|s| (s.sample_id.clone(), s.gold))
        .collect()
}

pub fn group_map(samples: &[Sample]) -> BTreeMap<String, String> {
    samples
        .iter()
        .map(|s| (s.sample_id.clone(), s.group.clone()))
        .collect()
}

/// Base instructions plus the text under test.
pub fn compose_prompt(base: &str, text: &str) -> String {
    format!("{base}\n\nText: {text}")
}

/// How predictions are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Prompt a model directly.
    Llm,
    /// Word-frequency classifier, no model calls.
    Hc,
    /// Word-frequency feature selection feeding a model prompt.
    Hybrid,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Llm => "llm",
            Method::Hc => "hc",
            Method::Hybrid => "hybrid",
        };
        f.write_str(s)
    }
}

/// Everything produced by one experiment run.
#[derive(Debug)]
pub struct ExperimentOutput {
    /// One record per test sample, in sample order.
    pub records: Vec<PredictionRecord>,
    /// Model calls actually issued.
    pub requests_issued: usize,
    /// Samples answered from the resume log.
    pub skipped: usize,
    /// The trained word model, when the method has one.
    pub model: Option<HcModel>,
}

/// A configured experiment; run it over abstracts or citations.
pub struct Experiment<'a> {
    pub task: Task,
    pub method: Method,
    pub run_id: String,
    pub resume_log: PathBuf,
    pub examples: CategoryExamples,
    pub timestamps: TimestampSource,
    pub gateway: Option<&'a Gateway>,
}

impl Experiment<'_> {
    fn gateway(&self) -> Result<&Gateway, ExperimentError> {
        self.gateway
            .ok_or(ExperimentError::MissingGateway(self.method))
    }

    fn run_key(&self, model_id: &str) -> RunKey {
        RunKey {
            model_id: model_id.to_string(),
            run_id: self.run_id.clone(),
            task: self.task,
        }
    }

    async fn classify_batch(
        &self,
        model_id: &str,
        items: Vec<BatchItem>,
    ) -> Result<(Vec<PredictionRecord>, usize, usize), ExperimentError> {
        let gw = self.gateway()?;
        let task = self.task;
        let out = gw
            .run_batch(&self.run_key(model_id), &items, &self.resume_log, move |raw| {
                label_or_unparsed(raw, task)
            })
            .await?;
        Ok((out.records, out.issued, out.skipped))
    }

    /// Train on the split when the method needs it, then predict every
    /// test sample.
    pub async fn run_abstracts(
        &self,
        train: Option<&[AbstractRecord]>,
        test: &[AbstractRecord],
        generator: Option<&str>,
    ) -> Result<ExperimentOutput, ExperimentError> {
        if !self.task.is_authorship() {
            return Err(ExperimentError::WrongCorpus(self.task));
        }
        let test_samples = ac_samples(self.task, test, generator)?;

        match self.method {
            Method::Llm => {
                let base = render_ac_prompt();
                let items = compose_items(&base, &test_samples);
                let model_id = self.gateway()?.config().model_id.clone();
                let (records, issued, skipped) = self.classify_batch(&model_id, items).await?;
                Ok(ExperimentOutput {
                    records,
                    requests_issued: issued,
                    skipped,
                    model: None,
                })
            }
            Method::Hc => {
                let (model, _) = self.train_word_model(train, generator)?;
                let records = classify_with_model(
                    &model,
                    &test_samples,
                    self.task,
                    &self.run_id,
                    &self.timestamps,
                )?;
                Ok(ExperimentOutput {
                    records,
                    requests_issued: 0,
                    skipped: 0,
                    model: Some(model),
                })
            }
            Method::Hybrid => {
                let (model, vocab) = self.train_word_model(train, generator)?;
                let s1: Vec<String> = model.s1.iter().map(|&j| vocab.word(j).to_string()).collect();
                let s2: Vec<String> = model.s2.iter().map(|&j| vocab.word(j).to_string()).collect();
                let base = render_hybrid_prompt(&s1, &s2)?;
                let items = compose_items(&base, &test_samples);
                let model_id = format!("{}-hc", self.gateway()?.config().model_id);
                let (records, issued, skipped) = self.classify_batch(&model_id, items).await?;
                Ok(ExperimentOutput {
                    records,
                    requests_issued: issued,
                    skipped,
                    model: Some(model),
                })
            }
        }
    }

    /// Classify labeled citation instances by prompting a model.
    pub async fn run_citations(
        &self,
        test: &[CitationInstance],
    ) -> Result<ExperimentOutput, ExperimentError> {
        if self.task.is_authorship() {
            return Err(ExperimentError::WrongCorpus(self.task));
        }
        if self.method != Method::Llm {
            return Err(ExperimentError::WrongMethod);
        }
        let samples = cc_samples(self.task, test)?;
        let n_classes = if self.task == Task::Cc1 { 4 } else { 2 };
        let mut items = Vec::with_capacity(samples.len());
        for s in &samples {
            let ref_key = s.ref_key.as_deref().expect("citation samples carry a ref_key");
            items.push(BatchItem {
                id: s.sample_id.clone(),
                prompt: render_cc_prompt(n_classes, &s.text, ref_key, &self.examples)?,
            });
        }
        let model_id = self.gateway()?.config().model_id.clone();
        let (records, issued, skipped) = self.classify_batch(&model_id, items).await?;
        Ok(ExperimentOutput {
            records,
            requests_issued: issued,
            skipped,
            model: None,
        })
    }

    fn train_word_model(
        &self,
        train: Option<&[AbstractRecord]>,
        generator: Option<&str>,
    ) -> Result<(HcModel, Vocabulary), ExperimentError> {
        let train = train.ok_or(ExperimentError::MissingTrain(self.method))?;
        train_from_records(self.task, train, generator)
    }
}

/// Vocabulary over every training document, then the two-sample word
/// tests. Both variants of each training pair contribute.
pub fn train_from_records(
    task: Task,
    train: &[AbstractRecord],
    generator: Option<&str>,
) -> Result<(HcModel, Vocabulary), ExperimentError> {
    let train_samples = ac_samples(task, train, generator)?;
    let texts: Vec<&str> = train_samples.iter().map(|s| s.text.as_str()).collect();
    let vocab = Vocabulary::build(&texts)?;
    let x_docs: Vec<_> = train_samples
        .iter()
        .filter(|s| s.gold == Label::Hum)
        .map(|s| count_vector(&s.text, &vocab))
        .collect();
    let y_docs: Vec<_> = train_samples
        .iter()
        .filter(|s| s.gold == Label::Ai)
        .map(|s| count_vector(&s.text, &vocab))
        .collect();
    let model = hc_train(&vocab, &x_docs, &y_docs)?;
    Ok((model, vocab))
}

/// Predict every sample with a trained word model; no model calls.
pub fn classify_with_model(
    model: &HcModel,
    samples: &[Sample],
    task: Task,
    run_id: &str,
    timestamps: &TimestampSource,
) -> Result<Vec<PredictionRecord>, ExperimentError> {
    let mut records = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let counts = count_vector(&s.text, &model.vocab);
        let decision = hc_classify(model, &counts)?;
        records.push(PredictionRecord {
            sample_id: s.sample_id.clone(),
            model_id: "hc".to_string(),
            run_id: run_id.to_string(),
            timestamp: timestamps.stamp(i as u64),
            task,
            predicted: decision.label,
            raw_response: format!("statistic={:.6}", decision.statistic),
            prompt_tokens: 0,
            completion_tokens: 0,
            latency: 0,
        });
    }
    Ok(records)
}

fn compose_items(base: &str, samples: &[Sample]) -> Vec<BatchItem> {
    samples
        .iter()
        .map(|s| BatchItem {
            id: s.sample_id.clone(),
            prompt: compose_prompt(base, &s.text),
        })
        .collect()
}
