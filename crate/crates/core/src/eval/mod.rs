//! Measurement machinery over prediction records: error rates,
//! per-group errors and box-plot summaries, cross-model agreement,
//! difficulty stratification, run-to-run stability, and method
//! ranking.
//!
//! An Unparsed prediction counts as an error against every gold label
//! and as a disagreement with every prediction, another Unparsed
//! included. Only the diagonal of the agreement matrix is defined to
//! be 1.

pub mod experiment;
pub mod reports;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Label, PredictionRecord, Task};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction ids do not match gold ids (first difference: {0})")]
    IdMismatch(String),
    #[error("no samples")]
    Empty,
    #[error("sample {0} has no group assignment")]
    MissingGroup(String),
    #[error("need at least {need} runs, have {have}")]
    TooFewRuns { need: usize, have: usize },
    #[error("gold label {label} is not legal for task {task}")]
    IllegalGold { label: Label, task: Task },
    #[error("no runs recorded for model {0}")]
    UnknownModel(String),
    #[error("task {task} error table is missing model {model}")]
    InconsistentModels { task: Task, model: String },
    #[error("duplicate prediction for sample {sample} by {model}/{run}")]
    DuplicatePrediction {
        sample: String,
        model: String,
        run: String,
    },
}

/// A model/run pair naming one prediction vector.
pub type RunId = (String, String);

/// Gold labels plus any number of aligned prediction vectors for one
/// task.
#[derive(Debug, Clone)]
pub struct RunSet {
    pub task: Task,
    pub gold: BTreeMap<String, Label>,
    pub runs: BTreeMap<RunId, BTreeMap<String, Label>>,
}

impl RunSet {
    pub fn new(task: Task, gold: BTreeMap<String, Label>) -> Result<Self, EvalError> {
        if gold.is_empty() {
            return Err(EvalError::Empty);
        }
        for &label in gold.values() {
            if label == Label::Unparsed || !label.is_legal_for(task) {
                return Err(EvalError::IllegalGold { label, task });
            }
        }
        Ok(RunSet {
            task,
            gold,
            runs: BTreeMap::new(),
        })
    }

    /// Add one prediction vector; it must cover exactly the gold ids.
    pub fn add_run(
        &mut self,
        model_id: &str,
        run_id: &str,
        preds: BTreeMap<String, Label>,
    ) -> Result<(), EvalError> {
        check_same_ids(&preds, &self.gold)?;
        self.runs
            .insert((model_id.to_string(), run_id.to_string()), preds);
        Ok(())
    }

    /// Group loose prediction records into runs and validate coverage.
    pub fn add_records(&mut self, records: &[PredictionRecord]) -> Result<(), EvalError> {
        let mut grouped: BTreeMap<RunId, BTreeMap<String, Label>> = BTreeMap::new();
        for r in records {
            if r.task != self.task {
                continue;
            }
            let key = (r.model_id.clone(), r.run_id.clone());
            let entry = grouped.entry(key).or_default();
            if entry.insert(r.sample_id.clone(), r.predicted).is_some() {
                return Err(EvalError::DuplicatePrediction {
                    sample: r.sample_id.clone(),
                    model: r.model_id.clone(),
                    run: r.run_id.clone(),
                });
            }
        }
        for ((model, run), preds) in grouped {
            self.add_run(&model, &run, preds)?;
        }
        Ok(())
    }

    pub fn run_ids(&self) -> Vec<RunId> {
        self.runs.keys().cloned().collect()
    }

    /// Distinct model ids present, in sorted order.
    pub fn models(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.runs.keys().map(|(m, _)| m).collect();
        set.into_iter().cloned().collect()
    }
}

fn check_same_ids(
    preds: &BTreeMap<String, Label>,
    gold: &BTreeMap<String, Label>,
) -> Result<(), EvalError> {
    if preds.len() != gold.len() {
        return Err(EvalError::IdMismatch(format!(
            "{} predictions vs {} gold labels",
            preds.len(),
            gold.len()
        )));
    }
    for id in preds.keys() {
        if !gold.contains_key(id) {
            return Err(EvalError::IdMismatch(id.clone()));
        }
    }
    Ok(())
}

/// Fraction of samples misclassified; Unparsed counts as wrong.
pub fn error_rate(
    preds: &BTreeMap<String, Label>,
    gold: &BTreeMap<String, Label>,
) -> Result<f64, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    check_same_ids(preds, gold)?;
    let wrong = gold
        .iter()
        .filter(|(id, &g)| !preds[*id].agrees_with(g))
        .count();
    Ok(wrong as f64 / gold.len() as f64)
}

/// Error rate restricted to each group of samples.
pub fn per_group_errors(
    preds: &BTreeMap<String, Label>,
    gold: &BTreeMap<String, Label>,
    group_of: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, f64>, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::Empty);
    }
    check_same_ids(preds, gold)?;
    let mut wrong: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (id, &g) in gold {
        let group = group_of
            .get(id)
            .ok_or_else(|| EvalError::MissingGroup(id.clone()))?;
        let counts = wrong.entry(group).or_insert((0, 0));
        counts.1 += 1;
        if !preds[id].agrees_with(g) {
            counts.0 += 1;
        }
    }
    Ok(wrong
        .into_iter()
        .map(|(g, (w, n))| (g.to_string(), w as f64 / n as f64))
        .collect())
}

/// Five-number summary with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxplotSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile at fraction `p` of sorted data, interpolating between
/// order statistics at index (n-1)p.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

pub fn boxplot_summary(values: &[f64]) -> Result<BoxplotSummary, EvalError> {
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(BoxplotSummary {
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Pairwise agreement between all prediction vectors of a run set.
#[derive(Debug, Clone, Serialize)]
pub struct AgreementMatrix {
    /// Row/column order.
    pub keys: Vec<RunId>,
    pub matrix: Vec<Vec<f64>>,
}

impl AgreementMatrix {
    pub fn entry(&self, a: &RunId, b: &RunId) -> Option<f64> {
        let i = self.keys.iter().position(|k| k == a)?;
        let j = self.keys.iter().position(|k| k == b)?;
        Some(self.matrix[i][j])
    }
}

/// Fraction of samples where two vectors assign the same label.
pub fn pair_agreement(
    a: &BTreeMap<String, Label>,
    b: &BTreeMap<String, Label>,
) -> Result<f64, EvalError> {
    if a.is_empty() {
        return Err(EvalError::Empty);
    }
    check_same_ids(a, b)?;
    let same = a
        .iter()
        .filter(|(id, &la)| la.agrees_with(b[*id]))
        .count();
    Ok(same as f64 / a.len() as f64)
}

/// Agreement between every pair of prediction vectors; diagonal is 1
/// by definition.
pub fn agreement_matrix(runset: &RunSet) -> Result<AgreementMatrix, EvalError> {
    let keys = runset.run_ids();
    if keys.len() < 2 {
        return Err(EvalError::TooFewRuns {
            need: 2,
            have: keys.len(),
        });
    }
    let n = keys.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        matrix[i][i] = 1.0;
        for j in i + 1..n {
            let value = pair_agreement(&runset.runs[&keys[i]], &runset.runs[&keys[j]])?;
            matrix[i][j] = value;
            matrix[j][i] = value;
        }
    }
    Ok(AgreementMatrix { keys, matrix })
}

/// Per-sample mean error across every prediction vector in the set.
pub fn per_sample_mean_error(runset: &RunSet) -> Result<BTreeMap<String, f64>, EvalError> {
    if runset.runs.is_empty() {
        return Err(EvalError::TooFewRuns { need: 1, have: 0 });
    }
    let r = runset.runs.len() as f64;
    let mut out = BTreeMap::new();
    for (id, &g) in &runset.gold {
        let wrong = runset
            .runs
            .values()
            .filter(|preds| !preds[id].agrees_with(g))
            .count();
        out.insert(id.clone(), wrong as f64 / r);
    }
    Ok(out)
}

/// Difficulty stratum of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Stratum {
    Easy,
    Medium,
    Difficult,
}

impl std::fmt::Display for Stratum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stratum::Easy => "Easy",
            Stratum::Medium => "Medium",
            Stratum::Difficult => "Difficult",
        };
        f.write_str(s)
    }
}

/// Sort samples by mean error (ties by id) and mark the lowest
/// floor(0.3n) Easy, the highest floor(0.3n) Difficult, the rest
/// Medium.
pub fn stratify_difficulty(
    mean_error: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, Stratum>, EvalError> {
    if mean_error.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut order: Vec<(&String, f64)> = mean_error.iter().map(|(id, &e)| (id, e)).collect();
    order.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("finite errors")
            .then_with(|| a.0.cmp(b.0))
    });
    let n = order.len();
    let edge = (0.3 * n as f64).floor() as usize;
    let mut out = BTreeMap::new();
    for (pos, (id, _)) in order.into_iter().enumerate() {
        let stratum = if pos < edge {
            Stratum::Easy
        } else if pos >= n - edge {
            Stratum::Difficult
        } else {
            Stratum::Medium
        };
        out.insert(id.clone(), stratum);
    }
    Ok(out)
}

/// Stability of one model across repeated runs.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub model_id: String,
    /// Runs in sorted run-id order with their error rates.
    pub runs: Vec<(String, f64)>,
    pub min_error: f64,
    pub mean_error: f64,
    pub max_error: f64,
    /// Agreement for every run pair (a < b).
    pub pairwise: Vec<(String, String, f64)>,
}

pub fn stability_report(runset: &RunSet, model_id: &str) -> Result<StabilityReport, EvalError> {
    let runs: Vec<(&RunId, &BTreeMap<String, Label>)> = runset
        .runs
        .iter()
        .filter(|((m, _), _)| m == model_id)
        .collect();
    if runset.runs.keys().all(|(m, _)| m != model_id) {
        return Err(EvalError::UnknownModel(model_id.to_string()));
    }
    if runs.len() < 2 {
        return Err(EvalError::TooFewRuns {
            need: 2,
            have: runs.len(),
        });
    }

    let mut errors = Vec::with_capacity(runs.len());
    for ((_, run_id), preds) in &runs {
        errors.push((run_id.clone(), error_rate(preds, &runset.gold)?));
    }
    let values: Vec<f64> = errors.iter().map(|(_, e)| *e).collect();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;

    let mut pairwise = Vec::new();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let a = pair_agreement(runs[i].1, runs[j].1)?;
            pairwise.push((runs[i].0 .1.clone(), runs[j].0 .1.clone(), a));
        }
    }

    Ok(StabilityReport {
        model_id: model_id.to_string(),
        runs: errors,
        min_error: min,
        mean_error: mean,
        max_error: max,
        pairwise,
    })
}

/// Per-task ranks plus cross-task averages.
#[derive(Debug, Clone, Serialize)]
pub struct RankTable {
    /// Sorted model names; every rank map covers exactly these.
    pub models: Vec<String>,
    pub tasks: Vec<Task>,
    pub ranks: BTreeMap<Task, BTreeMap<String, usize>>,
    pub average: BTreeMap<String, f64>,
    /// (task, model_a, model_b) whose errors tied at full precision;
    /// their ranks were ordered by model name.
    pub ties: Vec<(Task, String, String)>,
}

/// Rank models per task by ascending error (rank 1 = lowest). Errors
/// are compared at full stored precision; exact ties fall back to
/// model-name order and are flagged.
pub fn rank_methods(
    errors: &BTreeMap<Task, BTreeMap<String, f64>>,
) -> Result<RankTable, EvalError> {
    if errors.is_empty() {
        return Err(EvalError::Empty);
    }
    let tasks: Vec<Task> = errors.keys().cloned().collect();
    let models: Vec<String> = errors[&tasks[0]].keys().cloned().collect();
    if models.is_empty() {
        return Err(EvalError::Empty);
    }
    for (task, table) in errors {
        for model in &models {
            if !table.contains_key(model) {
                return Err(EvalError::InconsistentModels {
                    task: *task,
                    model: model.clone(),
                });
            }
        }
        if table.len() != models.len() {
            let extra = table.keys().find(|m| !models.contains(m)).expect("len differs");
            return Err(EvalError::InconsistentModels {
                task: *task,
                model: extra.clone(),
            });
        }
    }

    let mut ranks: BTreeMap<Task, BTreeMap<String, usize>> = BTreeMap::new();
    let mut ties = Vec::new();
    for (&task, table) in errors {
        let mut order: Vec<(&String, f64)> = table.iter().map(|(m, &e)| (m, e)).collect();
        order.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .expect("finite errors")
                .then_with(|| a.0.cmp(b.0))
        });
        for pair in order.windows(2) {
            if pair[0].1 == pair[1].1 {
                ties.push((task, pair[0].0.clone(), pair[1].0.clone()));
            }
        }
        ranks.insert(
            task,
            order
                .into_iter()
                .enumerate()
                .map(|(i, (m, _))| (m.clone(), i + 1))
                .collect(),
        );
    }

    let mut average = BTreeMap::new();
    for model in &models {
        let total: usize = tasks.iter().map(|t| ranks[t][model]).sum();
        average.insert(model.clone(), total as f64 / tasks.len() as f64);
    }

    Ok(RankTable {
        models,
        tasks,
        ranks,
        average,
        ties,
    })
}
