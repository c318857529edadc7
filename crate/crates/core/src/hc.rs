//! Higher Criticism word selection and the linear word-count classifier.
//!
//! Training runs a Welch two-sample t-test per vocabulary word on raw
//! counts, picks the selected-set size with the tuning-free Higher
//! Criticism threshold, and splits the selected words by t-statistic
//! sign into a human-leaning set and an AI-leaning set. Classification
//! centers a test vector at the pooled training mean and compares the
//! mass on the two sets.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::corpus::Label;
use crate::text_features::{Vocabulary, WordCountVector};

#[derive(Debug, Error)]
pub enum HcError {
    #[error("class {class} has {n} documents; at least 2 required")]
    InsufficientSamples { class: &'static str, n: usize },
    #[error("need at least 2 p-values, got {0}")]
    TooFewWords(usize),
    #[error("p-value {0} outside [0, 1]")]
    InvalidPValue(f64),
    #[error("count vector has {got} entries, model vocabulary has {expected}")]
    MisalignedVector { expected: usize, got: usize },
    #[error("sample for t-test has {0} values; at least 2 required")]
    ShortSample(usize),
    #[error("model file invalid: {0}")]
    InvalidModel(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Outcome of one per-word two-sample t-test.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTestResult {
    pub word_index: usize,
    pub t_stat: f64,
    pub p_value: f64,
    /// Both samples constant with unequal means: infinite t, p = 0.
    pub degenerate: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Welch two-sample t-test (unequal variances, Welch–Satterthwaite
/// degrees of freedom) with a two-sided p-value. Positive t means
/// mean(x) > mean(y).
pub fn two_sample_t(x: &[f64], y: &[f64]) -> Result<WordTestResult, HcError> {
    if x.len() < 2 {
        return Err(HcError::ShortSample(x.len()));
    }
    if y.len() < 2 {
        return Err(HcError::ShortSample(y.len()));
    }

    let mx = mean(x);
    let my = mean(y);
    let vx = sample_variance(x, mx);
    let vy = sample_variance(y, my);
    let sex = vx / x.len() as f64;
    let sey = vy / y.len() as f64;
    let se = sex + sey;

    if se == 0.0 {
        // Zero variance in both classes: no test is possible. Equal
        // means carry no signal (p = 1); unequal means are infinitely
        // separated (p = 0), flagged so callers can tell.
        return if mx == my {
            Ok(WordTestResult {
                word_index: 0,
                t_stat: 0.0,
                p_value: 1.0,
                degenerate: false,
            })
        } else {
            Ok(WordTestResult {
                word_index: 0,
                t_stat: if mx > my { f64::INFINITY } else { f64::NEG_INFINITY },
                p_value: 0.0,
                degenerate: true,
            })
        };
    }

    let t = (mx - my) / se.sqrt();
    let df = se * se
        / (sex * sex / (x.len() as f64 - 1.0) + sey * sey / (y.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0 by construction");
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);

    Ok(WordTestResult {
        word_index: 0,
        t_stat: t,
        p_value: p,
        degenerate: false,
    })
}

/// The Higher Criticism objective at position j of p sorted p-values.
pub fn hc_objective(j: usize, p: usize, pi_j: f64) -> f64 {
    let frac = j as f64 / p as f64;
    (frac - pi_j) / (frac * (1.0 - frac)).sqrt()
}

/// Selected-set size and the p-value cut it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HcThreshold {
    pub j_star: usize,
    pub threshold_p: f64,
}

/// Tuning-free selected-set size: sort the p-values ascending and take
/// j_star = argmax over j = 1..p−1 of the HC objective. j = p is
/// excluded (the denominator vanishes); ties go to the smaller j.
pub fn hc_threshold(p_values: &[f64]) -> Result<HcThreshold, HcError> {
    let p = p_values.len();
    if p < 2 {
        return Err(HcError::TooFewWords(p));
    }
    for &v in p_values {
        if !(0.0..=1.0).contains(&v) {
            return Err(HcError::InvalidPValue(v));
        }
    }

    let mut sorted = p_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("p-values are finite"));

    let mut best_j = 1;
    let mut best = hc_objective(1, p, sorted[0]);
    for j in 2..p {
        let obj = hc_objective(j, p, sorted[j - 1]);
        if obj > best {
            best = obj;
            best_j = j;
        }
    }

    Ok(HcThreshold {
        j_star: best_j,
        threshold_p: sorted[best_j - 1],
    })
}

/// A trained Higher Criticism classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct HcModel {
    pub vocab: Vocabulary,
    /// Human-leaning selected words (t > 0).
    pub s1: BTreeSet<usize>,
    /// AI-leaning selected words (t < 0).
    pub s2: BTreeSet<usize>,
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    /// |s1| + |s2| after discarding selected words with t = 0.
    pub j_star: usize,
    /// The p-value cut that produced the selected set.
    pub threshold_p: f64,
}

impl HcModel {
    pub fn selected(&self) -> BTreeSet<usize> {
        self.s1.union(&self.s2).copied().collect()
    }

    fn check(&self) -> Result<(), HcError> {
        if !self.s1.is_disjoint(&self.s2) {
            return Err(HcError::InvalidModel("s1 and s2 overlap".into()));
        }
        if self.s1.len() + self.s2.len() != self.j_star {
            return Err(HcError::InvalidModel(format!(
                "|s1| + |s2| = {} but j_star = {}",
                self.s1.len() + self.s2.len(),
                self.j_star
            )));
        }
        let p = self.vocab.len();
        if self.mean_x.len() != p || self.mean_y.len() != p {
            return Err(HcError::InvalidModel("mean vector length mismatch".into()));
        }
        if let Some(&j) = self.s1.iter().chain(self.s2.iter()).max() {
            if j >= p {
                return Err(HcError::InvalidModel(format!(
                    "selected index {j} out of vocabulary range {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Run the per-word t-tests for every vocabulary position.
pub fn word_tests(
    vocab: &Vocabulary,
    x_docs: &[WordCountVector],
    y_docs: &[WordCountVector],
) -> Result<Vec<WordTestResult>, HcError> {
    if x_docs.len() < 2 {
        return Err(HcError::InsufficientSamples {
            class: "x",
            n: x_docs.len(),
        });
    }
    if y_docs.len() < 2 {
        return Err(HcError::InsufficientSamples {
            class: "y",
            n: y_docs.len(),
        });
    }
    for v in x_docs.iter().chain(y_docs) {
        if v.len() != vocab.len() {
            return Err(HcError::MisalignedVector {
                expected: vocab.len(),
                got: v.len(),
            });
        }
    }

    let mut results = Vec::with_capacity(vocab.len());
    let mut xs = vec![0.0; x_docs.len()];
    let mut ys = vec![0.0; y_docs.len()];
    for j in 0..vocab.len() {
        for (i, d) in x_docs.iter().enumerate() {
            xs[i] = f64::from(d.counts[j]);
        }
        for (i, d) in y_docs.iter().enumerate() {
            ys[i] = f64::from(d.counts[j]);
        }
        let mut r = two_sample_t(&xs, &ys)?;
        r.word_index = j;
        results.push(r);
    }
    Ok(results)
}

/// Train the classifier: per-word tests, HC threshold, sign split.
pub fn hc_train(
    vocab: &Vocabulary,
    x_docs: &[WordCountVector],
    y_docs: &[WordCountVector],
) -> Result<HcModel, HcError> {
    let tests = word_tests(vocab, x_docs, y_docs)?;
    let p_values: Vec<f64> = tests.iter().map(|r| r.p_value).collect();
    let threshold = hc_threshold(&p_values)?;

    // Exactly j_star selected words; ties at the threshold p-value are
    // resolved by ascending vocabulary index, which the stable sort on
    // p-value alone guarantees here.
    let mut order: Vec<usize> = (0..tests.len()).collect();
    order.sort_by(|&a, &b| {
        tests[a]
            .p_value
            .partial_cmp(&tests[b].p_value)
            .expect("p-values are finite")
    });

    let mut s1 = BTreeSet::new();
    let mut s2 = BTreeSet::new();
    for &j in order.iter().take(threshold.j_star) {
        if tests[j].t_stat > 0.0 {
            s1.insert(j);
        } else if tests[j].t_stat < 0.0 {
            s2.insert(j);
        }
        // t = 0 carries no direction; dropped, shrinking the set.
    }

    let mean_of = |docs: &[WordCountVector]| -> Vec<f64> {
        let n = docs.len() as f64;
        (0..vocab.len())
            .map(|j| docs.iter().map(|d| f64::from(d.counts[j])).sum::<f64>() / n)
            .collect()
    };

    let model = HcModel {
        vocab: vocab.clone(),
        j_star: s1.len() + s2.len(),
        s1,
        s2,
        mean_x: mean_of(x_docs),
        mean_y: mean_of(y_docs),
        n1: x_docs.len(),
        n2: y_docs.len(),
        threshold_p: threshold.threshold_p,
    };
    model.check()?;
    Ok(model)
}

/// A classification with its diagnostic statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HcDecision {
    pub label: Label,
    pub statistic: f64,
}

/// Classify one count vector: center at the pooled training mean, sum
/// the centered counts over the human-leaning set minus the AI-leaning
/// set, and call it human iff the result is strictly positive. A tie
/// at exactly zero goes to AI.
pub fn hc_classify(model: &HcModel, test_vec: &WordCountVector) -> Result<HcDecision, HcError> {
    if test_vec.len() != model.vocab.len() {
        return Err(HcError::MisalignedVector {
            expected: model.vocab.len(),
            got: test_vec.len(),
        });
    }

    let n1 = model.n1 as f64;
    let n2 = model.n2 as f64;
    let total = n1 + n2;
    let z = |j: usize| {
        f64::from(test_vec.counts[j])
            - (n1 / total * model.mean_x[j] + n2 / total * model.mean_y[j])
    };

    let statistic: f64 =
        model.s1.iter().map(|&j| z(j)).sum::<f64>() - model.s2.iter().map(|&j| z(j)).sum::<f64>();

    let label = if statistic > 0.0 { Label::Hum } else { Label::Ai };
    Ok(HcDecision { label, statistic })
}

/// Serialized model form: selected sets stored as words so the file is
/// readable and reusable in prompts.
#[derive(Debug, Serialize, Deserialize)]
struct HcModelFile {
    vocab: Vec<String>,
    s1: Vec<String>,
    s2: Vec<String>,
    mean_x: Vec<f64>,
    mean_y: Vec<f64>,
    n1: usize,
    n2: usize,
    j_star: usize,
    threshold_p: f64,
}

/// Write a model to JSON.
pub fn save_model(model: &HcModel, path: &Path) -> Result<(), HcError> {
    let words = |set: &BTreeSet<usize>| -> Vec<String> {
        set.iter().map(|&j| model.vocab.word(j).to_string()).collect()
    };
    let file = HcModelFile {
        vocab: model.vocab.words().to_vec(),
        s1: words(&model.s1),
        s2: words(&model.s2),
        mean_x: model.mean_x.clone(),
        mean_y: model.mean_y.clone(),
        n1: model.n1,
        n2: model.n2,
        j_star: model.j_star,
        threshold_p: model.threshold_p,
    };
    let f = File::create(path).map_err(|e| HcError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::to_writer_pretty(BufWriter::new(f), &file)?;
    Ok(())
}

/// Read a model back from JSON, revalidating its invariants.
pub fn load_model(path: &Path) -> Result<HcModel, HcError> {
    let f = File::open(path).map_err(|e| HcError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let file: HcModelFile = serde_json::from_reader(BufReader::new(f))?;
    let vocab = Vocabulary::from_sorted_words(file.vocab)
        .map_err(|e| HcError::InvalidModel(e.to_string()))?;
    let resolve = |words: &[String]| -> Result<BTreeSet<usize>, HcError> {
        words
            .iter()
            .map(|w| {
                vocab
                    .position(w)
                    .ok_or_else(|| HcError::InvalidModel(format!("word '{w}' not in vocabulary")))
            })
            .collect()
    };
    let model = HcModel {
        s1: resolve(&file.s1)?,
        s2: resolve(&file.s2)?,
        vocab,
        mean_x: file.mean_x,
        mean_y: file.mean_y,
        n1: file.n1,
        n2: file.n2,
        j_star: file.j_star,
        threshold_p: file.threshold_p,
    };
    model.check()?;
    Ok(model)
}
