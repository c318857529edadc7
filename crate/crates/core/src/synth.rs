//! Synthetic corpora with known ground truth, used to calibrate the
//! word-frequency classifier.
//!
//! Two generators live here. `planted_corpus` draws Poisson counts
//! over a fixed vocabulary where a few planted words carry a mean
//! shift between the classes. `separable_abstracts` builds abstract
//! records whose classes differ in exactly one word, so a correct
//! word model must reach error zero.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;

use crate::corpus::{AbstractRecord, Variant};
use crate::text_features::{Vocabulary, WordCountVector};

/// Parameters of the planted-signal generator.
#[derive(Debug, Clone)]
pub struct PlantedConfig {
    pub vocab_size: usize,
    /// Planted words per class; the total planted count is twice this.
    pub planted_per_class: usize,
    pub train_per_class: usize,
    pub holdout_per_class: usize,
    /// Poisson rate of unplanted words in both classes.
    pub base_rate: f64,
    /// Poisson rate of a planted word in the class it leans toward.
    pub planted_rate: f64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            vocab_size: 200,
            planted_per_class: 5,
            train_per_class: 100,
            holdout_per_class: 50,
            base_rate: 1.0,
            planted_rate: 3.0,
        }
    }
}

/// A drawn corpus plus the ground truth that produced it.
#[derive(Debug, Clone)]
pub struct PlantedCorpus {
    pub vocab: Vocabulary,
    /// Indices of words leaning toward class X (human side).
    pub planted_x: BTreeSet<usize>,
    /// Indices of words leaning toward class Y (machine side).
    pub planted_y: BTreeSet<usize>,
    pub train_x: Vec<WordCountVector>,
    pub train_y: Vec<WordCountVector>,
    pub holdout_x: Vec<WordCountVector>,
    pub holdout_y: Vec<WordCountVector>,
}

impl PlantedCorpus {
    pub fn planted(&self) -> BTreeSet<usize> {
        self.planted_x.union(&self.planted_y).copied().collect()
    }
}

/// Draw one corpus. Identical (seed, config) pairs reproduce the same
/// corpus bit for bit.
pub fn planted_corpus(seed: u64, cfg: &PlantedConfig) -> PlantedCorpus {
    assert!(cfg.vocab_size >= 2 * cfg.planted_per_class, "vocabulary too small");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let words: Vec<String> = (0..cfg.vocab_size).map(|j| format!("w{j:03}")).collect();
    let vocab = Vocabulary::from_sorted_words(words).expect("generated names are sorted");

    let mut placement: Vec<usize> = (0..cfg.vocab_size).collect();
    placement.shuffle(&mut rng);
    let planted_x: BTreeSet<usize> = placement[..cfg.planted_per_class].iter().copied().collect();
    let planted_y: BTreeSet<usize> = placement[cfg.planted_per_class..2 * cfg.planted_per_class]
        .iter()
        .copied()
        .collect();

    let base = Poisson::new(cfg.base_rate).expect("positive rate");
    let planted = Poisson::new(cfg.planted_rate).expect("positive rate");
    let draw = |leaning: &BTreeSet<usize>, rng: &mut ChaCha8Rng| {
        let counts = (0..cfg.vocab_size)
            .map(|j| {
                let dist = if leaning.contains(&j) { &planted } else { &base };
                dist.sample(rng) as u32
            })
            .collect();
        WordCountVector { counts }
    };

    let draw_class = |leaning: &BTreeSet<usize>, n: usize, rng: &mut ChaCha8Rng| {
        (0..n).map(|_| draw(leaning, rng)).collect::<Vec<_>>()
    };

    let train_x = draw_class(&planted_x, cfg.train_per_class, &mut rng);
    let train_y = draw_class(&planted_y, cfg.train_per_class, &mut rng);
    let holdout_x = draw_class(&planted_x, cfg.holdout_per_class, &mut rng);
    let holdout_y = draw_class(&planted_y, cfg.holdout_per_class, &mut rng);

    PlantedCorpus {
        vocab,
        planted_x,
        planted_y,
        train_x,
        train_y,
        holdout_x,
        holdout_y,
    }
}

const AUTHORS: [&str; 3] = ["ada", "ben", "cara"];

/// Abstract triplets whose machine variants differ from the human
/// originals in exactly one appended word. Every other word has equal
/// counts in both classes of a pair, so the planted word alone
/// separates them.
pub fn separable_abstracts(n_papers: usize, generator: &str, planted: &str) -> Vec<AbstractRecord> {
    let mut out = Vec::with_capacity(n_papers * 3);
    for i in 0..n_papers {
        let id = format!("sep{i:03}");
        let author = AUTHORS[i % AUTHORS.len()].to_string();
        let title = format!("Separable paper {i}");
        // repetition varies by paper but matches inside a pair
        let reps = 1 + i % 3;
        let base = "the method gives strong results on real data".repeat(reps);
        let hum_text = base.clone();
        let ai_text = format!("{base} {planted} {planted}");
        let humai_text = format!("{base} {planted}");

        let record = |variant: Variant, text: String, gen: Option<&str>| AbstractRecord {
            id: id.clone(),
            author: author.clone(),
            title: title.clone(),
            text,
            variant,
            generator: gen.map(String::from),
        };
        out.push(record(Variant::Hum, hum_text, None));
        out.push(record(Variant::Ai, ai_text, Some(generator)));
        out.push(record(Variant::HumAi, humai_text, Some(generator)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hc::hc_train;

    #[test]
    fn planted_corpus_shapes() {
        let cfg = PlantedConfig::default();
        let c = planted_corpus(7, &cfg);
        assert_eq!(c.vocab.len(), 200);
        assert_eq!(c.train_x.len(), 100);
        assert_eq!(c.train_y.len(), 100);
        assert_eq!(c.holdout_x.len(), 50);
        assert_eq!(c.holdout_y.len(), 50);
        assert_eq!(c.planted_x.len(), 5);
        assert_eq!(c.planted_y.len(), 5);
        assert!(c.planted_x.is_disjoint(&c.planted_y));
        assert!(c.train_x.iter().all(|v| v.len() == 200));
    }

    #[test]
    fn planted_corpus_is_seed_deterministic() {
        let cfg = PlantedConfig::default();
        let a = planted_corpus(11, &cfg);
        let b = planted_corpus(11, &cfg);
        assert_eq!(a.planted_x, b.planted_x);
        assert_eq!(a.train_x[0].counts, b.train_x[0].counts);
        assert_eq!(a.holdout_y[49].counts, b.holdout_y[49].counts);

        let c = planted_corpus(12, &cfg);
        assert!(
            a.planted_x != c.planted_x || a.train_x[0].counts != c.train_x[0].counts,
            "different seeds should differ somewhere"
        );
    }

    #[test]
    fn planted_signal_is_recoverable() {
        let cfg = PlantedConfig::default();
        let c = planted_corpus(3, &cfg);
        let model = hc_train(&c.vocab, &c.train_x, &c.train_y).unwrap();
        let recovered = model.selected().intersection(&c.planted()).count();
        assert!(recovered >= 8, "recovered only {recovered} of 10 planted words");
        // planted x-words lean human, y-words lean machine
        if let Some(j) = model.s1.intersection(&c.planted_y).next() {
            panic!("y-planted word {j} landed in s1");
        }
    }

    #[test]
    fn separable_abstracts_have_single_distinguishing_word() {
        let records = separable_abstracts(4, "mock", "delve");
        assert_eq!(records.len(), 12);
        for chunk in records.chunks(3) {
            let hum = &chunk[0];
            let ai = &chunk[1];
            let edited = &chunk[2];
            assert_eq!(hum.variant, Variant::Hum);
            assert!(!hum.text.contains("delve"));
            assert!(ai.text.starts_with(&hum.text));
            assert!(ai.text.contains("delve"));
            assert!(edited.text.contains("delve"));
            assert_eq!(ai.generator.as_deref(), Some("mock"));
            assert!(hum.generator.is_none());
        }
        assert_eq!(records, separable_abstracts(4, "mock", "delve"));
    }
}
