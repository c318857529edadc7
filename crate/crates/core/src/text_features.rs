//! Tokenization, vocabulary construction, and word-count vectors.
//!
//! Tokens are maximal runs of alphabetic characters, lowercased.
//! Digits, punctuation, and whitespace all act as separators, so
//! "don't" tokenizes as ["don", "t"] and "state-of-the-art" as four
//! tokens. The vocabulary is the union of every token seen in the
//! training documents, with no frequency or stop-word filtering,
//! ordered lexicographically.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no tokens found in any training document")]
    EmptyVocabulary,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("vocabulary file {path} is not sorted or contains duplicates (line {line})")]
    Unsorted { path: String, line: usize },
}

/// Split text into lowercase alphabetic tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphabetic() {
            for lc in ch.to_lowercase() {
                current.push(lc);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// A fixed, lexicographically ordered word list with O(1) lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Build the vocabulary from training documents: the union of all
    /// tokens, sorted. Errors if no document yields any token.
    pub fn build<S: AsRef<str>>(docs: &[S]) -> Result<Self, FeatureError> {
        let mut set = BTreeSet::new();
        for doc in docs {
            for token in tokenize(doc.as_ref()) {
                set.insert(token);
            }
        }
        if set.is_empty() {
            return Err(FeatureError::EmptyVocabulary);
        }
        Ok(Self::from_sorted(set.into_iter().collect()))
    }

    /// Wrap an already sorted, duplicate-free word list.
    pub fn from_sorted_words(words: Vec<String>) -> Result<Self, FeatureError> {
        if words.is_empty() {
            return Err(FeatureError::EmptyVocabulary);
        }
        for pair in words.windows(2) {
            if pair[0] >= pair[1] {
                return Err(FeatureError::Unsorted {
                    path: "<memory>".to_string(),
                    line: 0,
                });
            }
        }
        Ok(Self::from_sorted(words))
    }

    fn from_sorted(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Vocabulary { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, j: usize) -> &str {
        &self.words[j]
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Save as plain text, one word per line, in vocabulary order.
    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        let file = File::create(path).map_err(|e| FeatureError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut w = BufWriter::new(file);
        for word in &self.words {
            writeln!(w, "{word}").map_err(|e| FeatureError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        }
        w.flush().map_err(|e| FeatureError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    /// Load a vocabulary saved by [`Vocabulary::save`]. The file must
    /// be strictly sorted with no duplicates.
    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let file = File::open(path).map_err(|e| FeatureError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let reader = BufReader::new(file);
        let mut words: Vec<String> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| FeatureError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            if line.is_empty() {
                continue;
            }
            if let Some(prev) = words.last() {
                if prev.as_str() >= line.as_str() {
                    return Err(FeatureError::Unsorted {
                        path: path.display().to_string(),
                        line: i + 1,
                    });
                }
            }
            words.push(line);
        }
        if words.is_empty() {
            return Err(FeatureError::EmptyVocabulary);
        }
        Ok(Self::from_sorted(words))
    }
}

/// Raw word counts over a fixed vocabulary. Out-of-vocabulary tokens
/// are dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordCountVector {
    pub counts: Vec<u32>,
}

impl WordCountVector {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total in-vocabulary token count.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}

/// Count vocabulary words in one document.
pub fn count_vector(doc: &str, vocab: &Vocabulary) -> WordCountVector {
    let mut counts = vec![0u32; vocab.len()];
    for token in tokenize(doc) {
        if let Some(j) = vocab.position(&token) {
            counts[j] += 1;
        }
    }
    WordCountVector { counts }
}

/// Count vectors for a batch of documents against one vocabulary.
pub fn count_matrix<S: AsRef<str>>(docs: &[S], vocab: &Vocabulary) -> Vec<WordCountVector> {
    docs.iter().map(|d| count_vector(d.as_ref(), vocab)).collect()
}
