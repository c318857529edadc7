//! Line-based annotation loop for citation instances.
//!
//! Answers land in a progress file after every keystroke, so an
//! interrupted session resumes at the first unanswered instance.
//! Unsure answers are logged but excluded from the labeled corpus.
//! Input and output are plain streams, which keeps the loop
//! scriptable in tests.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CitationInstance, Label4};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("progress file {path} line {line}: {message}")]
    Progress {
        path: String,
        line: usize,
        message: String,
    },
    #[error("terminal: {0}")]
    Terminal(#[from] std::io::Error),
}

/// One persisted answer. `answer` is a label code or "u".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProgressEntry {
    pub id: String,
    pub answer: String,
}

/// What a finished (or interrupted) session hands back.
#[derive(Debug)]
pub struct AnnotationOutcome {
    /// Instances with a definite label, embedded or answered, with
    /// the 2-class label filled in by the merge rule.
    pub labeled: Vec<CitationInstance>,
    /// Ids answered unsure.
    pub unsure: Vec<String>,
    /// Instances still without any answer.
    pub remaining: usize,
}

fn parse_answer(key: &str) -> Option<ProgressAnswer> {
    match key {
        "1" => Some(ProgressAnswer::Label(Label4::Fi)),
        "2" => Some(ProgressAnswer::Label(Label4::Tb)),
        "3" => Some(ProgressAnswer::Label(Label4::Bg)),
        "4" => Some(ProgressAnswer::Label(Label4::Cp)),
        "u" => Some(ProgressAnswer::Unsure),
        "skip" => Some(ProgressAnswer::Skip),
        "quit" => Some(ProgressAnswer::Quit),
        _ => None,
    }
}

enum ProgressAnswer {
    Label(Label4),
    Unsure,
    Skip,
    Quit,
}

fn answer_code(a: &ProgressAnswer) -> Option<&'static str> {
    match a {
        ProgressAnswer::Label(Label4::Fi) => Some("FI"),
        ProgressAnswer::Label(Label4::Tb) => Some("TB"),
        ProgressAnswer::Label(Label4::Bg) => Some("BG"),
        ProgressAnswer::Label(Label4::Cp) => Some("CP"),
        ProgressAnswer::Unsure => Some("u"),
        ProgressAnswer::Skip | ProgressAnswer::Quit => None,
    }
}

fn code_to_label(code: &str) -> Option<Label4> {
    match code {
        "FI" => Some(Label4::Fi),
        "TB" => Some(Label4::Tb),
        "BG" => Some(Label4::Bg),
        "CP" => Some(Label4::Cp),
        _ => None,
    }
}

fn io_err(path: &Path, source: std::io::Error) -> AnnotateError {
    AnnotateError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Load all persisted answers; later entries for an id win.
pub fn load_progress(path: &Path) -> Result<BTreeMap<String, String>, AnnotateError> {
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ProgressEntry =
            serde_json::from_str(line).map_err(|e| AnnotateError::Progress {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
        out.insert(entry.id, entry.answer);
    }
    Ok(out)
}

fn append_progress(path: &Path, entry: &ProgressEntry) -> Result<(), AnnotateError> {
    use std::io::Write as _;
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    let line = serde_json::to_string(entry).expect("progress entry serializes");
    writeln!(file, "{line}").map_err(|e| io_err(path, e))?;
    file.sync_data().map_err(|e| io_err(path, e))?;
    Ok(())
}

const MENU: &str = "[1] Fundamental idea  [2] Technical basis  [3] Background  [4] Comparison  [u] unsure  [skip] later  [quit] stop";

/// Present every unanswered instance, persist each answer as it is
/// given, and return the labeled corpus assembled from all sessions.
pub fn run_annotation<R: BufRead, W: Write>(
    instances: &[CitationInstance],
    progress_path: &Path,
    input: &mut R,
    output: &mut W,
) -> Result<AnnotationOutcome, AnnotateError> {
    let mut answers = load_progress(progress_path)?;

    'outer: for inst in instances {
        if answers.contains_key(&inst.id) || inst.label4.is_some() {
            continue;
        }
        let marker = format!("[[{}]]", inst.ref_key);
        let shown = if inst.text.contains(&marker) {
            inst.text.clone()
        } else {
            inst.text.replace(&inst.ref_key, &marker)
        };
        writeln!(output, "\n{}\n{shown}", inst.id)?;
        writeln!(output, "{MENU}")?;
        loop {
            write!(output, "> ")?;
            output.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                // input exhausted; stop as if quit
                break 'outer;
            }
            let key = line.trim().to_lowercase();
            match parse_answer(&key) {
                Some(ProgressAnswer::Quit) => break 'outer,
                Some(ProgressAnswer::Skip) => break,
                Some(answer) => {
                    let code = answer_code(&answer).expect("label or unsure");
                    let entry = ProgressEntry {
                        id: inst.id.clone(),
                        answer: code.to_string(),
                    };
                    append_progress(progress_path, &entry)?;
                    answers.insert(entry.id, entry.answer);
                    break;
                }
                None => {
                    writeln!(output, "unrecognized answer; use 1, 2, 3, 4, u, skip, or quit")?;
                }
            }
        }
    }

    let mut labeled = Vec::new();
    let mut unsure = Vec::new();
    let mut remaining = 0usize;
    for inst in instances {
        match answers.get(&inst.id).map(String::as_str) {
            Some("u") => unsure.push(inst.id.clone()),
            Some(code) => {
                let label4 = code_to_label(code).ok_or_else(|| AnnotateError::Progress {
                    path: progress_path.display().to_string(),
                    line: 0,
                    message: format!("unknown answer code '{code}' for {}", inst.id),
                })?;
                let mut done = inst.clone();
                done.label4 = Some(label4);
                done.label2 = Some(label4.merge());
                labeled.push(done);
            }
            None => {
                if let Some(l4) = inst.label4 {
                    let mut done = inst.clone();
                    done.label2 = Some(done.label2.unwrap_or_else(|| l4.merge()));
                    labeled.push(done);
                } else {
                    remaining += 1;
                }
            }
        }
    }

    Ok(AnnotationOutcome {
        labeled,
        unsure,
        remaining,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label2;
    use std::io::Cursor;
    use tempfile::TempDir;

    fn inst(id: &str) -> CitationInstance {
        CitationInstance {
            id: id.to_string(),
            text: format!("as shown by Doe (1999), instance {id} follows"),
            ref_key: "Doe (1999)".to_string(),
            label4: None,
            label2: None,
            annotator_note: None,
        }
    }

    fn run(
        instances: &[CitationInstance],
        progress: &Path,
        script: &str,
    ) -> (AnnotationOutcome, String) {
        let mut input = Cursor::new(script.to_string());
        let mut output = Vec::new();
        let outcome = run_annotation(instances, progress, &mut input, &mut output).unwrap();
        (outcome, String::from_utf8(output).unwrap())
    }

    #[test]
    fn label_and_unsure() {
        let dir = TempDir::new().unwrap();
        let progress = dir.path().join("progress.jsonl");
        let instances = vec![inst("c1"), inst("c2")];
        let (outcome, shown) = run(&instances, &progress, "1\nu\n");
        assert_eq!(outcome.labeled.len(), 1);
        assert_eq!(outcome.labeled[0].label4, Some(Label4::Fi));
        assert_eq!(outcome.labeled[0].label2, Some(Label2::S));
        assert_eq!(outcome.unsure, vec!["c2"]);
        assert_eq!(outcome.remaining, 0);
        assert!(shown.contains("[[Doe (1999)]]"), "ref key must be highlighted");

        let text = std::fs::read_to_string(&progress).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"answer\":\"FI\""));
        assert!(text.contains("\"answer\":\"u\""));
    }

    #[test]
    fn invalid_keys_reprompt() {
        let dir = TempDir::new().unwrap();
        let progress = dir.path().join("progress.jsonl");
        let instances = vec![inst("c1")];
        let (outcome, shown) = run(&instances, &progress, "9\nx\n2\n");
        assert_eq!(outcome.labeled[0].label4, Some(Label4::Tb));
        assert_eq!(shown.matches("unrecognized answer").count(), 2);
    }

    #[test]
    fn skip_defers_without_persisting() {
        let dir = TempDir::new().unwrap();
        let progress = dir.path().join("progress.jsonl");
        let instances = vec![inst("c1"), inst("c2")];
        let (outcome, _) = run(&instances, &progress, "skip\n3\n");
        assert_eq!(outcome.remaining, 1);
        assert_eq!(outcome.labeled.len(), 1);
        assert_eq!(outcome.labeled[0].id, "c2");
        let text = std::fs::read_to_string(&progress).unwrap();
        assert_eq!(text.lines().count(), 1, "skip writes nothing");
    }

    #[test]
    fn resume_presents_only_unanswered() {
        let dir = TempDir::new().unwrap();
        let progress = dir.path().join("progress.jsonl");
        let instances = vec![inst("c1"), inst("c2"), inst("c3")];

        let (outcome, _) = run(&instances, &progress, "1\nquit\n");
        assert_eq!(outcome.labeled.len(), 1);
        assert_eq!(outcome.remaining, 2);

        let (outcome, shown) = run(&instances, &progress, "3\n4\n");
        assert!(!shown.contains("\nc1\n"), "answered instance must not reappear");
        assert!(shown.contains("c2"));
        assert!(shown.contains("c3"));
        assert_eq!(outcome.labeled.len(), 3);
        assert_eq!(outcome.remaining, 0);
        let labels: Vec<Option<Label4>> = outcome.labeled.iter().map(|i| i.label4).collect();
        assert_eq!(
            labels,
            vec![Some(Label4::Fi), Some(Label4::Bg), Some(Label4::Cp)]
        );
    }

    #[test]
    fn input_exhaustion_acts_like_quit() {
        let dir = TempDir::new().unwrap();
        let progress = dir.path().join("progress.jsonl");
        let instances = vec![inst("c1"), inst("c2")];
        let (outcome, _) = run(&instances, &progress, "4\n");
        assert_eq!(outcome.labeled.len(), 1);
        assert_eq!(outcome.remaining, 1);
        // the answer given before the interruption is already on disk
        let persisted = load_progress(&progress).unwrap();
        assert_eq!(persisted.get("c1").map(String::as_str), Some("CP"));
    }

    #[test]
    fn embedded_labels_pass_through() {
        let dir = TempDir::new().unwrap();
        let progress = dir.path().join("progress.jsonl");
        let mut pre = inst("c0");
        pre.label4 = Some(Label4::Tb);
        let instances = vec![pre, inst("c1")];
        let (outcome, shown) = run(&instances, &progress, "1\n");
        assert!(!shown.contains("\nc0\n"), "already labeled instances are not re-asked");
        assert_eq!(outcome.labeled.len(), 2);
        assert_eq!(outcome.labeled[0].label2, Some(Label2::S), "merge fills label2");
    }

    #[test]
    fn paper_scale_bookkeeping() {
        let dir = TempDir::new().unwrap();
        let progress = dir.path().join("progress.jsonl");
        let instances: Vec<CitationInstance> =
            (0..300).map(|i| inst(&format!("c{i:03}"))).collect();
        // every 15th answer is unsure
        let script: String = (0..300)
            .map(|i| if i % 15 == 0 { "u\n" } else { "2\n" })
            .collect();
        let (outcome, _) = run(&instances, &progress, &script);
        assert_eq!(outcome.unsure.len(), 20);
        assert_eq!(outcome.labeled.len(), 280);
        assert_eq!(outcome.remaining, 0);
    }
}
