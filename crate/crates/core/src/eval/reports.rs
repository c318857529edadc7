//! CSV and JSON writers for the evaluation outputs. Every writer
//! emits rows in a deterministic order so repeated runs produce
//! byte-identical files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Task;

use super::{AgreementMatrix, BoxplotSummary, RankTable, StabilityReport, Stratum};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One overall error measurement.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRateRow {
    pub model_id: String,
    pub run_id: String,
    pub task: Task,
    pub error: f64,
}

fn open(path: &Path) -> Result<csv::Writer<File>, ReportError> {
    Ok(csv::Writer::from_path(path)?)
}

/// Shortest decimal form that round-trips.
fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_error_rates_csv(path: &Path, rows: &[ErrorRateRow]) -> Result<(), ReportError> {
    let mut w = open(path)?;
    w.write_record(["model_id", "run_id", "task", "error"])?;
    for r in rows {
        w.write_record([&r.model_id, &r.run_id, &r.task.to_string(), &num(r.error)])?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format per-group errors: one row per model and group.
pub fn write_per_group_csv(
    path: &Path,
    per_model: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<(), ReportError> {
    let mut w = open(path)?;
    w.write_record(["model_id", "group", "error"])?;
    for (model, groups) in per_model {
        for (group, err) in groups {
            w.write_record([model, group, &num(*err)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Five-number summaries, one row per model.
pub fn write_boxplot_csv(
    path: &Path,
    summaries: &BTreeMap<String, BoxplotSummary>,
) -> Result<(), ReportError> {
    let mut w = open(path)?;
    w.write_record(["model_id", "min", "q1", "median", "q3", "max"])?;
    for (model, s) in summaries {
        w.write_record([
            model,
            &num(s.min),
            &num(s.q1),
            &num(s.median),
            &num(s.q3),
            &num(s.max),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run_label(key: &(String, String)) -> String {
    format!("{}/{}", key.0, key.1)
}

/// Square agreement table with matching row and column order.
pub fn write_agreement_csv(path: &Path, am: &AgreementMatrix) -> Result<(), ReportError> {
    let mut w = open(path)?;
    let mut header = vec!["run".to_string()];
    header.extend(am.keys.iter().map(run_label));
    w.write_record(&header)?;
    for (i, key) in am.keys.iter().enumerate() {
        let mut row = vec![run_label(key)];
        row.extend(am.matrix[i].iter().map(|&v| num(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean error and stratum per sample.
pub fn write_difficulty_csv(
    path: &Path,
    mean_error: &BTreeMap<String, f64>,
    strata: &BTreeMap<String, Stratum>,
) -> Result<(), ReportError> {
    let mut w = open(path)?;
    w.write_record(["sample_id", "mean_error", "stratum"])?;
    for (id, err) in mean_error {
        let stratum = strata.get(id).map(|s| s.to_string()).unwrap_or_default();
        w.write_record([id, &num(*err), &stratum])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-model error inside each stratum, one model per row.
pub fn write_stratum_errors_csv(
    path: &Path,
    rows: &BTreeMap<String, BTreeMap<Stratum, f64>>,
) -> Result<(), ReportError> {
    let mut w = open(path)?;
    w.write_record(["model_id", "easy", "medium", "difficult"])?;
    for (model, by_stratum) in rows {
        let cell = |s: Stratum| {
            by_stratum
                .get(&s)
                .map(|&v| num(v))
                .unwrap_or_default()
        };
        w.write_record([
            model,
            &cell(Stratum::Easy),
            &cell(Stratum::Medium),
            &cell(Stratum::Difficult),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per run pair with both error rates and their agreement.
pub fn write_stability_csv(path: &Path, report: &StabilityReport) -> Result<(), ReportError> {
    let mut w = open(path)?;
    w.write_record(["model_id", "run_a", "run_b", "error_1", "error_2", "agreement"])?;
    let error_of = |run: &str| {
        report
            .runs
            .iter()
            .find(|(r, _)| r == run)
            .map(|&(_, e)| e)
            .expect("pairwise entries refer to listed runs")
    };
    for (a, b, agreement) in &report.pairwise {
        w.write_record([
            &report.model_id,
            a,
            b,
            &num(error_of(a)),
            &num(error_of(b)),
            &num(*agreement),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rank table: one row per task, models as columns, a final row of
/// average ranks.
pub fn write_ranks_csv(path: &Path, table: &RankTable) -> Result<(), ReportError> {
    let mut w = open(path)?;
    let mut header = vec!["task".to_string()];
    header.extend(table.models.iter().cloned());
    w.write_record(&header)?;
    for task in &table.tasks {
        let mut row = vec![task.to_string()];
        for model in &table.models {
            row.push(table.ranks[task][model].to_string());
        }
        w.write_record(&row)?;
    }
    let mut avg = vec!["Average".to_string()];
    for model in &table.models {
        avg.push(num(table.average[model]));
    }
    w.write_record(&avg)?;
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn read(path: &Path) -> String {
        std::fs::read_to_string(path).unwrap()
    }

    #[test]
    fn error_rates_layout() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("errors.csv");
        let rows = vec![ErrorRateRow {
            model_id: "m".into(),
            run_id: "r1".into(),
            task: Task::Ac1,
            error: 0.125,
        }];
        write_error_rates_csv(&path, &rows).unwrap();
        assert_eq!(read(&path), "model_id,run_id,task,error\nm,r1,AC1,0.125\n");
    }

    #[test]
    fn ranks_layout_matches_models_by_task() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("ranks.csv");
        let errors: BTreeMap<Task, BTreeMap<String, f64>> = [
            (
                Task::Ac1,
                [("a".to_string(), 0.1), ("b".to_string(), 0.2)].into(),
            ),
            (
                Task::Ac2,
                [("a".to_string(), 0.4), ("b".to_string(), 0.3)].into(),
            ),
        ]
        .into();
        let table = super::super::rank_methods(&errors).unwrap();
        write_ranks_csv(&path, &table).unwrap();
        let text = read(&path);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "task,a,b");
        assert_eq!(lines[1], "AC1,1,2");
        assert_eq!(lines[2], "AC2,2,1");
        assert_eq!(lines[3], "Average,1.5,1.5");
    }

    #[test]
    fn agreement_header_mirrors_rows() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("agreement.csv");
        let am = AgreementMatrix {
            keys: vec![
                ("m1".to_string(), "r".to_string()),
                ("m2".to_string(), "r".to_string()),
            ],
            matrix: vec![vec![1.0, 0.5], vec![0.5, 1.0]],
        };
        write_agreement_csv(&path, &am).unwrap();
        let text = read(&path);
        assert!(text.starts_with("run,m1/r,m2/r\n"));
        assert!(text.contains("m1/r,1,0.5\n"));
    }

    #[test]
    fn stability_rows_carry_both_errors() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("stability.csv");
        let report = StabilityReport {
            model_id: "m".into(),
            runs: vec![("r1".into(), 0.1), ("r2".into(), 0.2)],
            min_error: 0.1,
            mean_error: 0.15000000000000002,
            max_error: 0.2,
            pairwise: vec![("r1".into(), "r2".into(), 0.9)],
        };
        write_stability_csv(&path, &report).unwrap();
        let text = read(&path);
        assert_eq!(
            text,
            "model_id,run_a,run_b,error_1,error_2,agreement\nm,r1,r2,0.1,0.2,0.9\n"
        );
    }

    #[test]
    fn difficulty_and_stratum_tables() {
        let dir = TempDir::new().unwrap();
        let mean: BTreeMap<String, f64> = [("s1".to_string(), 0.0), ("s2".to_string(), 1.0)].into();
        let strata: BTreeMap<String, Stratum> = [
            ("s1".to_string(), Stratum::Easy),
            ("s2".to_string(), Stratum::Difficult),
        ]
        .into();
        let path = dir.path().join("difficulty.csv");
        write_difficulty_csv(&path, &mean, &strata).unwrap();
        assert!(read(&path).contains("s1,0,Easy\n"));

        let rows: BTreeMap<String, BTreeMap<Stratum, f64>> = [(
            "m".to_string(),
            [
                (Stratum::Easy, 0.05),
                (Stratum::Medium, 0.2),
                (Stratum::Difficult, 0.8),
            ]
            .into(),
        )]
        .into();
        let path = dir.path().join("strata.csv");
        write_stratum_errors_csv(&path, &rows).unwrap();
        assert!(read(&path).contains("m,0.05,0.2,0.8\n"));
    }

    #[test]
    fn json_writer_round_trips() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("summary.json");
        let value: BTreeMap<String, f64> = [("a".to_string(), 0.5)].into();
        write_json(&path, &value).unwrap();
        let text = read(&path);
        assert!(text.ends_with('\n'));
        let back: BTreeMap<String, f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, value);
    }

    #[test]
    fn boxplot_and_group_writers() {
        let dir = TempDir::new().unwrap();
        let summaries: BTreeMap<String, BoxplotSummary> = [(
            "m".to_string(),
            BoxplotSummary {
                min: 0.0,
                q1: 0.25,
                median: 0.5,
                q3: 0.75,
                max: 1.0,
            },
        )]
        .into();
        let path = dir.path().join("box.csv");
        write_boxplot_csv(&path, &summaries).unwrap();
        assert_eq!(
            read(&path),
            "model_id,min,q1,median,q3,max\nm,0,0.25,0.5,0.75,1\n"
        );

        let per_model: BTreeMap<String, BTreeMap<String, f64>> = [(
            "m".to_string(),
            [("ada".to_string(), 0.1), ("bob".to_string(), 0.3)].into(),
        )]
        .into();
        let path = dir.path().join("groups.csv");
        write_per_group_csv(&path, &per_model).unwrap();
        let text = read(&path);
        assert_eq!(
            text,
            "model_id,group,error\nm,ada,0.1\nm,bob,0.3\n"
        );
    }
}
