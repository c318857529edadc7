//! Acceptance gate: nine criteria covering the selection oracle, the
//! synthetic recovery bound, symmetry, template bytes, table
//! reproduction, evaluation properties, the offline pipeline, batch
//! contracts, and hybrid wiring. One printed line per criterion.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use hcbench::corpus::{self, Label, Task};
use hcbench::eval::experiment::{ac_samples, gold_map, Experiment, Method};
use hcbench::eval::{self, RunSet, Stratum};
use hcbench::gateway::{
    BatchItem, Gateway, MockBehavior, MockProvider, ProviderConfig, RetryPolicy, RunKey,
    TimestampSource,
};
use hcbench::hc::{hc_classify, hc_train, hc_threshold, word_tests};
use hcbench::prompts::PromptTask;
use hcbench::synth::{planted_corpus, separable_abstracts, PlantedConfig};
use hcbench::text_features::{Vocabulary, WordCountVector};

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        base_delay_ms: 1,
        max_delay_ms: 4,
        jitter: false,
    }
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .expect("runtime builds")
}

// 1. Selection threshold equals exhaustive maximization.
fn criterion_threshold_oracle() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..1000u32 {
        let p = rng.gen_range(2..=50usize);
        let mut values: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
        // quantize some vectors so exact ties exercise the tie rule
        if trial.is_multiple_of(5) {
            for v in &mut values {
                *v = (*v * 10.0).round() / 10.0;
            }
        }
        if trial.is_multiple_of(7) {
            values[0] = 0.0;
            values[p - 1] = 1.0;
        }

        let got = hc_threshold(&values).map_err(err)?;

        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut best_j = 0usize;
        let mut best = f64::NEG_INFINITY;
        for j in 1..p {
            let frac = j as f64 / p as f64;
            let obj = (frac - sorted[j - 1]) / (frac * (1.0 - frac)).sqrt();
            if obj > best {
                best = obj;
                best_j = j;
            }
        }
        if got.j_star != best_j || got.threshold_p != sorted[best_j - 1] {
            return Err(format!(
                "trial {trial}: got j*={} cut={}, exhaustive j*={} cut={}",
                got.j_star,
                got.threshold_p,
                best_j,
                sorted[best_j - 1]
            ));
        }
    }
    let elapsed = start.elapsed();
    if elapsed.as_secs_f64() >= 10.0 {
        return Err(format!("took {elapsed:.2?}, bound is 10 s"));
    }
    Ok(format!("1000 vectors agree, {elapsed:.2?}"))
}

// 2. Planted-signal recovery on the declared generator.
fn criterion_planted_recovery() -> Result<String, String> {
    let cfg = PlantedConfig::default();
    let mut errors = Vec::new();
    let mut recalls = Vec::new();
    for seed in 0..20u64 {
        let corpus = planted_corpus(seed, &cfg);
        let model = hc_train(&corpus.vocab, &corpus.train_x, &corpus.train_y).map_err(err)?;

        let mut wrong = 0usize;
        for v in &corpus.holdout_x {
            if hc_classify(&model, v).map_err(err)?.label != Label::Hum {
                wrong += 1;
            }
        }
        for v in &corpus.holdout_y {
            if hc_classify(&model, v).map_err(err)?.label != Label::Ai {
                wrong += 1;
            }
        }
        let total = corpus.holdout_x.len() + corpus.holdout_y.len();
        errors.push(wrong as f64 / total as f64);

        let planted = corpus.planted();
        let hit = model.selected().intersection(&planted).count();
        recalls.push(hit as f64 / planted.len() as f64);
    }
    let mean_error = errors.iter().sum::<f64>() / errors.len() as f64;
    let mean_recall = recalls.iter().sum::<f64>() / recalls.len() as f64;
    if mean_error >= 0.15 {
        return Err(format!("mean holdout error {mean_error:.4}, bound is 0.15"));
    }
    if mean_recall < 0.80 {
        return Err(format!("mean planted recall {mean_recall:.4}, bound is 0.80"));
    }
    Ok(format!(
        "20 seeds, mean error {mean_error:.4}, mean recall {mean_recall:.2}"
    ))
}

// 3. Class swap flips decisions and swaps the word sets.
fn criterion_symmetry() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for trial in 0..100u32 {
        let p = rng.gen_range(3..=10usize);
        let words: Vec<String> = (0..p).map(|j| format!("w{j}")).collect();
        let vocab = Vocabulary::from_sorted_words(words).map_err(err)?;
        let draw_docs = |rng: &mut ChaCha8Rng, n: usize| -> Vec<WordCountVector> {
            (0..n)
                .map(|_| WordCountVector {
                    counts: (0..p).map(|_| rng.gen_range(0..6u32)).collect(),
                })
                .collect()
        };
        let n1 = rng.gen_range(3..=6usize);
        let n2 = rng.gen_range(3..=6usize);
        let x = draw_docs(&mut rng, n1);
        let y = draw_docs(&mut rng, n2);

        let tests = word_tests(&vocab, &x, &y).map_err(err)?;
        for t in &tests {
            if !(0.0..=1.0).contains(&t.p_value) {
                return Err(format!("trial {trial}: p-value {} outside [0,1]", t.p_value));
            }
        }

        let forward = hc_train(&vocab, &x, &y).map_err(err)?;
        let swapped = hc_train(&vocab, &y, &x).map_err(err)?;
        if forward.s1 != swapped.s2 || forward.s2 != swapped.s1 {
            return Err(format!("trial {trial}: word sets did not swap"));
        }
        if forward.s1.len() + forward.s2.len() != forward.j_star {
            return Err(format!(
                "trial {trial}: |S| = {} but j* = {}",
                forward.s1.len() + forward.s2.len(),
                forward.j_star
            ));
        }

        for _ in 0..3 {
            let v = WordCountVector {
                counts: (0..p).map(|_| rng.gen_range(0..6u32)).collect(),
            };
            let d1 = hc_classify(&forward, &v).map_err(err)?;
            let d2 = hc_classify(&swapped, &v).map_err(err)?;
            if d2.statistic != -d1.statistic {
                return Err(format!(
                    "trial {trial}: statistic {} did not negate to {}",
                    d1.statistic, d2.statistic
                ));
            }
            let flipped = match d1.label {
                Label::Hum => Label::Ai,
                _ => Label::Hum,
            };
            // a statistic of exactly zero goes to the machine side in
            // both orientations by the declared tie rule
            let expect = if d1.statistic == 0.0 { Label::Ai } else { flipped };
            if d2.label != expect {
                return Err(format!(
                    "trial {trial}: expected {expect:?} after swap, got {:?}",
                    d2.label
                ));
            }
        }
    }
    Ok("100 corpora, sets swap and decisions flip".to_string())
}

// 4. Template bodies match the golden files byte for byte.
fn criterion_golden_templates() -> Result<String, String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("templates");
    for task in PromptTask::ALL {
        let path = dir.join(task.golden_file());
        let golden = std::fs::read_to_string(&path)
            .map_err(|e| format!("missing golden file {}: {e}", path.display()))?;
        if task.body() != golden {
            return Err(format!("{:?} deviates from {}", task, path.display()));
        }
    }
    Ok("6 templates byte-exact".to_string())
}

// 5. Published error values reproduce the rank table exactly.
fn criterion_rank_reproduction() -> Result<String, String> {
    const CLAUDE: &str = "Claude-3.5-sonnet";
    const DEEPSEEK: &str = "DeepSeek-R1";
    const DEEPSEEK_V3: &str = "DeepSeek-V3";
    const GEMINI: &str = "Gemini-1.5-flash";
    const GPT: &str = "GPT-4o-mini";
    const LLAMA: &str = "Llama-3.1-8b";

    let table = |rows: &[(&str, f64)]| -> BTreeMap<String, f64> {
        rows.iter().map(|&(m, e)| (m.to_string(), e)).collect()
    };
    // the authorship errors carry four digits where the third-digit
    // values coincide
    let ac1 = table(&[
        (CLAUDE, 0.218),
        (DEEPSEEK, 0.286),
        (GEMINI, 0.468),
        (GPT, 0.5110),
        (LLAMA, 0.5105),
    ]);
    let ac2 = table(&[
        (CLAUDE, 0.435),
        (DEEPSEEK, 0.405),
        (GEMINI, 0.500),
        (GPT, 0.502),
        (LLAMA, 0.501),
    ]);
    let mut cc1 = table(&[
        (CLAUDE, 0.327),
        (DEEPSEEK_V3, 0.432),
        (DEEPSEEK, 0.380),
        (GEMINI, 0.347),
        (GPT, 0.363),
        (LLAMA, 0.576),
    ]);
    let mut cc2 = table(&[
        (CLAUDE, 0.261),
        (DEEPSEEK_V3, 0.332),
        (DEEPSEEK, 0.291),
        (GEMINI, 0.313),
        (GPT, 0.371),
        (LLAMA, 0.457),
    ]);
    // the published ranking uses the R1 runs for the citation tasks
    cc1.remove(DEEPSEEK_V3);
    cc2.remove(DEEPSEEK_V3);

    let mut errors = BTreeMap::new();
    errors.insert(Task::Ac1, ac1);
    errors.insert(Task::Ac2, ac2);
    errors.insert(Task::Cc1, cc1);
    errors.insert(Task::Cc2, cc2);

    let ranks = eval::rank_methods(&errors).map_err(err)?;
    if !ranks.ties.is_empty() {
        return Err(format!("unexpected ties: {:?}", ranks.ties));
    }

    let expected: [(Task, [(&str, usize); 5]); 4] = [
        (
            Task::Ac1,
            [(CLAUDE, 1), (DEEPSEEK, 2), (GEMINI, 3), (GPT, 5), (LLAMA, 4)],
        ),
        (
            Task::Ac2,
            [(CLAUDE, 2), (DEEPSEEK, 1), (GEMINI, 3), (GPT, 5), (LLAMA, 4)],
        ),
        (
            Task::Cc1,
            [(CLAUDE, 1), (DEEPSEEK, 4), (GEMINI, 2), (GPT, 3), (LLAMA, 5)],
        ),
        (
            Task::Cc2,
            [(CLAUDE, 1), (DEEPSEEK, 2), (GEMINI, 3), (GPT, 4), (LLAMA, 5)],
        ),
    ];
    for (task, row) in expected {
        for (model, rank) in row {
            let got = ranks.ranks[&task][model];
            if got != rank {
                return Err(format!("{task} {model}: rank {got}, published {rank}"));
            }
        }
    }

    let averages = [
        (CLAUDE, 1.25),
        (DEEPSEEK, 2.25),
        (GEMINI, 2.75),
        (GPT, 4.25),
        (LLAMA, 4.50),
    ];
    for (model, avg) in averages {
        let got = ranks.average[model];
        if got != avg {
            return Err(format!("{model}: average {got}, published {avg}"));
        }
    }
    Ok("4 task rows and 5 averages exact".to_string())
}

// 6. Agreement matrix and stratification invariants on random runs.
fn criterion_agreement_properties() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for trial in 0..100u32 {
        let n = rng.gen_range(1..=500usize);
        let gold: BTreeMap<String, Label> = (0..n)
            .map(|i| {
                let label = if rng.gen_bool(0.5) { Label::Hum } else { Label::Ai };
                (format!("s{i:03}"), label)
            })
            .collect();
        let mut set = RunSet::new(Task::Ac1, gold).map_err(err)?;
        let n_runs = rng.gen_range(2..=4usize);
        for r in 0..n_runs {
            let preds: BTreeMap<String, Label> = (0..n)
                .map(|i| {
                    let label = match rng.gen_range(0..10u32) {
                        0 => Label::Unparsed,
                        x if x < 6 => Label::Hum,
                        _ => Label::Ai,
                    };
                    (format!("s{i:03}"), label)
                })
                .collect();
            set.add_run("m", &format!("r{r}"), preds).map_err(err)?;
        }

        let am = eval::agreement_matrix(&set).map_err(err)?;
        let k = am.keys.len();
        for i in 0..k {
            if am.matrix[i][i] != 1.0 {
                return Err(format!("trial {trial}: diagonal entry {}", am.matrix[i][i]));
            }
            for j in 0..k {
                let v = am.matrix[i][j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("trial {trial}: entry {v} outside [0,1]"));
                }
                if am.matrix[i][j] != am.matrix[j][i] {
                    return Err(format!("trial {trial}: matrix not symmetric"));
                }
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                let e1 = eval::error_rate(&set.runs[&am.keys[i]], &set.gold).map_err(err)?;
                let e2 = eval::error_rate(&set.runs[&am.keys[j]], &set.gold).map_err(err)?;
                let bound = 1.0 - am.matrix[i][j];
                if (e1 - e2).abs() > bound + 1e-12 {
                    return Err(format!(
                        "trial {trial}: |{e1} - {e2}| exceeds 1 - agreement = {bound}"
                    ));
                }
            }
        }

        let mean_error = eval::per_sample_mean_error(&set).map_err(err)?;
        let strata = eval::stratify_difficulty(&mean_error).map_err(err)?;
        let count = |s: Stratum| strata.values().filter(|&&v| v == s).count();
        let edge = (0.3 * n as f64).floor() as usize;
        if count(Stratum::Easy) != edge
            || count(Stratum::Difficult) != edge
            || count(Stratum::Medium) != n - 2 * edge
        {
            return Err(format!(
                "trial {trial}: strata sizes {}/{}/{} for n = {n}",
                count(Stratum::Easy),
                count(Stratum::Medium),
                count(Stratum::Difficult)
            ));
        }
    }
    Ok("100 random run sets hold all invariants".to_string())
}

fn run_bin(args: &[&str]) -> Result<(), String> {
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_hcbench"))
        .args(args)
        .output()
        .map_err(err)?;
    if !output.status.success() {
        return Err(format!(
            "`hcbench {}` exited {:?}: {}",
            args.join(" "),
            output.status.code(),
            String::from_utf8_lossy(&output.stderr)
        ));
    }
    Ok(())
}

fn mock_pipeline(out_dir: &Path, fixture: &Path) -> Result<(), String> {
    let od = out_dir.to_str().unwrap();
    let fixture = fixture.to_str().unwrap();
    run_bin(&["--mock", "--seed", "11", "--out", od, "generate", "--input", fixture])?;
    let corpus = out_dir.join("corpus.jsonl");
    let corpus = corpus.to_str().unwrap();
    run_bin(&["--mock", "--seed", "11", "--out", od, "classify", "--input", corpus, "--task", "AC1"])?;
    run_bin(&[
        "--mock", "--seed", "11", "--out", od, "classify", "--input", corpus, "--task", "AC1",
        "--run-id", "r2",
    ])?;
    let p1 = out_dir.join("predictions_AC1_mock_r1.jsonl");
    let p2 = out_dir.join("predictions_AC1_mock_r2.jsonl");
    let (p1, p2) = (p1.to_str().unwrap(), p2.to_str().unwrap());
    run_bin(&[
        "--out", od, "eval", "--task", "AC1", "--gold", corpus, "--predictions", p1, p2,
    ])?;
    run_bin(&[
        "--out", od, "agree", "--task", "AC1", "--gold", corpus, "--predictions", p1, p2,
    ])?;
    Ok(())
}

fn dir_snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(err)? {
        let entry = entry.map_err(err)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let bytes = std::fs::read(entry.path()).map_err(err)?;
        out.insert(name, bytes);
    }
    Ok(out)
}

// 7. The offline pipeline is deterministic and fast.
fn criterion_mock_pipeline() -> Result<String, String> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/abstracts_30.jsonl");
    let start = Instant::now();
    let root = tempfile::tempdir().map_err(err)?;
    let dir_a = root.path().join("a");
    let dir_b = root.path().join("b");
    mock_pipeline(&dir_a, &fixture)?;
    mock_pipeline(&dir_b, &fixture)?;
    let elapsed = start.elapsed();

    let snap_a = dir_snapshot(&dir_a)?;
    let snap_b = dir_snapshot(&dir_b)?;
    let names_a: Vec<&String> = snap_a.keys().collect();
    let names_b: Vec<&String> = snap_b.keys().collect();
    if names_a != names_b {
        return Err(format!("file sets differ: {names_a:?} vs {names_b:?}"));
    }
    for (name, bytes) in &snap_a {
        if snap_b[name] != *bytes {
            return Err(format!("{name} differs between identical runs"));
        }
    }
    if elapsed.as_secs_f64() >= 60.0 {
        return Err(format!("took {elapsed:.2?}, bound is 60 s"));
    }
    Ok(format!(
        "{} files identical across runs, {elapsed:.2?}",
        snap_a.len()
    ))
}

// 8. Batch contracts under randomized failure scripts.
fn criterion_gateway_contracts() -> Result<String, String> {
    let rt = runtime();
    rt.block_on(async {
        let mut rng = ChaCha8Rng::seed_from_u64(808);
        let mut total_items = 0usize;
        for trial in 0..10u32 {
            let n = rng.gen_range(5..=30usize);
            total_items += n;
            let max_concurrent = rng.gen_range(1..=4usize);
            let fails: Vec<u32> = (0..n).map(|_| rng.gen_range(0..3u32)).collect();
            let garbage: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.2)).collect();

            let make_provider = |fails: Vec<u32>, garbage: Vec<bool>| {
                let attempts = Mutex::new(vec![0u32; fails.len()]);
                MockProvider::new(2, move |prompt: &str, _| {
                    let idx: usize = prompt
                        .split("item ")
                        .nth(1)
                        .and_then(|rest| rest.split(' ').next())
                        .and_then(|tok| tok.parse().ok())
                        .expect("prompt carries its item index");
                    let mut a = attempts.lock().unwrap();
                    a[idx] += 1;
                    if a[idx] <= fails[idx] {
                        MockBehavior::TransientFailure(format!("scripted failure {idx}"))
                    } else if garbage[idx] {
                        MockBehavior::Reply("no idea".to_string())
                    } else {
                        MockBehavior::Reply(
                            if idx.is_multiple_of(2) { "human" } else { "ChatGPT" }.to_string(),
                        )
                    }
                })
            };
            let parse = |raw: &str| match raw {
                "human" => Label::Hum,
                "ChatGPT" => Label::Ai,
                _ => Label::Unparsed,
            };

            let mut config = ProviderConfig::mock();
            config.max_concurrent = max_concurrent;
            config.max_retries = 3;
            let provider = Arc::new(make_provider(fails.clone(), garbage.clone()));
            let gateway = Gateway::with_provider(config.clone(), provider.clone())
                .map_err(err)?
                .with_retry_policy(fast_retry())
                .with_timestamps(TimestampSource::fixed_default());

            let items: Vec<BatchItem> = (0..n)
                .map(|i| BatchItem {
                    id: format!("s{i:03}"),
                    prompt: format!("item {i} needs a label"),
                })
                .collect();
            let dir = tempfile::tempdir().map_err(err)?;
            let log = dir.path().join("log.jsonl");
            let key = RunKey {
                model_id: "mock".to_string(),
                run_id: "r1".to_string(),
                task: Task::Ac1,
            };

            let first = gateway
                .run_batch(&key, &items, &log, parse)
                .await
                .map_err(err)?;
            if first.issued != n || first.skipped != 0 {
                return Err(format!(
                    "trial {trial}: issued {} skipped {} on a fresh log",
                    first.issued, first.skipped
                ));
            }
            let got_ids: Vec<&str> = first.records.iter().map(|r| r.sample_id.as_str()).collect();
            let want_ids: Vec<&str> = items.iter().map(|i| i.id.as_str()).collect();
            if got_ids != want_ids {
                return Err(format!("trial {trial}: output order broke: {got_ids:?}"));
            }
            if provider.max_in_flight() > max_concurrent {
                return Err(format!(
                    "trial {trial}: {} in flight with max_concurrent {max_concurrent}",
                    provider.max_in_flight()
                ));
            }
            for (i, record) in first.records.iter().enumerate() {
                let expect = if garbage[i] {
                    Label::Unparsed
                } else if i % 2 == 0 {
                    Label::Hum
                } else {
                    Label::Ai
                };
                if record.predicted != expect {
                    return Err(format!(
                        "trial {trial}: item {i} parsed {:?}, script says {expect:?}",
                        record.predicted
                    ));
                }
            }

            // full resume answers everything from the log
            let untouched = Arc::new(MockProvider::new(2, |_: &str, _| {
                MockBehavior::Reply("should never be called".to_string())
            }));
            let resumed_gateway = Gateway::with_provider(config.clone(), untouched.clone())
                .map_err(err)?
                .with_retry_policy(fast_retry())
                .with_timestamps(TimestampSource::fixed_default());
            let resumed = resumed_gateway
                .run_batch(&key, &items, &log, parse)
                .await
                .map_err(err)?;
            if resumed.issued != 0 || resumed.skipped != n || untouched.calls() != 0 {
                return Err(format!(
                    "trial {trial}: resume issued {} skipped {} calls {}",
                    resumed.issued,
                    resumed.skipped,
                    untouched.calls()
                ));
            }
            let resumed_labels: Vec<Label> = resumed.records.iter().map(|r| r.predicted).collect();
            let first_labels: Vec<Label> = first.records.iter().map(|r| r.predicted).collect();
            if resumed_labels != first_labels {
                return Err(format!("trial {trial}: resumed labels changed"));
            }

            // partial resume issues exactly the missing suffix
            let keep = rng.gen_range(0..n);
            let text = std::fs::read_to_string(&log).map_err(err)?;
            let prefix: Vec<&str> = text.lines().take(keep).collect();
            std::fs::write(&log, format!("{}\n", prefix.join("\n"))).map_err(err)?;
            if keep == 0 {
                std::fs::write(&log, "").map_err(err)?;
            }
            let partial_provider = Arc::new(make_provider(vec![0; n], garbage.clone()));
            let partial_gateway = Gateway::with_provider(config, partial_provider)
                .map_err(err)?
                .with_retry_policy(fast_retry())
                .with_timestamps(TimestampSource::fixed_default());
            let partial = partial_gateway
                .run_batch(&key, &items, &log, parse)
                .await
                .map_err(err)?;
            if partial.issued != n - keep || partial.skipped != keep {
                return Err(format!(
                    "trial {trial}: kept {keep} of {n}, but issued {} skipped {}",
                    partial.issued, partial.skipped
                ));
            }
            let partial_ids: Vec<&str> =
                partial.records.iter().map(|r| r.sample_id.as_str()).collect();
            if partial_ids != want_ids {
                return Err(format!("trial {trial}: partial resume order broke"));
            }
        }
        Ok(format!("10 scripted trials, {total_items} items"))
    })
}

/// Reply by the word table embedded in the prompt: whichever column
/// matches more tokens of the sample text wins, ties to human.
fn table_following_reply(prompt: &str) -> String {
    let table = prompt
        .split("Word More Common In\n")
        .nth(1)
        .and_then(|rest| rest.split("\n\nRespond").next())
        .unwrap_or("");
    let mut machine_words = Vec::new();
    let mut human_words = Vec::new();
    for line in table.lines() {
        if let Some(word) = line.strip_suffix(" ChatGPT") {
            machine_words.push(word);
        } else if let Some(word) = line.strip_suffix(" Human") {
            human_words.push(word);
        }
    }
    let text = prompt.rsplit("\n\nText: ").next().unwrap_or("");
    let hits = |words: &[&str]| {
        words
            .iter()
            .filter(|w| text.split_whitespace().any(|t| t == **w))
            .count()
    };
    if hits(&machine_words) > hits(&human_words) {
        "ChatGPT".to_string()
    } else {
        "human".to_string()
    }
}

// 9. On a one-word-separable corpus the word model alone reaches zero
// error, and the hybrid run with a table-following mock matches it
// with exactly one request per test sample.
fn criterion_hybrid_wiring() -> Result<String, String> {
    let rt = runtime();
    rt.block_on(async {
        let records = separable_abstracts(12, "scripted", "flibberwock");
        let split = corpus::split_train_test(
            &records,
            0.5,
            1,
            |r| r.author.clone(),
            |r| r.id.clone(),
        )
        .map_err(err)?;
        let test_samples = ac_samples(Task::Ac1, &split.test, None).map_err(err)?;
        let gold = gold_map(&test_samples);
        if test_samples.is_empty() {
            return Err("empty test split".to_string());
        }

        let dir = tempfile::tempdir().map_err(err)?;

        // the word model alone must separate the corpus first
        let hc_exp = Experiment {
            task: Task::Ac1,
            method: Method::Hc,
            run_id: "r1".to_string(),
            resume_log: dir.path().join("hc.jsonl"),
            examples: Default::default(),
            timestamps: TimestampSource::fixed_default(),
            gateway: None,
        };
        let hc_out = hc_exp
            .run_abstracts(Some(&split.train), &split.test, None)
            .await
            .map_err(err)?;
        let hc_wrong = hc_out
            .records
            .iter()
            .filter(|r| !r.predicted.agrees_with(gold[&r.sample_id]))
            .count();
        if hc_wrong != 0 || hc_out.requests_issued != 0 {
            return Err(format!(
                "word model got {hc_wrong} wrong with {} requests",
                hc_out.requests_issued
            ));
        }

        let provider = Arc::new(MockProvider::new(0, |prompt: &str, _| {
            MockBehavior::Reply(table_following_reply(prompt))
        }));
        let gateway = Gateway::with_provider(ProviderConfig::mock(), provider.clone())
            .map_err(err)?
            .with_retry_policy(fast_retry())
            .with_timestamps(TimestampSource::fixed_default());
        let hybrid_exp = Experiment {
            task: Task::Ac1,
            method: Method::Hybrid,
            run_id: "r1".to_string(),
            resume_log: dir.path().join("hybrid.jsonl"),
            examples: Default::default(),
            timestamps: TimestampSource::fixed_default(),
            gateway: Some(&gateway),
        };
        let hybrid_out = hybrid_exp
            .run_abstracts(Some(&split.train), &split.test, None)
            .await
            .map_err(err)?;

        let wrong = hybrid_out
            .records
            .iter()
            .filter(|r| !r.predicted.agrees_with(gold[&r.sample_id]))
            .count();
        if wrong != 0 {
            return Err(format!("hybrid got {wrong} of {} wrong", test_samples.len()));
        }
        if hybrid_out.requests_issued != test_samples.len()
            || provider.calls() as usize != test_samples.len()
        {
            return Err(format!(
                "{} samples but {} issued, {} provider calls",
                test_samples.len(),
                hybrid_out.requests_issued,
                provider.calls()
            ));
        }
        let model = hybrid_out.model.as_ref().ok_or("hybrid returned no model")?;
        let planted_selected = model
            .s2
            .iter()
            .any(|&j| model.vocab.word(j) == "flibberwock");
        if !planted_selected {
            return Err("planted word missing from the machine-leaning set".to_string());
        }
        Ok(format!(
            "error 0 both ways, {} requests for {} samples",
            hybrid_out.requests_issued,
            test_samples.len()
        ))
    })
}

#[test]
fn acceptance() {
    type Criterion = (u32, &'static str, fn() -> Result<String, String>);
    let criteria: [Criterion; 9] = [
        (1, "threshold oracle equivalence", criterion_threshold_oracle),
        (2, "planted-signal recovery", criterion_planted_recovery),
        (3, "class-swap symmetry", criterion_symmetry),
        (4, "golden templates", criterion_golden_templates),
        (5, "rank table reproduction", criterion_rank_reproduction),
        (6, "agreement and stratification", criterion_agreement_properties),
        (7, "offline pipeline determinism", criterion_mock_pipeline),
        (8, "batch gateway contracts", criterion_gateway_contracts),
        (9, "hybrid wiring", criterion_hybrid_wiring),
    ];

    let mut failures = Vec::new();
    for (number, name, check) in criteria {
        match check() {
            Ok(detail) => println!("criterion {number}: pass - {name} ({detail})"),
            Err(why) => {
                println!("criterion {number}: fail - {name}: {why}");
                failures.push(number);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
