//! Subcommand implementations behind the thin clap surface in main.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context as _, Result};

use hcbench::annotate;
use hcbench::config::RunConfig;
use hcbench::corpus::{self, AbstractRecord, Label, Task, Variant};
use hcbench::datagen::{self, TextPair, VariantCache};
use hcbench::eval::experiment::{
    self, ac_samples, cc_samples, gold_map, group_map, Experiment, ExperimentOutput, Method,
};
use hcbench::eval::{self, reports, BoxplotSummary, RunSet, Stratum};
use hcbench::gateway::{
    default_log_path, Gateway, ProviderConfig, RunKey, TimestampSource,
};
use hcbench::hc;
use hcbench::prompts::GenerationKind;

use crate::{
    AnnotateArgs, Cli, ClassifyArgs, Command, EvalArgs, GenerateArgs, GlobalArgs, HcClassifyArgs,
    HcTrainArgs, HybridArgs, RankArgs, StabilityArgs,
};

pub async fn run(cli: Cli) -> Result<()> {
    let ctx = Context::build(cli.global)?;
    match cli.command {
        Command::Generate(args) => generate(&ctx, args).await,
        Command::Classify(args) => classify(&ctx, args).await,
        Command::HcTrain(args) => hc_train(&ctx, args),
        Command::HcClassify(args) => hc_classify(&ctx, args),
        Command::Hybrid(args) => hybrid(&ctx, args).await,
        Command::Eval(args) => eval_cmd(&ctx, args),
        Command::Agree(args) => agree(&ctx, args),
        Command::Stability(args) => stability(&ctx, args),
        Command::Rank(args) => rank(&ctx, args),
        Command::Annotate(args) => annotate_cmd(&ctx, args),
    }
}

struct Context {
    cfg: RunConfig,
    mock: bool,
}

impl Context {
    fn build(global: GlobalArgs) -> Result<Self> {
        let level = if global.verbose { "debug" } else { "warn" };
        let _ = env_logger::Builder::from_env(
            env_logger::Env::default().default_filter_or(level),
        )
        .try_init();

        let mut cfg = match &global.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = global.seed {
            cfg.seed = seed;
        }
        if let Some(out) = global.out {
            cfg.out_dir = out;
        }
        std::fs::create_dir_all(&cfg.out_dir)
            .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
        Ok(Context {
            cfg,
            mock: global.mock,
        })
    }

    fn out(&self) -> &Path {
        &self.cfg.out_dir
    }

    /// Mock runs also pin timestamps so repeated runs are byte-stable.
    /// Real providers fail here, before any request, when their
    /// credential environment variable is unset.
    fn gateway(&self, provider: Option<&str>) -> Result<Gateway> {
        if self.mock {
            return Ok(Gateway::new(ProviderConfig::mock())?
                .with_timestamps(TimestampSource::fixed_default()));
        }
        let provider_cfg = self.cfg.provider(provider)?.clone();
        Ok(Gateway::new(provider_cfg)?)
    }

    fn timestamps(&self) -> TimestampSource {
        if self.mock {
            TimestampSource::fixed_default()
        } else {
            TimestampSource::System
        }
    }

    fn run_id(&self, flag: Option<String>) -> String {
        flag.unwrap_or_else(|| self.cfg.run_id.clone())
    }
}

fn author_of(r: &AbstractRecord) -> String {
    r.author.clone()
}

fn id_of(r: &AbstractRecord) -> String {
    r.id.clone()
}

fn require_abstract_task(task: Task) -> Result<()> {
    if !task.is_authorship() {
        bail!("task {task} runs on citations; this command needs an abstract task (AC1 or AC2)");
    }
    Ok(())
}

fn report_split_warnings(warnings: &[corpus::SplitWarning]) {
    for w in warnings {
        eprintln!(
            "warning: author '{}' has only {} abstract(s); kept entirely in training",
            w.group, w.units
        );
    }
}

fn report_run(output: &ExperimentOutput, log_path: &Path, provider: &ProviderConfig) {
    let unparsed = output
        .records
        .iter()
        .filter(|r| r.predicted == Label::Unparsed)
        .count();
    let cost: f64 = output
        .records
        .iter()
        .map(|r| {
            r.prompt_tokens as f64 / 1000.0 * provider.price_in
                + r.completion_tokens as f64 / 1000.0 * provider.price_out
        })
        .sum();
    println!(
        "{} predictions ({} issued, {} resumed, {} unparsed), estimated cost {cost:.4} -> {}",
        output.records.len(),
        output.requests_issued,
        output.skipped,
        unparsed,
        log_path.display()
    );
}

fn parse_kinds(list: &str) -> Result<Vec<GenerationKind>> {
    let mut kinds = Vec::new();
    for part in list.split(',') {
        let kind = match part.trim() {
            "AI" | "ai" => GenerationKind::Ai,
            "humAI" | "humai" => GenerationKind::HumAi,
            other => bail!("unknown variant '{other}'; expected AI or humAI"),
        };
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        bail!("no variants requested");
    }
    Ok(kinds)
}

fn pair_up(records: &[AbstractRecord], variant: Variant) -> Vec<TextPair> {
    let hums: BTreeMap<&str, &str> = records
        .iter()
        .filter(|r| r.variant == Variant::Hum)
        .map(|r| (r.id.as_str(), r.text.as_str()))
        .collect();
    records
        .iter()
        .filter(|r| r.variant == variant)
        .filter_map(|r| {
            hums.get(r.id.as_str()).map(|hum| TextPair {
                id: r.id.clone(),
                hum_text: (*hum).to_string(),
                variant_text: r.text.clone(),
            })
        })
        .collect()
}

async fn generate(ctx: &Context, args: GenerateArgs) -> Result<()> {
    let kinds = parse_kinds(&args.kinds)?;
    let records = corpus::load_abstracts(&args.input)?;
    let hums: Vec<AbstractRecord> = records
        .iter()
        .filter(|r| r.variant == Variant::Hum)
        .cloned()
        .collect();
    if hums.is_empty() {
        bail!("{} contains no human-written abstracts", args.input.display());
    }

    let gateway = ctx.gateway(args.provider.as_deref())?;
    let cache_path = args
        .cache
        .unwrap_or_else(|| ctx.out().join("variant_cache.jsonl"));
    let mut cache = VariantCache::open(&cache_path)?;
    let corpus_records = datagen::generate_corpus(&hums, &kinds, &gateway, &mut cache).await?;

    let out_path = args.output.unwrap_or_else(|| ctx.out().join("corpus.jsonl"));
    corpus::save_jsonl(&out_path, &corpus_records)?;

    let mut summary = BTreeMap::new();
    for &kind in &kinds {
        let variant = kind.variant();
        let pairs = pair_up(&corpus_records, variant);
        let report = datagen::length_stats(&pairs);
        datagen::write_length_csv(&report, &ctx.out().join(format!("lengths_{variant}.csv")))?;
        summary.insert(
            variant.to_string(),
            serde_json::json!({
                "pairs": report.rows.len(),
                "correlation": report.correlation,
                "degenerate": report.degenerate,
            }),
        );
    }
    reports::write_json(&ctx.out().join("length_summary.json"), &summary)?;

    println!(
        "{} records ({} human abstracts, {} variant(s) each) -> {}",
        corpus_records.len(),
        hums.len(),
        kinds.len(),
        out_path.display()
    );
    Ok(())
}

async fn classify(ctx: &Context, args: ClassifyArgs) -> Result<()> {
    let gateway = ctx.gateway(args.provider.as_deref())?;
    let run_id = ctx.run_id(args.run_id);
    let key = RunKey {
        model_id: gateway.config().model_id.clone(),
        run_id: run_id.clone(),
        task: args.task,
    };
    let log_path = default_log_path(ctx.out(), &key);
    let exp = Experiment {
        task: args.task,
        method: Method::Llm,
        run_id,
        resume_log: log_path.clone(),
        examples: ctx.cfg.category_examples.clone(),
        timestamps: ctx.timestamps(),
        gateway: Some(&gateway),
    };
    let output = if args.task.is_authorship() {
        let records = corpus::load_abstracts(&args.input)?;
        exp.run_abstracts(None, &records, args.generator.as_deref())
            .await?
    } else {
        let instances = corpus::load_citations(&args.input)?;
        exp.run_citations(&instances).await?
    };
    report_run(&output, &log_path, gateway.config());
    Ok(())
}

fn hc_train(ctx: &Context, args: HcTrainArgs) -> Result<()> {
    require_abstract_task(args.task)?;
    let records = corpus::load_abstracts(&args.input)?;
    let train = match args.train_fraction {
        Some(f) => {
            let split = corpus::split_train_test(&records, f, ctx.cfg.seed, author_of, id_of)?;
            report_split_warnings(&split.warnings);
            let train_path = ctx.out().join(format!("train_{}.jsonl", args.task));
            let test_path = ctx.out().join(format!("test_{}.jsonl", args.task));
            corpus::save_jsonl(&train_path, &split.train)?;
            corpus::save_jsonl(&test_path, &split.test)?;
            println!(
                "split {} records into {} train / {} test -> {}, {}",
                records.len(),
                split.train.len(),
                split.test.len(),
                train_path.display(),
                test_path.display()
            );
            split.train
        }
        None => records,
    };
    let (model, _) = experiment::train_from_records(args.task, &train, args.generator.as_deref())?;
    let model_path = args
        .model
        .unwrap_or_else(|| ctx.out().join(format!("hc_model_{}.json", args.task)));
    hc::save_model(&model, &model_path)?;
    println!(
        "word model: {} of {} words selected ({} human-leaning, {} machine-leaning)",
        model.s1.len() + model.s2.len(),
        model.vocab.len(),
        model.s1.len(),
        model.s2.len(),
    );
    println!("saved -> {}", model_path.display());
    Ok(())
}

fn hc_classify(ctx: &Context, args: HcClassifyArgs) -> Result<()> {
    require_abstract_task(args.task)?;
    let model = hc::load_model(&args.model)?;
    let records = corpus::load_abstracts(&args.input)?;
    let samples = ac_samples(args.task, &records, args.generator.as_deref())?;
    let run_id = ctx.run_id(args.run_id);
    let predictions =
        experiment::classify_with_model(&model, &samples, args.task, &run_id, &ctx.timestamps())?;

    let key = RunKey {
        model_id: "hc".to_string(),
        run_id,
        task: args.task,
    };
    let out_path = default_log_path(ctx.out(), &key);
    corpus::save_jsonl(&out_path, &predictions)?;

    let gold = gold_map(&samples);
    let wrong = predictions
        .iter()
        .filter(|p| !p.predicted.agrees_with(gold[&p.sample_id]))
        .count();
    println!(
        "{} predictions, {} disagree with the input labels -> {}",
        predictions.len(),
        wrong,
        out_path.display()
    );
    Ok(())
}

async fn hybrid(ctx: &Context, args: HybridArgs) -> Result<()> {
    require_abstract_task(args.task)?;
    let records = corpus::load_abstracts(&args.input)?;
    let fraction = args.train_fraction.unwrap_or(ctx.cfg.train_fraction);
    let split = corpus::split_train_test(&records, fraction, ctx.cfg.seed, author_of, id_of)?;
    report_split_warnings(&split.warnings);

    let gateway = ctx.gateway(args.provider.as_deref())?;
    let run_id = ctx.run_id(args.run_id);
    let key = RunKey {
        model_id: format!("{}-hc", gateway.config().model_id),
        run_id: run_id.clone(),
        task: args.task,
    };
    let log_path = default_log_path(ctx.out(), &key);
    let exp = Experiment {
        task: args.task,
        method: Method::Hybrid,
        run_id,
        resume_log: log_path.clone(),
        examples: ctx.cfg.category_examples.clone(),
        timestamps: ctx.timestamps(),
        gateway: Some(&gateway),
    };
    let output = exp
        .run_abstracts(Some(&split.train), &split.test, args.generator.as_deref())
        .await?;

    if let Some(model) = &output.model {
        let model_path = ctx.out().join(format!("hc_model_{}_hybrid.json", args.task));
        hc::save_model(model, &model_path)?;
        println!(
            "word model: {} words selected -> {}",
            model.s1.len() + model.s2.len(),
            model_path.display()
        );
    }
    report_run(&output, &log_path, gateway.config());
    Ok(())
}

/// Gold labels come from the corpus files, predictions from run logs.
fn build_runset(args: &EvalArgs) -> Result<(RunSet, BTreeMap<String, String>)> {
    let samples = if args.task.is_authorship() {
        let records = corpus::load_abstracts(&args.gold)?;
        ac_samples(args.task, &records, args.generator.as_deref())?
    } else {
        let instances = corpus::load_citations(&args.gold)?;
        cc_samples(args.task, &instances)?
    };
    let mut set = RunSet::new(args.task, gold_map(&samples))?;
    for path in &args.predictions {
        let records = corpus::load_predictions(path)?;
        set.add_records(&records)?;
    }
    if set.runs.is_empty() {
        bail!(
            "no predictions for task {} in the given files",
            args.task
        );
    }
    Ok((set, group_map(&samples)))
}

fn run_label(key: &(String, String)) -> String {
    format!("{}/{}", key.0, key.1)
}

fn eval_cmd(ctx: &Context, args: EvalArgs) -> Result<()> {
    let (set, groups) = build_runset(&args)?;

    let mut rows = Vec::new();
    let mut per_group: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut boxplots: BTreeMap<String, BoxplotSummary> = BTreeMap::new();
    let mut stratum_rows: BTreeMap<String, BTreeMap<Stratum, f64>> = BTreeMap::new();

    let mean_error = eval::per_sample_mean_error(&set)?;
    let strata = eval::stratify_difficulty(&mean_error)?;

    for key in set.run_ids() {
        let preds = &set.runs[&key];
        let label = run_label(&key);
        rows.push(reports::ErrorRateRow {
            model_id: key.0.clone(),
            run_id: key.1.clone(),
            task: set.task,
            error: eval::error_rate(preds, &set.gold)?,
        });

        let by_group = eval::per_group_errors(preds, &set.gold, &groups)?;
        let values: Vec<f64> = by_group.values().copied().collect();
        boxplots.insert(label.clone(), eval::boxplot_summary(&values)?);
        per_group.insert(label.clone(), by_group);

        let mut by_stratum = BTreeMap::new();
        for stratum in [Stratum::Easy, Stratum::Medium, Stratum::Difficult] {
            let sub_gold: BTreeMap<String, Label> = set
                .gold
                .iter()
                .filter(|(id, _)| strata[*id] == stratum)
                .map(|(id, &l)| (id.clone(), l))
                .collect();
            if sub_gold.is_empty() {
                continue;
            }
            let sub_preds: BTreeMap<String, Label> = preds
                .iter()
                .filter(|(id, _)| sub_gold.contains_key(*id))
                .map(|(id, &l)| (id.clone(), l))
                .collect();
            by_stratum.insert(stratum, eval::error_rate(&sub_preds, &sub_gold)?);
        }
        stratum_rows.insert(label, by_stratum);
    }

    reports::write_error_rates_csv(&ctx.out().join("error_rates.csv"), &rows)?;
    reports::write_per_group_csv(&ctx.out().join("group_errors.csv"), &per_group)?;
    reports::write_boxplot_csv(&ctx.out().join("group_boxplots.csv"), &boxplots)?;
    reports::write_difficulty_csv(&ctx.out().join("difficulty.csv"), &mean_error, &strata)?;
    reports::write_stratum_errors_csv(&ctx.out().join("stratum_errors.csv"), &stratum_rows)?;

    println!(
        "task {}: {} samples, {} run(s)",
        set.task,
        set.gold.len(),
        set.runs.len()
    );
    for r in &rows {
        println!("  {}/{}  error {:.4}", r.model_id, r.run_id, r.error);
    }
    println!("reports -> {}", ctx.out().display());
    Ok(())
}

fn agree(ctx: &Context, args: EvalArgs) -> Result<()> {
    let (set, _) = build_runset(&args)?;
    let am = eval::agreement_matrix(&set)?;
    reports::write_agreement_csv(&ctx.out().join("agreement.csv"), &am)?;

    let labels: Vec<String> = am.keys.iter().map(run_label).collect();
    reports::write_json(
        &ctx.out().join("agreement.json"),
        &serde_json::json!({ "runs": labels, "matrix": am.matrix }),
    )?;

    let mut lowest: Option<(f64, usize, usize)> = None;
    for i in 0..am.keys.len() {
        for j in i + 1..am.keys.len() {
            let v = am.matrix[i][j];
            if lowest.is_none_or(|(best, _, _)| v < best) {
                lowest = Some((v, i, j));
            }
        }
    }
    if let Some((v, i, j)) = lowest {
        println!(
            "{} runs; lowest agreement {:.4} between {} and {}",
            am.keys.len(),
            v,
            labels[i],
            labels[j]
        );
    }
    println!("-> {}", ctx.out().join("agreement.csv").display());
    Ok(())
}

fn stability(ctx: &Context, args: StabilityArgs) -> Result<()> {
    let (set, _) = build_runset(&args.eval)?;
    let report = eval::stability_report(&set, &args.model_id)?;
    let csv_path = ctx
        .out()
        .join(format!("stability_{}.csv", args.model_id));
    reports::write_stability_csv(&csv_path, &report)?;
    println!(
        "{}: {} runs, error min {:.4} mean {:.4} max {:.4}",
        report.model_id,
        report.runs.len(),
        report.min_error,
        report.mean_error,
        report.max_error
    );
    for (a, b, agreement) in &report.pairwise {
        println!("  {a} vs {b}: agreement {agreement:.4}");
    }
    println!("-> {}", csv_path.display());
    Ok(())
}

fn read_error_table(path: &Path) -> Result<BTreeMap<Task, BTreeMap<String, f64>>> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{} lacks a '{}' column", path.display(), name))
    };
    let (ti, mi, ei) = (col("task")?, col("model_id")?, col("error")?);

    let mut out: BTreeMap<Task, BTreeMap<String, f64>> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let task: Task = record[ti]
            .parse()
            .map_err(|e: String| anyhow!("line {line}: {e}"))?;
        let model = record[mi].to_string();
        let error: f64 = record[ei]
            .parse()
            .with_context(|| format!("line {line}: bad error value '{}'", &record[ei]))?;
        if out.entry(task).or_default().insert(model.clone(), error).is_some() {
            bail!("line {line}: duplicate entry for {task} / {model}");
        }
    }
    if out.is_empty() {
        bail!("{} contains no error rows", path.display());
    }
    Ok(out)
}

fn rank(ctx: &Context, args: RankArgs) -> Result<()> {
    let errors = read_error_table(&args.errors)?;
    let table = eval::rank_methods(&errors)?;
    let csv_path = ctx.out().join("ranks.csv");
    reports::write_ranks_csv(&csv_path, &table)?;

    for (task, a, b) in &table.ties {
        eprintln!("note: {a} and {b} tie on {task} at full precision; ranked by name");
    }
    for task in &table.tasks {
        let row: Vec<String> = table
            .models
            .iter()
            .map(|m| format!("{m}={}", table.ranks[task][m]))
            .collect();
        println!("{task}: {}", row.join("  "));
    }
    let avg: Vec<String> = table
        .models
        .iter()
        .map(|m| format!("{m}={}", table.average[m]))
        .collect();
    println!("average: {}", avg.join("  "));
    println!("-> {}", csv_path.display());
    Ok(())
}

fn annotate_cmd(ctx: &Context, args: AnnotateArgs) -> Result<()> {
    let instances = corpus::load_citations(&args.input)?;
    let progress = args
        .progress
        .unwrap_or_else(|| ctx.out().join("annotation_progress.jsonl"));
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let outcome =
        annotate::run_annotation(&instances, &progress, &mut stdin.lock(), &mut stdout.lock())?;

    let out_path = args
        .output
        .unwrap_or_else(|| ctx.out().join("citations_labeled.jsonl"));
    corpus::save_jsonl(&out_path, &outcome.labeled)?;
    println!(
        "{} labeled, {} unsure, {} unanswered -> {}",
        outcome.labeled.len(),
        outcome.unsure.len(),
        outcome.remaining,
        out_path.display()
    );
    Ok(())
}
