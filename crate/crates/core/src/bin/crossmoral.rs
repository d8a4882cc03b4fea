use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crossmoral_core::corpus::{
    read_predictions, stratified_split, write_dataset, DataFormat, Dataset, Document,
    FoundationLabel,
};
use crossmoral_core::eval::{baseline_expected, evaluate, evaluate_binary, report, sample_mislabeled, ClassPrior, Scope};
use crossmoral_core::experiments::{
    curve_csv, emit_curve_jobs, ingest_curve, load_data, run, thresholds_markdown, write_atomic, CurveJobRequest,
    FineTuneJobSpec, JobTask, Rounds, RunConfig,
};
use crossmoral_core::llm::{block_on, default_cache_path, EndpointConfig, Translator};
use crossmoral_core::{Error, Result};

#[derive(Parser)]
#[command(name = "crossmoral", version, about = "Moral foundation measurement and benchmarking")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory or file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a benchmark with the configured approach and evaluate it.
    Score,
    /// Evaluate an exchange-format predictions file.
    Evaluate(EvaluateArgs),
    /// Expected metrics of a random labeler that follows the class prior.
    Baseline(BaselineArgs),
    /// Split a labeled dataset into stratified train and benchmark parts.
    Split(SplitArgs),
    /// Learning-curve job emission and ingestion.
    #[command(subcommand)]
    Curve(CurveCommand),
    /// Draw a random sample of misclassified records.
    SampleMislabeled(MislabelArgs),
    /// Machine-translate a dataset through a translation endpoint.
    Translate(TranslateArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    bench: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    language: Option<String>,
    /// Also report per-foundation binary metrics.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct BaselineArgs {
    /// Dataset whose class histogram is the prior.
    #[arg(long, conflicts_with = "counts")]
    bench: Option<PathBuf>,
    /// Explicit counts, e.g. care=27,fairness=12.
    #[arg(long, value_delimiter = ',')]
    counts: Vec<String>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    fraction: f64,
    #[arg(long)]
    language: Option<String>,
}

#[derive(Subcommand)]
enum CurveCommand {
    /// Write batch files and one fine-tune job spec per batch prefix.
    EmitJobs(EmitArgs),
    /// Evaluate per-job predictions into a learning curve.
    Ingest(IngestArgs),
}

#[derive(Args)]
struct EmitArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    bench: PathBuf,
    /// binary_per_foundation or multiclass_lora.
    #[arg(long)]
    task: JobTask,
    #[arg(long)]
    base_model: String,
    #[arg(long = "base-file")]
    base_files: Vec<PathBuf>,
    #[arg(long = "augment-file")]
    augmentation_files: Vec<PathBuf>,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    max_batches: Option<usize>,
    /// Extra seeds beyond --seed, one curve per seed.
    #[arg(long = "extra-seed")]
    extra_seeds: Vec<u64>,
    #[arg(long)]
    language: Option<String>,
}

#[derive(Args)]
struct IngestArgs {
    /// Directory of job spec JSON files.
    #[arg(long)]
    jobs: PathBuf,
    /// Directory of `<job_id>.jsonl` prediction files.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    bench: PathBuf,
    #[arg(long)]
    language: Option<String>,
}

#[derive(Args)]
struct MislabelArgs {
    #[arg(long)]
    bench: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(short = 'n', long, default_value_t = 100)]
    count: usize,
    /// Restrict to these gold labels.
    #[arg(long, value_delimiter = ',')]
    filter: Vec<FoundationLabel>,
    #[arg(long)]
    language: Option<String>,
}

#[derive(Args)]
struct TranslateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    source: String,
    #[arg(long)]
    target: String,
    /// Translation cache (JSONL); defaults to one next to the output.
    #[arg(long)]
    cache: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}

fn require<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required")))
}

fn dispatch(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Score => {
            let mut cfg = RunConfig::load(require(&cli.config, "config")?)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(o) = cli.out {
                cfg.out = o;
            }
            let out = run(&cfg)?;
            let rows: Vec<_> = out.reports.iter().map(|r| (cfg.run_name(), r)).collect();
            let rows: Vec<_> = rows.iter().map(|(n, r)| (n.as_str(), *r)).collect();
            print!("{}", report::reports_markdown(&rows));
            log::info!("outputs in {}", out.out_dir.display());
        }
        Command::Evaluate(a) => {
            let bench = load_data(&a.bench, None, a.language.as_deref())?;
            let preds = read_predictions(&a.predictions)?;
            let covered = evaluate(&bench, &preds, Scope::CoveredOnly)?;
            let all = evaluate(&bench, &preds, Scope::All)?;
            let name = file_stem(&a.predictions);
            let rows = [(name.as_str(), &covered), (name.as_str(), &all)];
            print!("{}", report::reports_markdown(&rows));
            let binary = if a.binary { Some(evaluate_binary(&bench, &preds)?) } else { None };
            if let Some(b) = &binary {
                print!("\n{}", report::binary_markdown(b));
            }
            if let Some(dir) = &cli.out {
                write_atomic(dir.join("report.csv"), report::reports_csv(&rows).as_bytes())?;
                write_atomic(dir.join("report.md"), report::reports_markdown(&rows).as_bytes())?;
                write_atomic(dir.join("report.json"), &serde_json::to_vec_pretty(&[&covered, &all])?)?;
                if let Some(b) = &binary {
                    write_atomic(dir.join("binary.csv"), report::binary_csv(b).as_bytes())?;
                }
            }
        }
        Command::Baseline(a) => {
            let (name, prior) = match (&a.bench, a.counts.is_empty()) {
                (Some(p), _) => {
                    let d = load_data(p, None, None)?;
                    (d.name().to_string(), ClassPrior::from_counts(d.class_counts())?)
                }
                (None, false) => ("counts".to_string(), ClassPrior::from_counts(&parse_counts(&a.counts)?)?),
                (None, true) => ("uniform".to_string(), ClassPrior::uniform()),
            };
            let r = baseline_expected(&prior);
            let rows = [(name.as_str(), &r)];
            print!("{}", report::reports_markdown(&rows));
            if let Some(dir) = &cli.out {
                write_atomic(dir.join("baseline.csv"), report::reports_csv(&rows).as_bytes())?;
            }
        }
        Command::Split(a) => {
            let d = load_data(&a.data, None, a.language.as_deref())?;
            let (train, bench) = stratified_split(&d, a.fraction, seed)?;
            let dir = require(&cli.out, "out")?;
            std::fs::create_dir_all(dir)?;
            for part in [&train, &bench] {
                write_dataset(part, dir.join(format!("{}.csv", part.name())), DataFormat::Csv)?;
            }
            log::info!("train {} / bench {} documents", train.len(), bench.len());
        }
        Command::Curve(CurveCommand::EmitJobs(a)) => {
            let train = load_data(&a.train, None, a.language.as_deref())?;
            let mut seeds = vec![seed];
            seeds.extend(a.extra_seeds);
            let req = CurveJobRequest {
                task: a.task,
                base_model: a.base_model,
                base_files: a.base_files,
                augmentation_files: a.augmentation_files,
                rounds: if a.sequential { Rounds::Sequential } else { Rounds::Merged },
                bench_path: a.bench,
                max_batches: a.max_batches,
                seeds,
                hyperparameters: None,
                out_dir: require(&cli.out, "out")?.clone(),
            };
            let e = emit_curve_jobs(&train, &req)?;
            println!("{} job specs written", e.jobs.len());
            for w in &e.warnings {
                println!("warning: {w}");
            }
        }
        Command::Curve(CurveCommand::Ingest(a)) => {
            let bench = load_data(&a.bench, None, a.language.as_deref())?;
            let jobs = files_with_ext(&a.jobs, "json")?
                .iter()
                .map(FineTuneJobSpec::load)
                .collect::<Result<Vec<_>>>()?;
            let preds = files_with_ext(&a.predictions, "jsonl")?;
            let ingest = ingest_curve(&jobs, &preds, &bench)?;
            let table = thresholds_markdown(&ingest);
            print!("{table}");
            if let Some(dir) = &cli.out {
                write_atomic(dir.join("curve.csv"), curve_csv(&ingest).as_bytes())?;
                write_atomic(dir.join("thresholds.md"), table.as_bytes())?;
                write_atomic(dir.join("thresholds.json"), &serde_json::to_vec_pretty(&ingest.thresholds)?)?;
            }
        }
        Command::SampleMislabeled(a) => {
            let bench = load_data(&a.bench, None, a.language.as_deref())?;
            let preds = read_predictions(&a.predictions)?;
            let filter: Option<BTreeSet<FoundationLabel>> =
                (!a.filter.is_empty()).then(|| a.filter.iter().copied().collect());
            let s = sample_mislabeled(&bench, &preds, a.count, filter.as_ref(), seed)?;
            if s.short {
                println!("warning: only {} mislabeled records available", s.available);
            }
            let mut buf = Vec::new();
            for (d, p) in &s.records {
                serde_json::to_writer(
                    &mut buf,
                    &serde_json::json!({ "id": d.id, "text": d.text, "gold": d.gold, "predicted": p.labels, "rationale": p.rationale }),
                )?;
                buf.push(b'\n');
            }
            match &cli.out {
                Some(p) => write_atomic(p, &buf)?,
                None => print!("{}", String::from_utf8_lossy(&buf)),
            }
        }
        Command::Translate(a) => {
            let cfg_path = require(&cli.config, "config")?;
            let text = std::fs::read_to_string(cfg_path)?;
            let endpoint: EndpointConfig = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            let out = require(&cli.out, "out")?;
            let dir = out.parent().unwrap_or(Path::new("."));
            let cache = a.cache.unwrap_or_else(|| default_cache_path(dir, &a.source, &a.target));
            let translator = Translator::new(endpoint)?.with_cache_file(cache)?;
            let data = load_data(&a.input, None, Some(&a.source))?;
            let texts: Vec<String> = data.documents().iter().map(|d| d.text.clone()).collect();
            let translated = block_on(translator.translate_batch(&texts, &a.source, &a.target))??;
            let mut docs: Vec<Document> = Vec::new();
            let mut dropped = 0;
            for (d, t) in data.documents().iter().zip(translated) {
                match t {
                    Some(t) => docs.push(Document {
                        text: t,
                        language: a.target.clone(),
                        tokens: None,
                        ..d.clone()
                    }),
                    None => dropped += 1,
                }
            }
            if dropped > 0 {
                log::warn!("{dropped} documents left untranslated and excluded");
            }
            let name = format!("{}-{}", data.name(), a.target);
            write_dataset(&Dataset::new(name, docs)?, out, DataFormat::from_path(out).unwrap_or(DataFormat::Csv))?;
        }
    }
    Ok(())
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    v.sort();
    Ok(v)
}

fn parse_counts(items: &[String]) -> Result<BTreeMap<FoundationLabel, usize>> {
    items
        .iter()
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected label=count, got {kv:?}")))?;
            let label: FoundationLabel = k
                .parse()
                .map_err(|e: crossmoral_core::corpus::ParseLabelError| Error::InvalidArgument(e.to_string()))?;
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad count in {kv:?}")))?;
            Ok((label, n))
        })
        .collect()
}
