use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::output::write_atomic;
use crate::corpus::{make_batches, read_predictions, write_dataset, DataFormat, Dataset, FoundationLabel, REPORT_ORDER};
use crate::error::{Error, Result};
use crate::eval::{
    batches_to_threshold_by, evaluate, evaluate_binary, report, CurveMetric, CurvePoint, LearningCurve, Scope,
};

pub const LORA_SEED: u64 = 3047;
pub const THRESHOLDS: [f64; 2] = [0.70, 0.80];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobTask {
    BinaryPerFoundation,
    MulticlassLora,
}

impl JobTask {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BinaryPerFoundation => "binary_per_foundation",
            Self::MulticlassLora => "multiclass_lora",
        }
    }
}

impl std::str::FromStr for JobTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary_per_foundation" | "binary" => Ok(Self::BinaryPerFoundation),
            "multiclass_lora" | "lora" => Ok(Self::MulticlassLora),
            other => Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        }
    }
}

/// How the trainer should consume augmentation files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounds {
    /// Concatenate train and augmentation files into one corpus.
    #[default]
    Merged,
    /// Train on `train_files`, then continue on `augmentation_files`.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub epochs: u32,
    pub batch_size: u32,
    pub weight_decay: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup_steps: Option<u32>,
    pub max_seq_length: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantization: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapter_rank: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_modules: Option<Vec<String>>,
    /// Negatives per positive when under-sampling binary training data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undersample_ratio: Option<f64>,
    pub seed: u64,
}

impl Hyperparameters {
    pub fn binary(seed: u64) -> Self {
        Self {
            learning_rate: 2e-5,
            epochs: 3,
            batch_size: 16,
            weight_decay: 0.01,
            warmup_steps: Some(100),
            max_seq_length: 512,
            quantization: None,
            adapter_rank: None,
            target_modules: None,
            undersample_ratio: Some(1.0),
            seed,
        }
    }

    pub fn lora() -> Self {
        Self {
            learning_rate: 2e-5,
            epochs: 3,
            batch_size: 128,
            weight_decay: 0.01,
            warmup_steps: None,
            max_seq_length: 1024,
            quantization: Some("4bit".into()),
            adapter_rank: Some(16),
            target_modules: Some(
                ["q_proj", "k_proj", "v_proj", "o_proj", "gate_proj", "up_proj", "down_proj"]
                    .map(String::from)
                    .to_vec(),
            ),
            undersample_ratio: None,
            seed: LORA_SEED,
        }
    }

    pub fn for_task(task: JobTask, seed: u64) -> Self {
        match task {
            JobTask::BinaryPerFoundation => Self::binary(seed),
            JobTask::MulticlassLora => Self::lora(),
        }
    }

    pub fn validate(&self, task: JobTask) -> Result<()> {
        let missing = |field: &str| Err(Error::InvalidArgument(format!("{} job is missing {field}", task.as_str())));
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.batch_size == 0 || self.max_seq_length == 0 {
            return Err(Error::InvalidArgument("learning rate, epochs, batch size and max length must be positive".into()));
        }
        match task {
            JobTask::BinaryPerFoundation => {
                if self.warmup_steps.is_none() {
                    return missing("warmup_steps");
                }
                match self.undersample_ratio {
                    None => return missing("undersample_ratio"),
                    Some(r) if !(r > 0.0) => {
                        return Err(Error::InvalidArgument("undersample_ratio must be positive".into()))
                    }
                    _ => {}
                }
            }
            JobTask::MulticlassLora => {
                if self.quantization.is_none() {
                    return missing("quantization");
                }
                if self.adapter_rank.is_none() {
                    return missing("adapter_rank");
                }
                if self.target_modules.as_ref().is_none_or(|m| m.is_empty()) {
                    return missing("target_modules");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FineTuneJobSpec {
    pub job_id: String,
    pub base_model: String,
    pub task: JobTask,
    /// Ordered: base files first, then this job's batch files.
    pub train_files: Vec<PathBuf>,
    /// The incremental batch files, a suffix of `train_files`.
    pub batch_files: Vec<PathBuf>,
    #[serde(default)]
    pub augmentation_files: Vec<PathBuf>,
    #[serde(default)]
    pub rounds: Rounds,
    pub hyperparameters: Hyperparameters,
    pub batches_used: usize,
    pub predict_on: PathBuf,
    pub predictions_out: PathBuf,
}

impl FineTuneJobSpec {
    pub fn validate(&self) -> Result<()> {
        self.hyperparameters.validate(self.task)?;
        if self.batch_files.len() != self.batches_used {
            return Err(Error::InvalidArgument(format!(
                "job {}: batches_used {} but {} batch files",
                self.job_id,
                self.batches_used,
                self.batch_files.len()
            )));
        }
        if !self.train_files.ends_with(&self.batch_files) {
            return Err(Error::InvalidArgument(format!(
                "job {}: batch files are not the tail of train_files",
                self.job_id
            )));
        }
        if self.train_files.is_empty() {
            return Err(Error::InvalidArgument(format!("job {} has no training data", self.job_id)));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let spec: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPolicy {
    pub batch_size: usize,
    pub per_class_quota: Option<usize>,
}

impl BatchPolicy {
    pub fn for_task(task: JobTask) -> Self {
        match task {
            JobTask::BinaryPerFoundation => Self {
                batch_size: 100,
                per_class_quota: None,
            },
            JobTask::MulticlassLora => Self {
                batch_size: 50,
                per_class_quota: Some(10),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurveJobRequest {
    pub task: JobTask,
    pub base_model: String,
    /// English (or other) base training files shared by every job.
    pub base_files: Vec<PathBuf>,
    pub augmentation_files: Vec<PathBuf>,
    pub rounds: Rounds,
    pub bench_path: PathBuf,
    /// `None` uses every full batch the data supports.
    pub max_batches: Option<usize>,
    pub seeds: Vec<u64>,
    pub hyperparameters: Option<Hyperparameters>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct EmittedJobs {
    pub jobs: Vec<FineTuneJobSpec>,
    pub warnings: Vec<String>,
}

pub fn job_id(task: JobTask, seed: u64, k: usize) -> String {
    format!("{}-s{seed}-b{k:03}", task.as_str())
}

/// Draws incremental batches from `train` and writes one job spec per
/// prefix length: job k trains on the base files plus batches 1..=k.
/// Batch files go to `out/batches/s<seed>/`, specs to `out/jobs/`.
pub fn emit_curve_jobs(train: &Dataset, req: &CurveJobRequest) -> Result<EmittedJobs> {
    if req.seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let policy = BatchPolicy::for_task(req.task);
    let mut emitted = EmittedJobs::default();
    for &seed in &req.seeds {
        let mut batches = make_batches(train, policy.batch_size, policy.per_class_quota, seed)?;
        if let Some(want) = req.max_batches {
            if batches.len() < want {
                let msg = format!(
                    "seed {seed}: {} batches requested but the data supports only {}",
                    want,
                    batches.len()
                );
                log::warn!("{msg}");
                emitted.warnings.push(msg);
            }
            batches.truncate(want);
        }
        let batch_dir = req.out_dir.join("batches").join(format!("s{seed}"));
        std::fs::create_dir_all(&batch_dir)?;
        std::fs::create_dir_all(req.out_dir.join("predictions"))?;
        let mut batch_files = Vec::with_capacity(batches.len());
        for (k, b) in batches.iter().enumerate() {
            let p = batch_dir.join(format!("batch_{:03}.csv", k + 1));
            write_dataset(b, &p, DataFormat::Csv)?;
            batch_files.push(p);
        }
        let hp = req
            .hyperparameters
            .clone()
            .unwrap_or_else(|| Hyperparameters::for_task(req.task, seed));
        for k in 1..=batch_files.len() {
            let id = job_id(req.task, seed, k);
            let used = batch_files[..k].to_vec();
            let spec = FineTuneJobSpec {
                job_id: id.clone(),
                base_model: req.base_model.clone(),
                task: req.task,
                train_files: req.base_files.iter().cloned().chain(used.iter().cloned()).collect(),
                batch_files: used,
                augmentation_files: req.augmentation_files.clone(),
                rounds: req.rounds,
                hyperparameters: hp.clone(),
                batches_used: k,
                predict_on: req.bench_path.clone(),
                predictions_out: req.out_dir.join("predictions").join(format!("{id}.jsonl")),
            };
            spec.validate()?;
            let mut bytes = serde_json::to_vec_pretty(&spec)?;
            bytes.push(b'\n');
            write_atomic(req.out_dir.join("jobs").join(format!("{id}.json")), &bytes)?;
            emitted.jobs.push(spec);
        }
    }
    Ok(emitted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub metric: String,
    pub threshold: f64,
    pub batches: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveIngest {
    pub curve: LearningCurve,
    /// `batches_used` values whose prediction file is missing.
    pub gaps: Vec<usize>,
    pub thresholds: Vec<ThresholdRow>,
}

/// Evaluates one prediction file per job (matched by file stem = job id)
/// into a learning curve. Missing files become gaps; they are never
/// interpolated.
pub fn ingest_curve(jobs: &[FineTuneJobSpec], prediction_files: &[PathBuf], bench: &Dataset) -> Result<CurveIngest> {
    let mut by_id: HashMap<String, &PathBuf> = HashMap::new();
    for p in prediction_files {
        let stem = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", p.display())))?;
        if by_id.insert(stem.clone(), p).is_some() {
            return Err(Error::DuplicateId(stem));
        }
    }
    let mut ordered: Vec<&FineTuneJobSpec> = jobs.iter().collect();
    ordered.sort_by_key(|j| j.batches_used);
    if ordered.windows(2).any(|w| w[0].batches_used == w[1].batches_used) {
        return Err(Error::InvalidArgument(
            "jobs share a batches_used value; ingest one seed at a time".into(),
        ));
    }
    for id in by_id.keys() {
        if !jobs.iter().any(|j| &j.job_id == id) {
            log::warn!("prediction file {id} matches no job");
        }
    }
    let binary = jobs.iter().any(|j| j.task == JobTask::BinaryPerFoundation);
    let mut curve = LearningCurve::new(None);
    let mut gaps = Vec::new();
    for job in ordered {
        let Some(path) = by_id.get(&job.job_id) else {
            log::warn!("no predictions for job {}; curve gap at {}", job.job_id, job.batches_used);
            gaps.push(job.batches_used);
            continue;
        };
        let preds = read_predictions(path)?;
        let report = evaluate(bench, &preds, Scope::CoveredOnly)?;
        let binary = if binary { Some(evaluate_binary(bench, &preds)?) } else { None };
        curve.push(CurvePoint {
            batches_used: job.batches_used,
            report,
            binary,
        })?;
    }
    let mut metrics = vec![("fused".to_string(), CurveMetric::Fused)];
    if binary {
        metrics.push(("binary_average".into(), CurveMetric::BinaryAverage));
        metrics.extend(REPORT_ORDER.iter().map(|&f| (format!("binary_{f}"), CurveMetric::Binary(f))));
    }
    let mut thresholds = Vec::new();
    for (name, m) in metrics {
        for t in THRESHOLDS {
            let batches = if curve.is_empty() {
                None
            } else {
                batches_to_threshold_by(&curve, t, m)?
            };
            thresholds.push(ThresholdRow {
                metric: name.clone(),
                threshold: t,
                batches,
            });
        }
    }
    Ok(CurveIngest { curve, gaps, thresholds })
}

/// Curve as CSV for external plotting, one row per point plus gap rows
/// with empty metric cells.
pub fn curve_csv(ingest: &CurveIngest) -> String {
    let mut rows: BTreeMap<usize, String> = BTreeMap::new();
    for p in ingest.curve.points() {
        let r = &p.report;
        let mut line = format!("{}", p.batches_used);
        for f in REPORT_ORDER {
            line.push_str(&format!(",{:.6}", r.per_class[&f].f1));
        }
        line.push_str(&format!(
            ",{:.6},{:.6},{:.6},{:.6}",
            r.accuracy, r.coverage, r.f1_weighted, r.f1_macro
        ));
        match &p.binary {
            Some(b) => line.push_str(&format!(",{:.6}", b.average.f1_weighted)),
            None => line.push(','),
        }
        rows.insert(p.batches_used, line);
    }
    for &g in &ingest.gaps {
        rows.insert(g, format!("{g}{}", ",".repeat(report::COLUMNS.len() + 1)));
    }
    let mut out = String::from("batches_used");
    for c in report::COLUMNS {
        out.push(',');
        out.push_str(c);
    }
    out.push_str(",binary_Fw\n");
    for line in rows.values() {
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub fn thresholds_markdown(ingest: &CurveIngest) -> String {
    let mut out = String::from("| metric | F1 >= 0.70 | F1 >= 0.80 |\n|---|---|---|\n");
    let mut by_metric: Vec<(&str, [Option<usize>; 2])> = Vec::new();
    for row in &ingest.thresholds {
        let i = THRESHOLDS.iter().position(|&t| t == row.threshold).unwrap_or(0);
        match by_metric.iter_mut().find(|(m, _)| *m == row.metric) {
            Some((_, v)) => v[i] = row.batches,
            None => {
                let mut v = [None, None];
                v[i] = row.batches;
                by_metric.push((&row.metric, v));
            }
        }
    }
    let cell = |b: Option<usize>| b.map_or("-".to_string(), |b| b.to_string());
    for (m, v) in by_metric {
        out.push_str(&format!("| {m} | {} | {} |\n", cell(v[0]), cell(v[1])));
    }
    if !ingest.gaps.is_empty() {
        let gaps: Vec<String> = ingest.gaps.iter().map(|g| g.to_string()).collect();
        out.push_str(&format!("\nMissing predictions for batches: {}\n", gaps.join(", ")));
    }
    out
}

/// Foundation whose binary model reaches `threshold` last, if any.
pub fn slowest_foundation(ingest: &CurveIngest, threshold: f64) -> Option<(FoundationLabel, Option<usize>)> {
    REPORT_ORDER
        .iter()
        .map(|&f| {
            let b = ingest
                .thresholds
                .iter()
                .find(|r| r.metric == format!("binary_{f}") && r.threshold == threshold)
                .and_then(|r| r.batches);
            (f, b)
        })
        .max_by_key(|(_, b)| b.map_or(usize::MAX, |b| b))
}
