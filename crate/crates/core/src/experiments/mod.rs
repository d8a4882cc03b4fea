//! Configured runs, fine-tune job emission and learning-curve ingestion.

mod config;
mod jobs;
mod output;
mod run;

pub use config::{
    interpolate_env, Approach, DataConfig, EmbeddingConfig, ExchangeConfig, FrameAxisConfig, LexiconConfig, LlmConfig,
    RunConfig,
};
pub use jobs::{
    curve_csv, emit_curve_jobs, ingest_curve, job_id, slowest_foundation, thresholds_markdown, BatchPolicy, CurveIngest,
    CurveJobRequest, EmittedJobs, FineTuneJobSpec, Hyperparameters, JobTask, Rounds, ThresholdRow, LORA_SEED,
    THRESHOLDS,
};
pub use output::{sha256_bytes, sha256_file, write_atomic, InputDigest, Manifest, RunLock, Staging};
pub use run::{load_data, load_shots, run, RunOutput, MANIFEST_FILE, PREDICTIONS_FILE};
