//! Lenient evaluation protocol: coverage, accuracy and per-class F1, the
//! closed-form random baseline, learning curves and error sampling.

mod baseline;
mod binary;
mod curve;
mod metrics;
mod mislabel;
pub mod report;

pub use baseline::{baseline_expected, ClassPrior};
pub use binary::{binary_metrics, evaluate_binary, BinaryMetrics, BinaryReport};
pub use curve::{batches_to_threshold, batches_to_threshold_by, CurveMetric, CurvePoint, LearningCurve};
pub use metrics::{align, evaluate, lenient_match, ClassMetrics, Confusion, EvalReport, Scope, Tally};
pub use mislabel::{sample_mislabeled, MislabelSample};
