use serde::{Deserialize, Serialize};

use super::binary::BinaryReport;
use super::metrics::EvalReport;
use crate::corpus::FoundationLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub batches_used: usize,
    pub report: EvalReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary: Option<BinaryReport>,
}

/// Which F1 a curve tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMetric {
    /// Weighted F1 of the fused five-way report.
    Fused,
    /// Mean of the five binary weighted F1 values.
    BinaryAverage,
    /// Binary weighted F1 of one foundation model.
    Binary(FoundationLabel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub foundation: Option<FoundationLabel>,
    points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn new(foundation: Option<FoundationLabel>) -> Self {
        Self {
            foundation,
            points: Vec::new(),
        }
    }

    /// Appends a point; `batches_used` must strictly increase.
    pub fn push(&mut self, point: CurvePoint) -> Result<()> {
        if let Some(last) = self.points.last() {
            if point.batches_used <= last.batches_used {
                return Err(Error::InvalidArgument(format!(
                    "batches_used {} does not follow {}",
                    point.batches_used, last.batches_used
                )));
            }
        }
        self.points.push(point);
        Ok(())
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The tracked F1 at each point; `None` where a binary metric is
    /// requested but the point has no binary report.
    pub fn series(&self, metric: CurveMetric) -> Vec<(usize, Option<f64>)> {
        self.points
            .iter()
            .map(|p| {
                let v = match metric {
                    CurveMetric::Fused => Some(p.report.f1_weighted),
                    CurveMetric::BinaryAverage => p.binary.as_ref().map(|b| b.average.f1_weighted),
                    CurveMetric::Binary(f) => p
                        .binary
                        .as_ref()
                        .and_then(|b| b.per_foundation.get(&f))
                        .map(|m| m.f1_weighted),
                };
                (p.batches_used, v)
            })
            .collect()
    }

    fn default_metric(&self) -> CurveMetric {
        match self.foundation {
            Some(f) => CurveMetric::Binary(f),
            None => CurveMetric::Fused,
        }
    }
}

/// Smallest `batches_used` whose weighted F1 reaches `threshold` (first
/// crossing, even if the curve later dips). Per-foundation curves use that
/// foundation's binary weighted F1.
pub fn batches_to_threshold(curve: &LearningCurve, threshold: f64) -> Result<Option<usize>> {
    batches_to_threshold_by(curve, threshold, curve.default_metric())
}

pub fn batches_to_threshold_by(curve: &LearningCurve, threshold: f64, metric: CurveMetric) -> Result<Option<usize>> {
    if curve.is_empty() {
        return Err(Error::InvalidArgument("empty learning curve".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0, 1)")));
    }
    Ok(curve
        .series(metric)
        .into_iter()
        .find(|(_, v)| v.is_some_and(|v| v >= threshold))
        .map(|(b, _)| b))
}
