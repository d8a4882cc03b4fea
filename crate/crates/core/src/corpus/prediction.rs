use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::label::FoundationLabel;
use crate::error::{Error, Result};

/// One approach's output for one document, in the exchange format every
/// scorer, external classifier and the evaluator agree on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub doc_id: String,
    pub labels: BTreeSet<FoundationLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<BTreeMap<FoundationLabel, f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    pub approach: String,
}

impl Prediction {
    /// Builds a prediction, dropping `none`/`unknown` when a foundation is
    /// present and substituting `none` for an empty set.
    pub fn new(
        doc_id: impl Into<String>,
        labels: impl IntoIterator<Item = FoundationLabel>,
        approach: impl Into<String>,
    ) -> Self {
        Self {
            doc_id: doc_id.into(),
            labels: normalize_labels(labels),
            scores: None,
            rationale: None,
            approach: approach.into(),
        }
    }

    pub fn none(doc_id: impl Into<String>, approach: impl Into<String>) -> Self {
        Self::new(doc_id, [FoundationLabel::None], approach)
    }

    pub fn unknown(doc_id: impl Into<String>, approach: impl Into<String>) -> Self {
        Self::new(doc_id, [FoundationLabel::Unknown], approach)
    }

    pub fn with_scores(mut self, scores: BTreeMap<FoundationLabel, f64>) -> Self {
        self.scores = Some(scores);
        self
    }

    pub fn with_rationale(mut self, rationale: impl Into<String>) -> Self {
        self.rationale = Some(rationale.into());
        self
    }

    /// Foundation labels only (no `none`/`unknown`).
    pub fn foundations(&self) -> impl Iterator<Item = FoundationLabel> + '_ {
        self.labels.iter().copied().filter(|l| l.is_foundation())
    }

    /// True when at least one moral foundation label is present.
    pub fn is_covered(&self) -> bool {
        self.foundations().next().is_some()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidRecord {
            record: self.doc_id.clone(),
            reason: reason.to_string(),
        };
        if self.labels.is_empty() {
            return Err(invalid("empty label set"));
        }
        if self.labels.contains(&FoundationLabel::NonMoral) {
            return Err(invalid("nonmoral is a training label, not a prediction"));
        }
        let special = self
            .labels
            .iter()
            .filter(|l| matches!(l, FoundationLabel::None | FoundationLabel::Unknown))
            .count();
        if special > 0 && (self.is_covered() || special > 1) {
            return Err(invalid("none/unknown must be the only label"));
        }
        if let Some(scores) = &self.scores {
            if scores.values().any(|v| !v.is_finite()) {
                return Err(invalid("non-finite score"));
            }
        }
        Ok(())
    }
}

fn normalize_labels(
    labels: impl IntoIterator<Item = FoundationLabel>,
) -> BTreeSet<FoundationLabel> {
    let mut set: BTreeSet<_> = labels.into_iter().collect();
    if set.iter().any(|l| l.is_foundation()) {
        set.retain(|l| l.is_foundation());
    } else if set.contains(&FoundationLabel::Unknown) {
        set = BTreeSet::from([FoundationLabel::Unknown]);
    } else {
        set = BTreeSet::from([FoundationLabel::None]);
    }
    set
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_predictions_from(std::io::BufReader::new(file), &path.display().to_string())
}

/// Parses exchange JSONL, validating every record. Errors carry 1-based line
/// numbers.
pub fn read_predictions_from(reader: impl BufRead, origin: &str) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pred: Prediction =
            serde_json::from_str(&line).map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        pred.validate()
            .map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        out.push(pred);
    }
    Ok(out)
}

pub fn write_predictions(path: impl AsRef<Path>, preds: &[Prediction]) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_predictions_to(&mut file, preds)?;
    file.flush()?;
    Ok(())
}

pub fn write_predictions_to(mut w: impl Write, preds: &[Prediction]) -> Result<()> {
    for p in preds {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
