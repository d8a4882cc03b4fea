//! Per-foundation binary evaluation: each foundation is scored as its own
//! "0"/"1" problem (gold == f vs. f in predicted labels).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{align, f1};
use crate::corpus::{Dataset, FoundationLabel, Prediction, FOUNDATIONS};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    /// F1 of the negative class ("0" row).
    pub f1_negative: f64,
    /// F1 of the positive class ("1" row).
    pub f1_positive: f64,
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub support_negative: usize,
    pub support_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryReport {
    pub per_foundation: BTreeMap<FoundationLabel, BinaryMetrics>,
    /// Column means over the five foundations.
    pub average: BinaryMetrics,
}

pub fn binary_metrics(pairs: &[(bool, bool)]) -> BinaryMetrics {
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for &(gold, pred) in pairs {
        match (gold, pred) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let f1_positive = f1(ratio(tp, tp + fp), ratio(tp, tp + fn_));
    let f1_negative = f1(ratio(tn, tn + fn_), ratio(tn, tn + fp));
    let (pos, neg) = (tp + fn_, tn + fp);
    let n = pos + neg;
    BinaryMetrics {
        f1_negative,
        f1_positive,
        accuracy: ratio(tp + tn, n),
        f1_macro: (f1_negative + f1_positive) / 2.0,
        f1_weighted: if n == 0 { 0.0 } else { (f1_negative * neg as f64 + f1_positive * pos as f64) / n as f64 },
        support_negative: neg,
        support_positive: pos,
    }
}

/// Every document is in scope; a prediction without foundation `f` (including
/// `none` and `unknown`) is a negative for `f`.
pub fn evaluate_binary(bench: &Dataset, preds: &[Prediction]) -> Result<BinaryReport> {
    let pairs = align(bench, preds)?;
    let per_foundation: BTreeMap<_, _> = FOUNDATIONS
        .iter()
        .map(|&f| {
            let v: Vec<(bool, bool)> = pairs
                .iter()
                .map(|(d, p)| (d.gold == f, p.labels.contains(&f)))
                .collect();
            (f, binary_metrics(&v))
        })
        .collect();
    let avg = |get: fn(&BinaryMetrics) -> f64| per_foundation.values().map(get).sum::<f64>() / 5.0;
    let average = BinaryMetrics {
        f1_negative: avg(|m| m.f1_negative),
        f1_positive: avg(|m| m.f1_positive),
        accuracy: avg(|m| m.accuracy),
        f1_macro: avg(|m| m.f1_macro),
        f1_weighted: avg(|m| m.f1_weighted),
        support_negative: 0,
        support_positive: 0,
    };
    Ok(BinaryReport { per_foundation, average })
}
