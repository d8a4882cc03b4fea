use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{ClassMetrics, EvalReport, Scope};
use crate::corpus::{FoundationLabel, FOUNDATIONS};
use crate::error::{Error, Result};

/// Class proportions over the five foundations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrior {
    p: BTreeMap<FoundationLabel, f64>,
    counts: Option<BTreeMap<FoundationLabel, usize>>,
}

impl ClassPrior {
    /// Prior from a class histogram. Non-foundation classes are ignored;
    /// missing foundations get probability 0.
    pub fn from_counts(counts: &BTreeMap<FoundationLabel, usize>) -> Result<Self> {
        let counts: BTreeMap<_, _> = FOUNDATIONS
            .iter()
            .map(|f| (*f, counts.get(f).copied().unwrap_or(0)))
            .collect();
        let total: usize = counts.values().sum();
        if total == 0 {
            return Err(Error::InvalidArgument("class prior needs at least one foundation document".into()));
        }
        let p = counts.iter().map(|(f, &n)| (*f, n as f64 / total as f64)).collect();
        Ok(Self { p, counts: Some(counts) })
    }

    pub fn from_probabilities(p: &BTreeMap<FoundationLabel, f64>) -> Result<Self> {
        let p: BTreeMap<_, _> = FOUNDATIONS.iter().map(|f| (*f, p.get(f).copied().unwrap_or(0.0))).collect();
        if p.values().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("prior probabilities must lie in [0, 1]".into()));
        }
        let total: f64 = p.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("prior sums to {total}, expected 1")));
        }
        Ok(Self { p, counts: None })
    }

    pub fn uniform() -> Self {
        Self {
            p: FOUNDATIONS.iter().map(|f| (*f, 0.2)).collect(),
            counts: None,
        }
    }

    pub fn p(&self, f: FoundationLabel) -> f64 {
        self.p.get(&f).copied().unwrap_or(0.0)
    }

    pub fn probabilities(&self) -> &BTreeMap<FoundationLabel, f64> {
        &self.p
    }
}

/// Expected metrics of guessing one label at random in proportion to the
/// prior. Per class, precision = recall = F1 = p_c; accuracy and weighted F1
/// are sum(p_c^2); macro F1 is the mean of p_c.
pub fn baseline_expected(prior: &ClassPrior) -> EvalReport {
    let counts = prior.counts.as_ref();
    let per_class: BTreeMap<_, _> = FOUNDATIONS
        .iter()
        .map(|&f| {
            let p = prior.p(f);
            let support = counts.map_or(0, |c| c[&f]);
            (f, ClassMetrics { precision: p, recall: p, f1: p, support })
        })
        .collect();
    let accuracy: f64 = FOUNDATIONS.iter().map(|&f| prior.p(f) * prior.p(f)).sum();
    let n = counts.map_or(0, |c| c.values().sum());
    EvalReport {
        scope: Scope::All,
        f1_macro: FOUNDATIONS.iter().map(|&f| prior.p(f)).sum::<f64>() / FOUNDATIONS.len() as f64,
        per_class,
        accuracy,
        coverage: 1.0,
        f1_weighted: accuracy,
        confusion: None,
        n_documents: n,
        n_covered: n,
        n_scope: n,
        no_covered: false,
    }
}
