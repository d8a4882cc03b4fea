use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Document, FoundationLabel, Prediction, FOUNDATIONS};
use crate::error::{Error, Result};

/// Which documents the accuracy and F1 figures are computed over. Coverage
/// is always computed over all documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// Only documents that received at least one foundation label.
    #[default]
    CoveredOnly,
    All,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::CoveredOnly => "covered_only",
            Scope::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scope: Scope,
    pub per_class: BTreeMap<FoundationLabel, ClassMetrics>,
    pub accuracy: f64,
    pub coverage: f64,
    pub f1_weighted: f64,
    pub f1_macro: f64,
    /// Absent for closed-form reports.
    pub confusion: Option<BTreeMap<FoundationLabel, Confusion>>,
    pub n_documents: usize,
    pub n_covered: usize,
    /// Documents inside the scope; per-class support sums to this.
    pub n_scope: usize,
    /// Set when the scope is empty and every metric was reported as 0.
    pub no_covered: bool,
}

/// Correct when the gold label is among the predicted labels.
pub fn lenient_match(gold: FoundationLabel, pred: &Prediction) -> bool {
    pred.labels.contains(&gold)
}

/// Partial counts over a subset of documents. Tallies over disjoint subsets
/// merge into the tally of their union.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Tally {
    pub confusion: [Confusion; 5],
    pub support: [usize; 5],
    pub correct: usize,
    pub n_scope: usize,
    pub n_documents: usize,
    pub n_covered: usize,
}

impl Tally {
    pub fn add(&mut self, gold: FoundationLabel, pred: &Prediction, scope: Scope) {
        let covered = pred.is_covered();
        self.n_documents += 1;
        if covered {
            self.n_covered += 1;
        }
        if scope == Scope::CoveredOnly && !covered {
            return;
        }
        self.n_scope += 1;
        if lenient_match(gold, pred) {
            self.correct += 1;
        }
        for (i, &c) in FOUNDATIONS.iter().enumerate() {
            let predicted = pred.labels.contains(&c);
            let is_gold = gold == c;
            let cell = &mut self.confusion[i];
            match (is_gold, predicted) {
                (true, true) => cell.tp += 1,
                (false, true) => cell.fp += 1,
                (true, false) => cell.fn_ += 1,
                (false, false) => {}
            }
            if is_gold {
                self.support[i] += 1;
            }
        }
    }

    pub fn merge(mut self, other: &Tally) -> Tally {
        for i in 0..5 {
            self.confusion[i].tp += other.confusion[i].tp;
            self.confusion[i].fp += other.confusion[i].fp;
            self.confusion[i].fn_ += other.confusion[i].fn_;
            self.support[i] += other.support[i];
        }
        self.correct += other.correct;
        self.n_scope += other.n_scope;
        self.n_documents += other.n_documents;
        self.n_covered += other.n_covered;
        self
    }

    pub fn report(&self, scope: Scope) -> EvalReport {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let mut per_class = BTreeMap::new();
        let mut confusion = BTreeMap::new();
        let mut weighted = 0.0;
        let mut macro_sum = 0.0;
        for (i, &c) in FOUNDATIONS.iter().enumerate() {
            let cm = self.confusion[i];
            let precision = ratio(cm.tp, cm.tp + cm.fp);
            let recall = ratio(cm.tp, cm.tp + cm.fn_);
            let f1 = f1(precision, recall);
            weighted += f1 * self.support[i] as f64;
            macro_sum += f1;
            per_class.insert(
                c,
                ClassMetrics {
                    precision,
                    recall,
                    f1,
                    support: self.support[i],
                },
            );
            confusion.insert(c, cm);
        }
        let total_support: usize = self.support.iter().sum();
        EvalReport {
            scope,
            per_class,
            accuracy: ratio(self.correct, self.n_scope),
            coverage: ratio(self.n_covered, self.n_documents),
            f1_weighted: if total_support == 0 { 0.0 } else { weighted / total_support as f64 },
            f1_macro: macro_sum / FOUNDATIONS.len() as f64,
            confusion: Some(confusion),
            n_documents: self.n_documents,
            n_covered: self.n_covered,
            n_scope: self.n_scope,
            no_covered: self.n_scope == 0,
        }
    }
}

pub(crate) fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Pairs every benchmark document with its unique prediction.
pub fn align<'a>(bench: &'a Dataset, preds: &'a [Prediction]) -> Result<Vec<(&'a Document, &'a Prediction)>> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.doc_id.as_str(), p).is_some() {
            return Err(Error::Alignment(format!("duplicate prediction for {:?}", p.doc_id)));
        }
    }
    let mut out = Vec::with_capacity(bench.len());
    for d in bench.documents() {
        let p = by_id
            .remove(d.id.as_str())
            .ok_or_else(|| Error::Alignment(format!("no prediction for {:?}", d.id)))?;
        out.push((d, p));
    }
    if let Some(extra) = by_id.keys().min() {
        return Err(Error::Alignment(format!(
            "{} prediction(s) for unknown documents, e.g. {extra:?}",
            by_id.len()
        )));
    }
    Ok(out)
}

/// Lenient evaluation. Each predicted label counts as an assertion: a
/// tie prediction `{care, authority}` on a care document is one TP for care
/// and one FP for authority.
pub fn evaluate(bench: &Dataset, preds: &[Prediction], scope: Scope) -> Result<EvalReport> {
    if let Some(d) = bench.documents().iter().find(|d| !d.gold.is_foundation()) {
        return Err(Error::InvalidRecord {
            record: d.id.clone(),
            reason: format!("benchmark gold label must be a foundation, found {}", d.gold),
        });
    }
    let mut tally = Tally::default();
    for (doc, pred) in align(bench, preds)? {
        tally.add(doc.gold, pred, scope);
    }
    Ok(tally.report(scope))
}
