use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::metrics::{align, lenient_match};
use crate::corpus::{rng, Dataset, Document, FoundationLabel, Prediction};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct MislabelSample {
    /// Sampled records, in benchmark order.
    pub records: Vec<(Document, Prediction)>,
    /// Mislabeled records available after filtering.
    pub available: usize,
    /// True when fewer than the requested number were available.
    pub short: bool,
}

/// Uniform sample without replacement of records that fail the lenient
/// match, optionally restricted to gold labels in `filter`.
pub fn sample_mislabeled(
    bench: &Dataset,
    preds: &[Prediction],
    n: usize,
    filter: Option<&BTreeSet<FoundationLabel>>,
    seed: u64,
) -> Result<MislabelSample> {
    let mut pool: Vec<(usize, &Document, &Prediction)> = align(bench, preds)?
        .into_iter()
        .enumerate()
        .filter(|(_, (d, p))| !lenient_match(d.gold, p))
        .filter(|(_, (d, _))| filter.is_none_or(|f| f.contains(&d.gold)))
        .map(|(i, (d, p))| (i, d, p))
        .collect();
    let available = pool.len();
    let short = available < n;
    if short {
        log::warn!("requested {n} mislabeled records, only {available} available");
    }
    pool.shuffle(&mut rng(seed));
    pool.truncate(n);
    pool.sort_by_key(|(i, _, _)| *i);
    Ok(MislabelSample {
        records: pool.into_iter().map(|(_, d, p)| (d.clone(), p.clone())).collect(),
        available,
        short,
    })
}
