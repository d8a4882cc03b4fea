//! Seeded split, batching and under-sampling. Every routine is a pure
//! function of `(dataset, parameters, seed)`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{Dataset, Document};
use super::label::{FoundationLabel, FOUNDATIONS};
use crate::error::{Error, Result};

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Document indices grouped by gold class, in dataset order.
fn indices_by_class(d: &Dataset) -> BTreeMap<FoundationLabel, Vec<usize>> {
    let mut by_class: BTreeMap<_, Vec<usize>> = BTreeMap::new();
    for (i, doc) in d.documents().iter().enumerate() {
        by_class.entry(doc.gold).or_default().push(i);
    }
    by_class
}

fn subset(d: &Dataset, name: String, mut idx: Vec<usize>) -> Dataset {
    idx.sort_unstable();
    let docs: Vec<Document> = idx.into_iter().map(|i| d.documents()[i].clone()).collect();
    Dataset::from_subset(name, docs)
}

/// Number of items a fraction selects out of `n`, absorbing float noise such
/// as `0.29 * 100 = 28.999...`.
fn take_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Per-class shuffle then prefix-take. The bench set gets
/// `floor(fraction * class_count)` documents of each class; both halves keep
/// the original document order.
pub fn stratified_split(d: &Dataset, bench_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&bench_fraction) {
        return Err(Error::InvalidArgument(format!(
            "bench fraction {bench_fraction} outside [0, 1]"
        )));
    }
    let mut rng = rng(seed);
    let mut train = Vec::new();
    let mut bench = Vec::new();
    for (_, mut idx) in indices_by_class(d) {
        idx.shuffle(&mut rng);
        let k = take_count(bench_fraction, idx.len());
        bench.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    Ok((
        subset(d, format!("{}-train", d.name()), train),
        subset(d, format!("{}-bench", d.name()), bench),
    ))
}

/// Splits a dataset into disjoint, full-size batches.
///
/// Without a quota the whole dataset is shuffled and cut into
/// `batch_size` chunks. With a quota every batch holds exactly
/// `per_class_quota` documents of each foundation (so `batch_size` must be
/// `5 * per_class_quota`); batching stops at the first batch that cannot be
/// filled. Partial batches are never emitted.
pub fn make_batches(
    d: &Dataset,
    batch_size: usize,
    per_class_quota: Option<usize>,
    seed: u64,
) -> Result<Vec<Dataset>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut rng = rng(seed);
    let name = |k: usize| format!("{}-batch{:03}", d.name(), k + 1);

    let Some(quota) = per_class_quota else {
        let mut idx: Vec<usize> = (0..d.len()).collect();
        idx.shuffle(&mut rng);
        return Ok(idx
            .chunks_exact(batch_size)
            .enumerate()
            .map(|(k, chunk)| batch_from(d, name(k), chunk))
            .collect());
    };

    if quota == 0 || batch_size != quota * FOUNDATIONS.len() {
        return Err(Error::InvalidArgument(format!(
            "batch size {batch_size} must equal 5 x per-class quota {quota}"
        )));
    }
    let mut by_class = indices_by_class(d);
    let queues: Vec<Vec<usize>> = FOUNDATIONS
        .iter()
        .map(|f| {
            let mut idx = by_class.remove(f).unwrap_or_default();
            idx.shuffle(&mut rng);
            idx
        })
        .collect();
    let n_batches = queues.iter().map(|q| q.len() / quota).min().unwrap_or(0);
    let mut batches = Vec::with_capacity(n_batches);
    for k in 0..n_batches {
        let chunk: Vec<usize> = queues
            .iter()
            .flat_map(|q| q[k * quota..(k + 1) * quota].iter().copied())
            .collect();
        batches.push(batch_from(d, name(k), &chunk));
    }
    Ok(batches)
}

// Batch order is the drawn order, not dataset order.
fn batch_from(d: &Dataset, name: String, idx: &[usize]) -> Dataset {
    Dataset::from_subset(name, idx.iter().map(|&i| d.documents()[i].clone()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum UndersampleTarget {
    /// Every class present is reduced to the smallest class count.
    MinClass,
    /// Exact per-class counts; classes not listed are dropped.
    Explicit(BTreeMap<FoundationLabel, usize>),
}

/// Samples without replacement down to the target histogram. The result
/// keeps dataset order.
pub fn undersample(d: &Dataset, target: &UndersampleTarget, seed: u64) -> Result<Dataset> {
    let counts = d.class_counts();
    let target: BTreeMap<FoundationLabel, usize> = match target {
        UndersampleTarget::MinClass => {
            let min = counts.values().copied().min().unwrap_or(0);
            counts.keys().map(|&c| (c, min)).collect()
        }
        UndersampleTarget::Explicit(t) => t.clone(),
    };
    for (&class, &want) in &target {
        let have = d.count(class);
        if want > have {
            return Err(Error::Insufficient {
                class,
                requested: want,
                available: have,
            });
        }
    }
    let mut rng = rng(seed);
    let mut keep = Vec::new();
    let wanted: BTreeSet<_> = target.keys().copied().collect();
    for (class, mut idx) in indices_by_class(d) {
        if !wanted.contains(&class) {
            continue;
        }
        idx.shuffle(&mut rng);
        keep.extend_from_slice(&idx[..target[&class]]);
    }
    Ok(subset(d, format!("{}-undersampled", d.name()), keep))
}
