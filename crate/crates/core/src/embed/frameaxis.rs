//! FrameAxis micro-frames: one virtue/vice axis per foundation, document
//! bias along each axis, and a bootstrap null model for significance.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::similarity::in_vocab_counts;
use super::store::EmbeddingStore;
use super::vector::{cosine, mean, norm, normalize};
use crate::corpus::{FoundationLabel, Polarity, Prediction, FOUNDATIONS};
use crate::error::{Error, Result};
use crate::lexicon::{EntryValue, Lexicon, LexiconKind};
use crate::segment::TokenSequence;

/// Two-sided critical value at alpha = 0.05.
pub const DEFAULT_Z_CRIT: f64 = 1.96;
pub const DEFAULT_BOOTSTRAP: usize = 1000;
pub const MIN_BOOTSTRAP: usize = 100;
/// Null pseudo-documents match document length, clamped to this range.
pub const SAMPLE_SIZE_RANGE: (usize, usize) = (10, 1000);

#[derive(Debug, Clone, PartialEq)]
pub struct MicroFrame {
    pub foundation: FoundationLabel,
    /// Unit vector pointing from the virtue centroid to the vice centroid.
    pub axis: Vec<f64>,
    pub virtue_terms: Vec<String>,
    pub vice_terms: Vec<String>,
}

impl MicroFrame {
    /// Axis from explicit pole word lists. Out-of-vocabulary words are
    /// dropped; an empty pole is an error.
    pub fn from_poles(
        foundation: FoundationLabel,
        virtue: &[String],
        vice: &[String],
        store: &EmbeddingStore,
    ) -> Result<Self> {
        let keep = |ws: &[String]| -> Vec<String> {
            ws.iter()
                .filter(|w| store.get(w).is_some_and(|v| norm(v) > 0.0))
                .cloned()
                .collect()
        };
        let virtue_terms = keep(virtue);
        let vice_terms = keep(vice);
        let centroid = |ws: &[String], pole: &'static str| {
            mean(ws.iter().filter_map(|w| store.get(w))).ok_or(Error::EmptyPole { foundation, pole })
        };
        let virtue_c = centroid(&virtue_terms, "virtue")?;
        let vice_c = centroid(&vice_terms, "vice")?;
        let diff: Vec<f64> = vice_c.iter().zip(&virtue_c).map(|(a, b)| a - b).collect();
        let axis = normalize(diff).ok_or_else(|| {
            Error::InvalidArgument(format!("virtue and vice centroids of {foundation} coincide"))
        })?;
        Ok(Self {
            foundation,
            axis,
            virtue_terms,
            vice_terms,
        })
    }

    /// Same frame with the poles exchanged; the axis is negated.
    pub fn swapped(&self) -> Self {
        Self {
            foundation: self.foundation,
            axis: self.axis.iter().map(|x| -x).collect(),
            virtue_terms: self.vice_terms.clone(),
            vice_terms: self.virtue_terms.clone(),
        }
    }

    /// Count-weighted mean cosine between in-vocabulary tokens and the axis;
    /// `None` when no token is in vocabulary.
    pub fn bias(&self, tokens: &TokenSequence, store: &EmbeddingStore) -> Option<f64> {
        let counts = in_vocab_counts(tokens, store);
        let mut num = 0.0;
        let mut den = 0usize;
        for (c, v) in counts.values() {
            num += *c as f64 * cosine(v, &self.axis).unwrap_or(0.0);
            den += c;
        }
        (den > 0).then(|| (num / den as f64).clamp(-1.0, 1.0))
    }
}

/// One micro-frame per foundation from a count lexicon with polarity.
pub fn build_microframes(lex: &Lexicon, store: &EmbeddingStore) -> Result<Vec<MicroFrame>> {
    if lex.kind() != LexiconKind::Count {
        return Err(Error::InvalidArgument("micro-frames need a count lexicon".into()));
    }
    FOUNDATIONS
        .iter()
        .map(|&f| {
            let pole = |want: Polarity| -> Vec<String> {
                lex.entries()
                    .iter()
                    .filter(|e| !e.wildcard)
                    .filter(|e| matches!(e.value, EntryValue::Count { foundation, polarity: Some(p) } if foundation == f && p == want))
                    .map(|e| e.term.clone())
                    .collect()
            };
            MicroFrame::from_poles(f, &pole(Polarity::Virtue), &pole(Polarity::Vice), store)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullModel {
    pub foundation: FoundationLabel,
    pub sample_size: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub stdev: f64,
    pub bootstrap: usize,
    pub seed: u64,
}

/// Per-sample generator: sample `b` depends only on `(seed, sample_size, b)`,
/// so results do not depend on thread scheduling or on which frames share
/// the draw.
fn sample_rng(seed: u64, sample_size: usize, b: usize) -> ChaCha8Rng {
    let mut z = seed ^ (sample_size as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (b as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

fn summarize(values: &[f64]) -> (f64, f64) {
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return (first, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// In-vocabulary background tokens paired with their cosine to each frame.
struct Background {
    cosines: Vec<Vec<f64>>, // [frame][token]
}

impl Background {
    fn new(background: &[String], store: &EmbeddingStore, frames: &[&MicroFrame]) -> Self {
        let vecs: Vec<&[f64]> = background
            .iter()
            .filter_map(|t| store.get(t))
            .filter(|v| norm(v) > 0.0)
            .collect();
        let cosines = frames
            .iter()
            .map(|f| vecs.iter().map(|v| cosine(v, &f.axis).unwrap_or(0.0)).collect())
            .collect();
        Self { cosines }
    }

    fn len(&self) -> usize {
        self.cosines.first().map_or(0, Vec::len)
    }

    /// Bias of `bootstrap` pseudo-documents per frame.
    fn null_models(
        &self,
        frames: &[&MicroFrame],
        sample_size: usize,
        bootstrap: usize,
        seed: u64,
    ) -> Result<Vec<NullModel>> {
        if bootstrap < MIN_BOOTSTRAP {
            return Err(Error::InvalidArgument(format!(
                "bootstrap size {bootstrap} below {MIN_BOOTSTRAP}"
            )));
        }
        if sample_size == 0 {
            return Err(Error::InvalidArgument("null sample size must be positive".into()));
        }
        let n = self.len();
        if n == 0 {
            return Err(Error::InvalidArgument("null background has no in-vocabulary tokens".into()));
        }
        // draws[b] holds token indices of pseudo-document b
        let draws: Vec<Vec<usize>> = (0..bootstrap)
            .into_par_iter()
            .map(|b| {
                let mut rng = sample_rng(seed, sample_size, b);
                (0..sample_size).map(|_| rng.random_range(0..n)).collect()
            })
            .collect();
        Ok(frames
            .iter()
            .zip(&self.cosines)
            .map(|(frame, cos)| {
                let biases: Vec<f64> = draws
                    .par_iter()
                    .map(|idx| idx.iter().map(|&i| cos[i]).sum::<f64>() / sample_size as f64)
                    .collect();
                let (mean, stdev) = summarize(&biases);
                NullModel {
                    foundation: frame.foundation,
                    sample_size,
                    mean,
                    stdev,
                    bootstrap,
                    seed,
                }
            })
            .collect())
    }
}

/// Bootstrap null for one frame: `bootstrap` pseudo-documents of
/// `sample_size` tokens drawn uniformly with replacement from `background`.
pub fn build_null_model(
    background: &[String],
    store: &EmbeddingStore,
    frame: &MicroFrame,
    sample_size: usize,
    bootstrap: usize,
    seed: u64,
) -> Result<NullModel> {
    let bg = Background::new(background, store, &[frame]);
    if bg.len() < sample_size {
        return Err(Error::InvalidArgument(format!(
            "background has {} in-vocabulary tokens, need at least {sample_size}",
            bg.len()
        )));
    }
    Ok(bg.null_models(&[frame], sample_size, bootstrap, seed)?.remove(0))
}

/// Null sample size for a document with `in_vocab` tokens.
pub fn null_sample_size(in_vocab: usize) -> usize {
    in_vocab.clamp(SAMPLE_SIZE_RANGE.0, SAMPLE_SIZE_RANGE.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAxisScore {
    pub bias: BTreeMap<FoundationLabel, f64>,
    pub z: BTreeMap<FoundationLabel, f64>,
    pub significant: BTreeSet<FoundationLabel>,
    pub in_vocab_tokens: usize,
}

/// Scores a document against frames and matching null models. Labels are
/// the foundations whose bias is significant (`|z| >= z_crit`), `none` if
/// no frame is, `unknown` if no token is in vocabulary.
pub fn frameaxis_score(
    doc_id: &str,
    tokens: &TokenSequence,
    store: &EmbeddingStore,
    frames: &[MicroFrame],
    nulls: &[NullModel],
    z_crit: f64,
    approach: &str,
) -> Result<(Option<FrameAxisScore>, Prediction)> {
    let in_vocab: usize = in_vocab_counts(tokens, store).values().map(|(c, _)| c).sum();
    if in_vocab == 0 {
        return Ok((None, Prediction::unknown(doc_id, approach)));
    }
    let want = null_sample_size(in_vocab);
    let mut score = FrameAxisScore {
        bias: BTreeMap::new(),
        z: BTreeMap::new(),
        significant: BTreeSet::new(),
        in_vocab_tokens: in_vocab,
    };
    for frame in frames {
        let null = nulls
            .iter()
            .find(|n| n.foundation == frame.foundation)
            .ok_or_else(|| Error::InvalidArgument(format!("no null model for {}", frame.foundation)))?;
        if null.sample_size != want {
            return Err(Error::InvalidArgument(format!(
                "null for {} has sample size {}, document needs {want}",
                frame.foundation, null.sample_size
            )));
        }
        let bias = frame.bias(tokens, store).expect("in-vocabulary tokens present");
        let z = if null.stdev > 0.0 { (bias - null.mean) / null.stdev } else { 0.0 };
        if z.abs() >= z_crit {
            score.significant.insert(frame.foundation);
        }
        score.bias.insert(frame.foundation, bias);
        score.z.insert(frame.foundation, z);
    }
    let pred = Prediction::new(doc_id, score.significant.iter().copied(), approach)
        .with_scores(score.bias.clone());
    Ok((Some(score), pred))
}

/// Where null-model pseudo-documents draw their tokens from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundSource {
    /// Token occurrences of the scored corpus.
    #[default]
    Corpus,
    /// Each embedding-vocabulary word once.
    Vocabulary,
}

/// Frames plus a lazily filled cache of null models keyed by sample size.
pub struct FrameAxisScorer<'a> {
    store: &'a EmbeddingStore,
    frames: Vec<MicroFrame>,
    background: Background,
    bootstrap: usize,
    seed: u64,
    z_crit: f64,
    name: String,
    nulls: Mutex<HashMap<usize, Arc<Vec<NullModel>>>>,
}

impl<'a> FrameAxisScorer<'a> {
    pub fn new(
        store: &'a EmbeddingStore,
        frames: Vec<MicroFrame>,
        background: &[String],
        bootstrap: usize,
        seed: u64,
        z_crit: f64,
        name: impl Into<String>,
    ) -> Result<Self> {
        if bootstrap < MIN_BOOTSTRAP {
            return Err(Error::InvalidArgument(format!("bootstrap size {bootstrap} below {MIN_BOOTSTRAP}")));
        }
        let refs: Vec<&MicroFrame> = frames.iter().collect();
        let background = Background::new(background, store, &refs);
        if background.len() == 0 {
            return Err(Error::InvalidArgument("null background has no in-vocabulary tokens".into()));
        }
        Ok(Self {
            store,
            frames,
            background,
            bootstrap,
            seed,
            z_crit,
            name: name.into(),
            nulls: Mutex::new(HashMap::new()),
        })
    }

    pub fn frames(&self) -> &[MicroFrame] {
        &self.frames
    }

    /// Null models for one sample size, built on first use.
    pub fn nulls_for(&self, sample_size: usize) -> Result<Arc<Vec<NullModel>>> {
        if let Some(n) = self.nulls.lock().expect("null cache").get(&sample_size) {
            return Ok(n.clone());
        }
        let refs: Vec<&MicroFrame> = self.frames.iter().collect();
        let models = Arc::new(self.background.null_models(&refs, sample_size, self.bootstrap, self.seed)?);
        self.nulls
            .lock()
            .expect("null cache")
            .insert(sample_size, models.clone());
        Ok(models)
    }

    pub fn score(&self, doc_id: &str, tokens: &TokenSequence) -> Result<(Option<FrameAxisScore>, Prediction)> {
        let in_vocab: usize = in_vocab_counts(tokens, self.store).values().map(|(c, _)| c).sum();
        if in_vocab == 0 {
            return Ok((None, Prediction::unknown(doc_id, &self.name)));
        }
        let nulls = self.nulls_for(null_sample_size(in_vocab))?;
        frameaxis_score(doc_id, tokens, self.store, &self.frames, &nulls, self.z_crit, &self.name)
    }
}
