use std::collections::BTreeMap;

use super::store::EmbeddingStore;
use super::vector::{cosine, mean, norm, weighted_mean};
use crate::corpus::{FoundationLabel, Prediction, FOUNDATIONS};
use crate::error::{Error, Result};
use crate::lexicon::{EntryValue, Lexicon, LexiconKind};
use crate::segment::TokenSequence;

/// Distinct in-vocabulary tokens with their counts, in sorted order. Tokens
/// whose stored vector is zero are treated as out of vocabulary.
pub(crate) fn in_vocab_counts<'a>(
    tokens: &'a TokenSequence,
    store: &'a EmbeddingStore,
) -> BTreeMap<&'a str, (usize, &'a [f64])> {
    let mut out: BTreeMap<&str, (usize, &[f64])> = BTreeMap::new();
    for tok in tokens.iter() {
        if let Some(v) = store.get(tok) {
            if norm(v) > 0.0 {
                out.entry(tok).or_insert((0, v)).0 += 1;
            }
        }
    }
    out
}

/// Per-foundation centroid ("pseudo-document") of a count lexicon's
/// in-vocabulary terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticAnchors {
    name: String,
    anchors: Vec<(FoundationLabel, Vec<f64>)>,
}

impl SemanticAnchors {
    pub fn build(lex: &Lexicon, store: &EmbeddingStore) -> Result<Self> {
        if lex.kind() != LexiconKind::Count {
            return Err(Error::InvalidArgument("semantic anchors need a count lexicon".into()));
        }
        let mut anchors = Vec::with_capacity(5);
        for f in FOUNDATIONS {
            let vecs = lex.entries().iter().filter_map(|e| match e.value {
                EntryValue::Count { foundation, .. } if foundation == f && !e.wildcard => store.get(&e.term),
                _ => None,
            });
            let centroid = mean(vecs).ok_or(Error::EmptyAnchor(f))?;
            if norm(&centroid) == 0.0 {
                return Err(Error::EmptyAnchor(f));
            }
            anchors.push((f, centroid));
        }
        Ok(Self {
            name: format!("semsim+{}", lex.name()),
            anchors,
        })
    }

    pub fn anchor(&self, f: FoundationLabel) -> Option<&[f64]> {
        self.anchors.iter().find(|(g, _)| *g == f).map(|(_, v)| v.as_slice())
    }

    /// Labels the document with the anchor(s) most similar to its mean token
    /// vector. All tokens out of vocabulary gives `unknown`.
    pub fn score(&self, doc_id: &str, tokens: &TokenSequence, store: &EmbeddingStore) -> Prediction {
        let counts = in_vocab_counts(tokens, store);
        let doc = weighted_mean(counts.values().map(|&(c, v)| (v, c as f64)));
        let Some(doc) = doc.filter(|d| norm(d) > 0.0) else {
            return Prediction::unknown(doc_id, &self.name);
        };
        let scores: BTreeMap<FoundationLabel, f64> = self
            .anchors
            .iter()
            .map(|(f, a)| (*f, cosine(&doc, a).unwrap_or(0.0)))
            .collect();
        let max = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
        let labels: Vec<_> = scores.iter().filter(|(_, &v)| v == max).map(|(&f, _)| f).collect();
        Prediction::new(doc_id, labels, &self.name).with_scores(scores)
    }
}

/// Free-function form of [`SemanticAnchors::score`].
pub fn semantic_similarity_score(
    doc_id: &str,
    tokens: &TokenSequence,
    lex: &Lexicon,
    store: &EmbeddingStore,
) -> Result<Prediction> {
    Ok(SemanticAnchors::build(lex, store)?.score(doc_id, tokens, store))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::LexiconEntry;
    use proptest::prelude::*;
    use FoundationLabel::*;

    fn lex(rows: &[(&str, FoundationLabel)]) -> Lexicon {
        Lexicon::new(
            "cmfd2",
            LexiconKind::Count,
            rows.iter()
                .map(|&(t, f)| LexiconEntry {
                    term: t.into(),
                    wildcard: false,
                    value: EntryValue::Count { foundation: f, polarity: Option::None },
                })
                .collect(),
        )
        .unwrap()
    }

    fn toks(t: &[&str]) -> TokenSequence {
        TokenSequence::pretokenized(t.iter().map(|s| s.to_string()).collect())
    }

    fn five_axis_store() -> EmbeddingStore {
        let mut rows = Vec::new();
        for (i, w) in ["c", "f", "l", "a", "s"].iter().enumerate() {
            let mut v = vec![0.0; 5];
            v[i] = 1.0;
            rows.push((w.to_string(), v));
        }
        rows.push(("mix".into(), vec![1.0, 0.2, 0.0, 0.0, 0.0]));
        EmbeddingStore::from_vectors(5, rows).unwrap()
    }

    fn five_lex() -> Lexicon {
        lex(&[("c", Care), ("f", Fairness), ("l", Loyalty), ("a", Authority), ("s", Sanctity)])
    }

    #[test]
    fn self_similarity() {
        let store = five_axis_store();
        let p = semantic_similarity_score("d", &toks(&["c"]), &five_lex(), &store).unwrap();
        assert_eq!(p.labels.iter().copied().collect::<Vec<_>>(), [Care]);
        assert_eq!(p.scores.unwrap()[&Care], 1.0);
    }

    #[test]
    fn toy_two_d_cosine() {
        // anchors care=(1,0), fairness=(0,1); doc vector (1,0)
        let store = EmbeddingStore::from_vectors(
            2,
            [
                ("c", vec![1.0, 0.0]),
                ("f", vec![0.0, 1.0]),
                ("l", vec![-1.0, 0.0]),
                ("a", vec![0.0, -1.0]),
                ("s", vec![-1.0, -1.0]),
                ("doc", vec![1.0, 0.0]),
            ],
        )
        .unwrap();
        let p = semantic_similarity_score("d", &toks(&["doc"]), &five_lex(), &store).unwrap();
        assert_eq!(p.labels.iter().copied().collect::<Vec<_>>(), [Care]);
        let s = p.scores.unwrap();
        assert_eq!(s[&Fairness], 0.0);
        assert_eq!(s[&Loyalty], -1.0);
    }

    #[test]
    fn all_oov_is_unknown() {
        let store = five_axis_store();
        let p = semantic_similarity_score("d", &toks(&["zzz", "yyy"]), &five_lex(), &store).unwrap();
        assert_eq!(p.labels.iter().copied().collect::<Vec<_>>(), [Unknown]);
    }

    #[test]
    fn missing_anchor_is_an_error() {
        let store = five_axis_store();
        let l = lex(&[("c", Care), ("f", Fairness), ("l", Loyalty), ("a", Authority), ("oov", Sanctity)]);
        assert!(matches!(SemanticAnchors::build(&l, &store), Err(Error::EmptyAnchor(Sanctity))));
    }

    /// Random orthogonal matrix via Gram-Schmidt on a seeded Gaussian-ish
    /// matrix.
    fn random_rotation(dim: usize, seed: u64) -> Vec<Vec<f64>> {
        use rand::Rng;
        let mut rng = crate::corpus::rng(seed);
        let mut basis: Vec<Vec<f64>> = Vec::new();
        while basis.len() < dim {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            for b in &basis {
                let d = super::super::vector::dot(&v, b);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= d * y;
                }
            }
            if let Some(u) = super::super::vector::normalize(v) {
                basis.push(u);
            }
        }
        basis
    }

    proptest! {
        #[test]
        fn argmax_is_rotation_invariant(
            vecs in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 6), 10),
            doc in proptest::collection::vec(0usize..10, 1..6),
            seed in any::<u64>(),
        ) {
            let words: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
            let store = EmbeddingStore::from_vectors(6, words.iter().cloned().zip(vecs)).unwrap();
            let l = lex(&[("w0", Care), ("w1", Care), ("w2", Fairness), ("w3", Loyalty), ("w4", Authority), ("w5", Sanctity), ("w6", Sanctity)]);
            let r = random_rotation(6, seed);
            let rotated = store.map_vectors(|v| r.iter().map(|row| super::super::vector::dot(row, v)).collect()).unwrap();
            let t = TokenSequence::pretokenized(doc.iter().map(|&i| words[i].clone()).collect());
            let (Ok(a), Ok(b)) = (SemanticAnchors::build(&l, &store), SemanticAnchors::build(&l, &rotated)) else {
                return Ok(());
            };
            let pa = a.score("d", &t, &store);
            let pb = b.score("d", &t, &rotated);
            let sa = pa.scores.clone().unwrap_or_default();
            let sb = pb.scores.clone().unwrap_or_default();
            for (f, v) in &sa {
                prop_assert!((v - sb[f]).abs() < 1e-9);
            }
            // labels agree unless the top two cosines are numerically tied
            let mut top: Vec<f64> = sa.values().copied().collect();
            top.sort_by(|x, y| y.partial_cmp(x).unwrap());
            if top.len() < 2 || top[0] - top[1] > 1e-9 {
                prop_assert_eq!(pa.labels, pb.labels);
            }
        }
    }
}
