//! Dictionary scoring: match counts (MFD, MFD2, C-MFD2 style lexicons) and
//! probability sums (eMFD style).

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{FoundationLabel, Polarity, Prediction, FOUNDATIONS};
use crate::error::{Error, Result};
use crate::segment::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconKind {
    Count,
    Probability,
}

impl FromStr for LexiconKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "count" => Ok(Self::Count),
            "probability" | "prob" => Ok(Self::Probability),
            other => Err(Error::InvalidArgument(format!("unknown lexicon kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EntryValue {
    Count {
        foundation: FoundationLabel,
        polarity: Option<Polarity>,
    },
    /// Probabilities in [`FOUNDATIONS`] order.
    Probability([f64; 5]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    /// Lowercased term without the trailing `*`.
    pub term: String,
    /// Prefix match (`harm*` matches `harmful`).
    pub wildcard: bool,
    pub value: EntryValue,
}

impl LexiconEntry {
    /// Term as written in lexicon files.
    pub fn display_term(&self) -> String {
        if self.wildcard {
            format!("{}*", self.term)
        } else {
            self.term.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    name: String,
    kind: LexiconKind,
    entries: Vec<LexiconEntry>,
    /// Extra probability-file columns (e.g. sentiment), carried but unused.
    aux_columns: Vec<String>,
    aux: Vec<Vec<String>>,
    exact: HashMap<String, usize>,
    /// Wildcard entry indices, longest prefix first.
    prefixes: Vec<usize>,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.kind == other.kind
            && self.entries == other.entries
            && self.aux_columns == other.aux_columns
            && self.aux == other.aux
    }
}

impl Lexicon {
    /// Validates entries; rejects duplicates, out-of-range probabilities and
    /// entries whose value does not match `kind`.
    pub fn new(name: impl Into<String>, kind: LexiconKind, entries: Vec<LexiconEntry>) -> Result<Self> {
        let name = name.into();
        let n = entries.len();
        Self::build(name.clone(), kind, entries, Vec::new(), vec![Vec::new(); n]).map_err(
            |(_, term, reason)| Error::InvalidRecord {
                record: format!("{name}:{term}"),
                reason,
            },
        )
    }

    /// On failure returns (entry index, term, reason).
    fn build(
        name: String,
        kind: LexiconKind,
        mut entries: Vec<LexiconEntry>,
        aux_columns: Vec<String>,
        aux: Vec<Vec<String>>,
    ) -> std::result::Result<Self, (usize, String, String)> {
        let mut exact = HashMap::new();
        let mut wild = HashMap::new();
        for (i, e) in entries.iter_mut().enumerate() {
            e.term = e.term.trim().to_lowercase();
            let bad = |reason: String| (i, e.display_term(), reason);
            if e.term.is_empty() {
                return Err(bad("empty term".into()));
            }
            match (&e.value, kind) {
                (EntryValue::Count { foundation, .. }, LexiconKind::Count) => {
                    if !foundation.is_foundation() {
                        return Err(bad(format!("{foundation} is not a moral foundation")));
                    }
                }
                (EntryValue::Probability(p), LexiconKind::Probability) => {
                    if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                        return Err(bad(format!("probability {v} outside [0, 1]")));
                    }
                }
                _ => return Err(bad(format!("entry does not match lexicon kind {kind:?}"))),
            }
            let map = if e.wildcard { &mut wild } else { &mut exact };
            if map.insert(e.term.clone(), i).is_some() {
                return Err(bad("duplicate term".into()));
            }
        }
        let mut prefixes: Vec<usize> = wild.into_values().collect();
        prefixes.sort_by(|&a, &b| {
            entries[b]
                .term
                .len()
                .cmp(&entries[a].term.len())
                .then_with(|| entries[a].term.cmp(&entries[b].term))
        });
        Ok(Self {
            name,
            kind,
            entries,
            aux_columns,
            aux,
            exact,
            prefixes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> LexiconKind {
        self.kind
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Index of the entry matching `token`: an exact term wins, otherwise the
    /// longest wildcard prefix.
    pub fn lookup(&self, token: &str) -> Option<usize> {
        if let Some(&i) = self.exact.get(token) {
            return Some(i);
        }
        if self.prefixes.is_empty() {
            return None;
        }
        let lower;
        let token = if token.chars().any(char::is_uppercase) {
            lower = token.to_lowercase();
            if let Some(&i) = self.exact.get(&lower) {
                return Some(i);
            }
            lower.as_str()
        } else {
            token
        };
        self.prefixes
            .iter()
            .copied()
            .find(|&i| token.starts_with(self.entries[i].term.as_str()))
    }

    /// Exact (non-wildcard) terms, e.g. to seed a segmentation vocabulary.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().filter(|e| !e.wildcard).map(|e| e.term.as_str())
    }

    /// Foundations that have at least one count entry.
    pub fn foundations(&self) -> Vec<FoundationLabel> {
        let mut seen: Vec<FoundationLabel> = self
            .entries
            .iter()
            .filter_map(|e| match e.value {
                EntryValue::Count { foundation, .. } => Some(foundation),
                EntryValue::Probability(_) => None,
            })
            .collect();
        seen.sort();
        seen.dedup();
        seen
    }

    /// Assigns virtue/vice from per-term sentiment scores: virtue iff
    /// `score >= 0.5`. Terms without a score keep their current polarity.
    pub fn with_polarity(&self, sentiment: &SentimentScores) -> Result<Lexicon> {
        if self.kind != LexiconKind::Count {
            return Err(Error::InvalidArgument("polarity applies to count lexicons".into()));
        }
        let mut out = self.clone();
        for e in &mut out.entries {
            if let EntryValue::Count { polarity, .. } = &mut e.value {
                if let Some(score) = sentiment.get(&e.term) {
                    *polarity = Some(if score >= 0.5 { Polarity::Virtue } else { Polarity::Vice });
                }
            }
        }
        Ok(out)
    }
}

/// Per-foundation evidence for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconScore {
    pub per_foundation: BTreeMap<FoundationLabel, f64>,
    /// Matched lexicon terms (as written) with their hit counts.
    pub matched_terms: BTreeMap<String, usize>,
}

impl LexiconScore {
    pub fn total_matches(&self) -> usize {
        self.matched_terms.values().sum()
    }
}

/// Hit counts keyed by entry index. Aggregating before summing makes scores
/// independent of token order.
fn match_counts(tokens: &TokenSequence, lex: &Lexicon) -> BTreeMap<usize, usize> {
    let mut hits = BTreeMap::new();
    for tok in tokens.iter() {
        if let Some(i) = lex.lookup(tok) {
            *hits.entry(i).or_insert(0) += 1;
        }
    }
    hits
}

pub fn lexicon_score(tokens: &TokenSequence, lex: &Lexicon) -> LexiconScore {
    let hits = match_counts(tokens, lex);
    let mut per_foundation: BTreeMap<_, f64> = FOUNDATIONS.iter().map(|&f| (f, 0.0)).collect();
    let mut matched_terms = BTreeMap::new();
    for (&i, &count) in &hits {
        let entry = &lex.entries[i];
        match &entry.value {
            EntryValue::Count { foundation, .. } => {
                *per_foundation.get_mut(foundation).expect("foundation") += count as f64;
            }
            EntryValue::Probability(p) => {
                for (f, prob) in FOUNDATIONS.iter().zip(p) {
                    *per_foundation.get_mut(f).expect("foundation") += count as f64 * prob;
                }
            }
        }
        *matched_terms.entry(entry.display_term()).or_insert(0) += count;
    }
    LexiconScore {
        per_foundation,
        matched_terms,
    }
}

/// All foundations sharing the maximum score; empty when nothing scored
/// above zero.
pub(crate) fn argmax_set(scores: &BTreeMap<FoundationLabel, f64>) -> Vec<FoundationLabel> {
    let max = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    scores
        .iter()
        .filter(|(_, &v)| v == max)
        .map(|(&f, _)| f)
        .collect()
}

fn label_from_score(doc_id: &str, score: LexiconScore, approach: &str) -> Prediction {
    let labels = argmax_set(&score.per_foundation);
    Prediction::new(doc_id, labels, approach).with_scores(score.per_foundation)
}

/// Most frequent foundation; ties yield every tied foundation; no match
/// yields `none`. Scores carry raw match counts.
pub fn score_count(doc_id: &str, tokens: &TokenSequence, lex: &Lexicon) -> Result<Prediction> {
    if lex.kind != LexiconKind::Count {
        return Err(Error::InvalidArgument(format!("{} is not a count lexicon", lex.name)));
    }
    Ok(label_from_score(doc_id, lexicon_score(tokens, lex), &lex.name))
}

/// Foundation with the highest summed probability over matched tokens.
pub fn score_prob(doc_id: &str, tokens: &TokenSequence, lex: &Lexicon) -> Result<Prediction> {
    if lex.kind != LexiconKind::Probability {
        return Err(Error::InvalidArgument(format!("{} is not a probability lexicon", lex.name)));
    }
    Ok(label_from_score(doc_id, lexicon_score(tokens, lex), &lex.name))
}

// ---------------------------------------------------------------------------
// File formats

fn split_term(raw: &str) -> (String, bool) {
    let raw = raw.trim();
    match raw.strip_suffix('*') {
        Some(stem) => (stem.to_string(), true),
        None => (raw.to_string(), false),
    }
}

pub fn load_lexicon(path: impl AsRef<Path>, kind: LexiconKind) -> Result<Lexicon> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = std::fs::File::open(path)?;
    let origin = path.display().to_string();
    match kind {
        LexiconKind::Count => read_count_lexicon(BufReader::new(file), &name, &origin),
        LexiconKind::Probability => read_prob_lexicon(file, &name, &origin),
    }
}

/// `term<TAB>foundation[<TAB>polarity]`; blank lines and `#` comments are
/// skipped.
pub fn read_count_lexicon(reader: impl BufRead, name: &str, origin: &str) -> Result<Lexicon> {
    let mut entries = Vec::new();
    let mut lines_of = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::parse(origin, lineno, format!("expected 2 or 3 tab-separated fields, found {}", fields.len())));
        }
        let foundation: FoundationLabel = fields[1]
            .parse()
            .map_err(|e: crate::corpus::ParseLabelError| Error::parse(origin, lineno, e.to_string()))?;
        let polarity = match fields.get(2).map(|s| s.trim()).filter(|s| !s.is_empty()) {
            Some(p) => Some(
                p.parse::<Polarity>()
                    .map_err(|_| Error::parse(origin, lineno, format!("unknown polarity {p:?}")))?,
            ),
            None => None,
        };
        let (term, wildcard) = split_term(fields[0]);
        entries.push(LexiconEntry {
            term,
            wildcard,
            value: EntryValue::Count { foundation, polarity },
        });
        lines_of.push(lineno);
    }
    let n = entries.len();
    Lexicon::build(name.to_string(), LexiconKind::Count, entries, Vec::new(), vec![Vec::new(); n])
        .map_err(|(i, term, reason)| Error::parse(origin, lines_of[i], format!("{term}: {reason}")))
}

/// CSV with header `term,care,fairness,loyalty,authority,sanctity`; further
/// columns are kept as auxiliary data.
pub fn read_prob_lexicon(reader: impl std::io::Read, name: &str, origin: &str) -> Result<Lexicon> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |h: &str| headers.iter().position(|x| x.trim().eq_ignore_ascii_case(h));
    let term_col = col("term").ok_or_else(|| Error::parse(origin, 1, "missing column \"term\""))?;
    let mut fcols = [0usize; 5];
    for (slot, f) in fcols.iter_mut().zip(FOUNDATIONS) {
        *slot = col(f.as_str()).ok_or_else(|| Error::parse(origin, 1, format!("missing column {:?}", f.as_str())))?;
    }
    let aux_idx: Vec<usize> = (0..headers.len())
        .filter(|i| *i != term_col && !fcols.contains(i))
        .collect();
    let aux_columns = aux_idx.iter().map(|&i| headers[i].to_string()).collect();

    let mut entries = Vec::new();
    let mut aux = Vec::new();
    let mut lines_of = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(origin, e))?;
        let lineno = rec.position().map_or(0, |p| p.line() as usize);
        let mut probs = [0.0; 5];
        for (p, &c) in probs.iter_mut().zip(&fcols) {
            let raw = rec.get(c).unwrap_or("").trim();
            *p = raw
                .parse::<f64>()
                .map_err(|_| Error::parse(origin, lineno, format!("bad probability {raw:?}")))?;
            if !(0.0..=1.0).contains(p) {
                return Err(Error::parse(origin, lineno, format!("probability {raw} outside [0, 1]")));
            }
        }
        let (term, wildcard) = split_term(rec.get(term_col).unwrap_or(""));
        entries.push(LexiconEntry {
            term,
            wildcard,
            value: EntryValue::Probability(probs),
        });
        aux.push(aux_idx.iter().map(|&i| rec.get(i).unwrap_or("").to_string()).collect());
        lines_of.push(lineno);
    }
    Lexicon::build(name.to_string(), LexiconKind::Probability, entries, aux_columns, aux)
        .map_err(|(i, term, reason)| Error::parse(origin, lines_of[i], format!("{term}: {reason}")))
}

/// Attaches the line number when the csv reader knows it.
pub(crate) fn csv_error(origin: &str, e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::parse(origin, pos.line() as usize, e.to_string()),
        None => Error::Csv(e),
    }
}

pub fn write_lexicon(lex: &Lexicon, path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_lexicon_to(lex, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_lexicon_to(lex: &Lexicon, mut w: impl Write) -> Result<()> {
    match lex.kind {
        LexiconKind::Count => {
            for e in &lex.entries {
                if let EntryValue::Count { foundation, polarity } = e.value {
                    match polarity {
                        Some(p) => writeln!(w, "{}\t{}\t{}", e.display_term(), foundation, p.as_str())?,
                        None => writeln!(w, "{}\t{}", e.display_term(), foundation)?,
                    }
                }
            }
        }
        LexiconKind::Probability => {
            let mut wtr = csv::Writer::from_writer(&mut w);
            let mut header = vec!["term".to_string()];
            header.extend(FOUNDATIONS.iter().map(|f| f.as_str().to_string()));
            header.extend(lex.aux_columns.iter().cloned());
            wtr.write_record(&header)?;
            for (e, aux) in lex.entries.iter().zip(&lex.aux) {
                if let EntryValue::Probability(p) = e.value {
                    let mut row = vec![e.display_term()];
                    row.extend(p.iter().map(|v| v.to_string()));
                    row.extend(aux.iter().cloned());
                    wtr.write_record(&row)?;
                }
            }
            wtr.flush()?;
        }
    }
    Ok(())
}

/// Per-term sentiment in [0, 1], produced by an external sentiment model.
#[derive(Debug, Clone, Default)]
pub struct SentimentScores(HashMap<String, f64>);

impl SentimentScores {
    pub fn get(&self, term: &str) -> Option<f64> {
        self.0.get(term).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(String, f64)> for SentimentScores {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// TSV `term<TAB>score`.
pub fn load_sentiment(path: impl AsRef<Path>) -> Result<SentimentScores> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut map = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (term, score) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(&origin, i + 1, "expected term<TAB>score"))?;
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|_| Error::parse(&origin, i + 1, format!("bad score {score:?}")))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::parse(&origin, i + 1, format!("score {score} outside [0, 1]")));
        }
        if map.insert(term.trim().to_lowercase(), score).is_some() {
            return Err(Error::parse(&origin, i + 1, format!("duplicate term {term:?}")));
        }
    }
    Ok(SentimentScores(map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use FoundationLabel::*;

    fn count_lex(rows: &[(&str, FoundationLabel)]) -> Lexicon {
        let entries = rows
            .iter()
            .map(|&(t, f)| {
                let (term, wildcard) = split_term(t);
                LexiconEntry {
                    term,
                    wildcard,
                    value: EntryValue::Count { foundation: f, polarity: Option::None },
                }
            })
            .collect();
        Lexicon::new("mfd", LexiconKind::Count, entries).unwrap()
    }

    fn prob_lex(rows: &[(&str, [f64; 5])]) -> Lexicon {
        let entries = rows
            .iter()
            .map(|&(t, p)| LexiconEntry {
                term: t.into(),
                wildcard: false,
                value: EntryValue::Probability(p),
            })
            .collect();
        Lexicon::new("emfd", LexiconKind::Probability, entries).unwrap()
    }

    fn toks(t: &[&str]) -> TokenSequence {
        TokenSequence::pretokenized(t.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn count_majority_tie_and_none() {
        let lex = count_lex(&[("harm", Care), ("cheat", Fairness)]);
        let p = score_count("d", &toks(&["harm", "harm", "cheat"]), &lex).unwrap();
        assert_eq!(p.labels.iter().copied().collect::<Vec<_>>(), [Care]);
        let s = p.scores.unwrap();
        assert_eq!(s[&Care], 2.0);
        assert_eq!(s[&Fairness], 1.0);

        let p = score_count("d", &toks(&["harm", "cheat"]), &lex).unwrap();
        assert_eq!(p.labels.iter().copied().collect::<Vec<_>>(), [Care, Fairness]);

        let p = score_count("d", &toks(&["sky", "blue"]), &lex).unwrap();
        assert_eq!(p.labels.iter().copied().collect::<Vec<_>>(), [FoundationLabel::None]);
        assert!(score_prob("d", &toks(&["harm"]), &lex).is_err());
    }

    #[test]
    fn probability_sums() {
        let lex = prob_lex(&[("w1", [0.6, 0.1, 0.0, 0.0, 0.0]), ("w2", [0.2, 0.5, 0.0, 0.0, 0.0])]);
        let p = score_prob("d", &toks(&["w1", "w2"]), &lex).unwrap();
        assert_eq!(p.labels.iter().copied().collect::<Vec<_>>(), [Care]);
        let s = p.scores.unwrap();
        assert!((s[&Care] - 0.8).abs() < 1e-12 && (s[&Fairness] - 0.6).abs() < 1e-12);

        let p = score_prob("d", &toks(&["zzz"]), &lex).unwrap();
        assert_eq!(p.labels.iter().copied().collect::<Vec<_>>(), [FoundationLabel::None]);

        let lex = prob_lex(&[("a", [0.5, 0.25, 0.0, 0.0, 0.0]), ("b", [0.0, 0.25, 0.0, 0.0, 0.0])]);
        let p = score_prob("d", &toks(&["a", "b"]), &lex).unwrap();
        assert_eq!(p.labels.iter().copied().collect::<Vec<_>>(), [Care, Fairness]);
    }

    #[test]
    fn wildcard_prefix_and_exact_precedence() {
        let lex = count_lex(&[("harm*", Care), ("harmon*", Sanctity), ("harmless", Fairness)]);
        assert_eq!(lex.lookup("harmful").map(|i| lex.entries()[i].term.as_str()), Some("harm"));
        assert_eq!(lex.lookup("harmony").map(|i| lex.entries()[i].term.as_str()), Some("harmon"));
        assert_eq!(lex.lookup("harmless").map(|i| lex.entries()[i].term.as_str()), Some("harmless"));
        assert_eq!(lex.lookup("ha"), Option::None);
        assert_eq!(lex.terms().collect::<Vec<_>>(), ["harmless"]);
    }

    #[test]
    fn count_file_parsing() {
        let lex = read_count_lexicon("harm\tcare\n".as_bytes(), "x", "mem").unwrap();
        assert_eq!(lex.len(), 1);

        let err = read_count_lexicon("harm\tcare\n# c\n\nharm\tfairness\n".as_bytes(), "x", "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");

        let err = read_count_lexicon("a\tcare\nb\tjustice\n".as_bytes(), "x", "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = read_count_lexicon("a care\n".as_bytes(), "x", "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = read_count_lexicon("a\tcare\tgood\n".as_bytes(), "x", "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn probability_file_parsing() {
        let ok = "term,care,fairness,loyalty,authority,sanctity,sentiment\nkill,0.9,0.1,0,0,0.2,-0.8\n";
        let lex = read_prob_lexicon(ok.as_bytes(), "e", "mem").unwrap();
        assert_eq!(lex.len(), 1);
        let mut buf = Vec::new();
        write_lexicon_to(&lex, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), ok);

        let bad = "term,care,fairness,loyalty,authority,sanctity\nok,0,0,0,0,0\nkill,1.2,0,0,0,0\n";
        let err = read_prob_lexicon(bad.as_bytes(), "e", "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");

        let missing = "term,care,fairness\nx,0,0\n";
        assert!(read_prob_lexicon(missing.as_bytes(), "e", "mem").is_err());
    }

    #[test]
    fn polarity_from_sentiment() {
        let lex = count_lex(&[("关爱", Care), ("伤害", Care)]);
        let sent: SentimentScores = [("关爱".to_string(), 0.93), ("伤害".to_string(), 0.5 - 1e-9)].into_iter().collect();
        let lex = lex.with_polarity(&sent).unwrap();
        let pol: Vec<_> = lex
            .entries()
            .iter()
            .map(|e| match e.value {
                EntryValue::Count { polarity, .. } => polarity,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(pol, [Some(Polarity::Virtue), Some(Polarity::Vice)]);
    }

    fn arb_prob_instance() -> impl Strategy<Value = (Vec<[f64; 5]>, Vec<usize>)> {
        let probs = proptest::collection::vec(proptest::array::uniform5(0.0f64..=1.0), 1..8);
        probs.prop_flat_map(|p| {
            let n = p.len();
            (Just(p), proptest::collection::vec(0..n + 2, 0..30))
        })
    }

    fn build((probs, idx): &(Vec<[f64; 5]>, Vec<usize>)) -> (Lexicon, TokenSequence) {
        let rows: Vec<(String, [f64; 5])> = probs.iter().enumerate().map(|(i, p)| (format!("w{i}"), *p)).collect();
        let rows_ref: Vec<(&str, [f64; 5])> = rows.iter().map(|(t, p)| (t.as_str(), *p)).collect();
        let tokens: Vec<String> = idx.iter().map(|i| format!("w{i}")).collect();
        (prob_lex(&rows_ref), TokenSequence::pretokenized(tokens))
    }

    proptest! {
        #[test]
        fn scores_are_order_invariant(inst in arb_prob_instance(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let (lex, tokens) = build(&inst);
            let mut shuffled = tokens.tokens.clone();
            shuffled.shuffle(&mut crate::corpus::rng(seed));
            let a = score_prob("d", &tokens, &lex).unwrap();
            let b = score_prob("d", &TokenSequence::pretokenized(shuffled), &lex).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn duplicating_doubles_scores(inst in arb_prob_instance()) {
            let (lex, tokens) = build(&inst);
            let doubled = TokenSequence::pretokenized([tokens.tokens.clone(), tokens.tokens.clone()].concat());
            let a = score_prob("d", &tokens, &lex).unwrap();
            let b = score_prob("d", &doubled, &lex).unwrap();
            prop_assert_eq!(&a.labels, &b.labels);
            for (f, v) in a.scores.unwrap() {
                prop_assert_eq!(b.scores.as_ref().unwrap()[&f], 2.0 * v);
            }
        }

        #[test]
        fn appending_a_match_is_monotone(inst in arb_prob_instance(), extra in 0usize..8) {
            let (lex, tokens) = build(&inst);
            let word = format!("w{}", extra % inst.0.len());
            let mut longer = tokens.tokens.clone();
            longer.push(word.clone());
            let before = lexicon_score(&tokens, &lex).per_foundation;
            let after = lexicon_score(&TokenSequence::pretokenized(longer), &lex).per_foundation;
            let i = lex.lookup(&word).unwrap();
            let EntryValue::Probability(p) = lex.entries()[i].value else { unreachable!() };
            for (k, f) in FOUNDATIONS.iter().enumerate() {
                prop_assert!(after[f] >= before[f]);
                if p[k] == 0.0 {
                    prop_assert_eq!(after[f], before[f]);
                }
            }
        }

        #[test]
        fn power_of_two_scaling_keeps_labels((probs, idx) in arb_prob_instance(), k in -3i32..=0) {
            let c = 2f64.powi(k);
            let scaled: Vec<[f64; 5]> = probs.iter().map(|p| p.map(|v| v * c)).collect();
            let (a_lex, tokens) = build(&(probs, idx.clone()));
            let (b_lex, _) = build(&(scaled, idx));
            prop_assert_eq!(
                score_prob("d", &tokens, &a_lex).unwrap().labels,
                score_prob("d", &tokens, &b_lex).unwrap().labels
            );
        }

        #[test]
        fn count_files_round_trip(rows in proptest::collection::btree_map("[a-z]{1,8}\\*?", (0usize..5, proptest::option::of(any::<bool>())), 0..20)) {
            let mut text = String::new();
            let mut seen = std::collections::HashSet::new();
            for (term, (f, pol)) in &rows {
                if !seen.insert(term.clone()) { continue; }
                text.push_str(term);
                text.push('\t');
                text.push_str(FOUNDATIONS[*f].as_str());
                if let Some(v) = pol {
                    text.push_str(if *v { "\tvirtue" } else { "\tvice" });
                }
                text.push('\n');
            }
            let lex = read_count_lexicon(text.as_bytes(), "x", "mem").unwrap();
            let mut buf = Vec::new();
            write_lexicon_to(&lex, &mut buf).unwrap();
            let back = read_count_lexicon(&buf[..], "x", "mem").unwrap();
            prop_assert_eq!(lex, back);
        }
    }
}
