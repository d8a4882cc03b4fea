use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{FoundationLabel, Prediction, FOUNDATIONS};

/// Upper bound on foundations kept from one response.
pub const MAX_LABELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseOutcome {
    /// A JSON object with usable labels.
    Parsed,
    /// Labels recovered by scanning the text for foundation names.
    Repaired,
    /// Nothing usable; the prediction is `unknown`.
    Unparsed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    /// Labels in the order the model listed them, deduplicated and capped.
    pub labels: Vec<FoundationLabel>,
    pub rationale: Option<String>,
    pub outcome: ParseOutcome,
    pub truncated: bool,
}

impl ParsedResponse {
    pub fn into_prediction(self, doc_id: impl Into<String>, approach: impl Into<String>) -> Prediction {
        let p = Prediction::new(doc_id, self.labels, approach);
        match self.rationale {
            Some(r) => p.with_rationale(r),
            None => p,
        }
    }
}

/// Strict JSON pass, then a name-scan repair pass, then `unknown` with the
/// raw text kept as the rationale.
pub fn parse_labels(text: &str) -> ParsedResponse {
    if let Some((labels, rationale)) = strict(text) {
        let (labels, truncated) = cap(labels);
        return ParsedResponse {
            labels,
            rationale,
            outcome: ParseOutcome::Parsed,
            truncated,
        };
    }
    let found = scan_names(text);
    if !found.is_empty() {
        let (labels, truncated) = cap(found);
        return ParsedResponse {
            labels,
            rationale: Some(text.to_string()),
            outcome: ParseOutcome::Repaired,
            truncated,
        };
    }
    ParsedResponse {
        labels: vec![FoundationLabel::Unknown],
        rationale: Some(text.to_string()),
        outcome: ParseOutcome::Unparsed,
        truncated: false,
    }
}

pub fn parse_response(doc_id: &str, text: &str, approach: &str) -> Prediction {
    parse_labels(text).into_prediction(doc_id, approach)
}

fn cap(labels: Vec<FoundationLabel>) -> (Vec<FoundationLabel>, bool) {
    let mut out: Vec<FoundationLabel> = Vec::new();
    for l in labels {
        if !out.contains(&l) {
            out.push(l);
        }
    }
    let n_found = out.iter().filter(|l| l.is_foundation()).count();
    if n_found > MAX_LABELS {
        let kept: Vec<_> = out.into_iter().filter(|l| l.is_foundation()).take(MAX_LABELS).collect();
        return (kept, true);
    }
    (out, false)
}

fn json_candidates(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let body_start = after.find('\n').map_or(0, |i| i + 1);
        let Some(end) = after[body_start..].find("```") else { break };
        out.push(after[body_start..body_start + end].trim());
        rest = &after[body_start + end + 3..];
    }
    if let (Some(a), Some(b)) = (text.find('{'), text.rfind('}')) {
        if a < b {
            out.push(&text[a..=b]);
        }
    }
    out
}

fn strict(text: &str) -> Option<(Vec<FoundationLabel>, Option<String>)> {
    json_candidates(text).into_iter().find_map(|c| {
        let v: Value = serde_json::from_str(c).ok()?;
        let obj = v.as_object()?;
        let labels = labels_from_value(obj.get("labels")?)?;
        let rationale = obj.get("rationale").and_then(|r| match r {
            Value::String(s) => Some(s.clone()),
            Value::Null => None,
            other => Some(other.to_string()),
        });
        Some((labels, rationale))
    })
}

fn labels_from_value(v: &Value) -> Option<Vec<FoundationLabel>> {
    let mut parts = Vec::new();
    match v {
        Value::String(s) => parts.extend(split_labels(s)),
        Value::Array(items) => {
            for item in items {
                parts.extend(split_labels(item.as_str()?));
            }
        }
        _ => return None,
    }
    let labels = parts
        .into_iter()
        .map(|p| p.parse::<FoundationLabel>().ok().filter(|l| *l != FoundationLabel::NonMoral))
        .collect::<Option<Vec<_>>>()?;
    (!labels.is_empty()).then_some(labels)
}

fn split_labels(s: &str) -> Vec<&str> {
    s.split([',', ';', '/', '|', '&', '\n', '，', '、'])
        .flat_map(|p| p.split(" and "))
        .map(|p| p.trim().trim_matches(|c: char| c == '\'' || c == '"' || c == '.' || c.is_whitespace()))
        .filter(|p| !p.is_empty())
        .collect()
}

/// Foundation names occurring as whole words (ASCII case-insensitive), in
/// order of first appearance.
pub fn scan_names(text: &str) -> Vec<FoundationLabel> {
    let lower = text.to_ascii_lowercase();
    let mut hits: Vec<(usize, FoundationLabel)> = FOUNDATIONS
        .iter()
        .filter_map(|&f| find_word(&lower, f.as_str()).map(|pos| (pos, f)))
        .collect();
    hits.sort();
    hits.into_iter().map(|(_, f)| f).collect()
}

fn find_word(haystack: &str, word: &str) -> Option<usize> {
    let is_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
    haystack.match_indices(word).map(|(i, _)| i).find(|&i| {
        !is_word(haystack[..i].chars().next_back()) && !is_word(haystack[i + word.len()..].chars().next())
    })
}
