use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::label::FoundationLabel;
use crate::error::{Error, Result};

/// A labeled document. `tokens` carries an optional external segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub language: String,
    #[serde(rename = "label")]
    pub gold: FoundationLabel,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        language: impl Into<String>,
        gold: FoundationLabel,
        source: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            language: language.into(),
            gold,
            source: source.into(),
            tokens: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::InvalidRecord {
                record: self.id.clone(),
                reason: "empty text".into(),
            });
        }
        if matches!(self.gold, FoundationLabel::None | FoundationLabel::Unknown) {
            return Err(Error::InvalidRecord {
                record: self.id.clone(),
                reason: format!("{} is not a valid gold label", self.gold),
            });
        }
        Ok(())
    }
}

/// An immutable, validated collection of documents with a cached class
/// histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    documents: Vec<Document>,
    class_counts: BTreeMap<FoundationLabel, usize>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            doc.validate()?;
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        let class_counts = histogram(&documents);
        Ok(Self {
            name: name.into(),
            documents,
            class_counts,
        })
    }

    /// Builds a dataset from documents already known to be valid and unique
    /// (e.g. a subset of another dataset).
    pub(crate) fn from_subset(name: impl Into<String>, documents: Vec<Document>) -> Self {
        let class_counts = histogram(&documents);
        Self {
            name: name.into(),
            documents,
            class_counts,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn class_counts(&self) -> &BTreeMap<FoundationLabel, usize> {
        &self.class_counts
    }

    pub fn count(&self, label: FoundationLabel) -> usize {
        self.class_counts.get(&label).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    pub fn ids(&self) -> HashSet<&str> {
        self.documents.iter().map(|d| d.id.as_str()).collect()
    }
}

pub(crate) fn histogram(docs: &[Document]) -> BTreeMap<FoundationLabel, usize> {
    let mut counts = BTreeMap::new();
    for d in docs {
        *counts.entry(d.gold).or_insert(0) += 1;
    }
    counts
}
