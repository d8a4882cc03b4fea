use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, FoundationLabel};
use crate::error::{Error, Result};

const EN_TEMPLATE: &str = include_str!("../../prompts/en.txt");
const ZH_TEMPLATE: &str = include_str!("../../prompts/zh.txt");
const IT_TEMPLATE: &str = include_str!("../../prompts/it.txt");

pub const DEFAULT_CULTURE: &str = "Chinese";
pub const DEFAULT_SHOTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptLanguage {
    En,
    Zh,
    It,
}

impl PromptLanguage {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::En => "en",
            Self::Zh => "zh",
            Self::It => "it",
        }
    }

    /// The shipped template. The English one carries a `{culture}` slot.
    pub fn template(self) -> &'static str {
        match self {
            Self::En => EN_TEMPLATE,
            Self::Zh => ZH_TEMPLATE,
            Self::It => IT_TEMPLATE,
        }
    }
}

impl fmt::Display for PromptLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptLanguage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "en" => Ok(Self::En),
            "zh" => Ok(Self::Zh),
            "it" => Ok(Self::It),
            other => Err(Error::InvalidArgument(format!("unsupported prompt language {other:?}"))),
        }
    }
}

/// System prompt for `language`. `culture` fills the English template only.
pub fn system_prompt(language: PromptLanguage, culture: Option<&str>) -> String {
    match language {
        PromptLanguage::En => EN_TEMPLATE.replace("{culture}", culture.unwrap_or(DEFAULT_CULTURE)),
        other => other.template().to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_tokens: 256,
        }
    }
}

/// A worked example: the document text and the JSON reply the model should
/// imitate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub doc_id: String,
    pub language: String,
    pub text: String,
    pub reply: String,
}

#[derive(Serialize)]
struct Reply<'a> {
    rationale: &'a str,
    labels: String,
}

/// Serializes `{"rationale": ..., "labels": ...}` in that key order; a
/// single label is a string, several are comma-joined.
pub fn format_reply(rationale: &str, labels: &[FoundationLabel]) -> String {
    let labels = labels.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(", ");
    serde_json::to_string(&Reply { rationale, labels }).expect("reply serializes")
}

impl Shot {
    pub fn from_document(doc: &Document, rationale: &str) -> Self {
        Self {
            doc_id: doc.id.clone(),
            language: doc.language.clone(),
            text: doc.text.clone(),
            reply: format_reply(rationale, &[doc.gold]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub shots: Vec<Shot>,
    pub target_id: String,
    pub target: String,
    pub decoding: Decoding,
}

impl PromptBundle {
    /// System message, one user/assistant pair per shot, then the target.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(2 + 2 * self.shots.len());
        out.push(ChatMessage {
            role: Role::System,
            content: self.system.clone(),
        });
        for s in &self.shots {
            out.push(ChatMessage {
                role: Role::User,
                content: s.text.clone(),
            });
            out.push(ChatMessage {
                role: Role::Assistant,
                content: s.reply.clone(),
            });
        }
        out.push(ChatMessage {
            role: Role::User,
            content: self.target.clone(),
        });
        out
    }

    pub fn shot_ids(&self) -> impl Iterator<Item = &str> {
        self.shots.iter().map(|s| s.doc_id.as_str())
    }
}

/// Builds bundles for a fixed language and shot list. Construction fails if
/// any shot id belongs to the evaluation set.
#[derive(Debug, Clone)]
pub struct PromptBuilder {
    language: PromptLanguage,
    system: String,
    shots: Vec<Shot>,
    shot_ids: HashSet<String>,
    decoding: Decoding,
}

impl PromptBuilder {
    pub fn new<'a>(
        language: PromptLanguage,
        culture: Option<&str>,
        shots: Vec<Shot>,
        evaluation_ids: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let shot_ids: HashSet<String> = shots.iter().map(|s| s.doc_id.clone()).collect();
        if shot_ids.len() != shots.len() {
            return Err(Error::InvalidArgument("duplicate few-shot exemplar id".into()));
        }
        for id in evaluation_ids {
            if shot_ids.contains(id) {
                return Err(Error::ShotLeakage(id.to_string()));
            }
        }
        Ok(Self {
            language,
            system: system_prompt(language, culture),
            shots,
            shot_ids,
            decoding: Decoding::default(),
        })
    }

    pub fn with_decoding(mut self, decoding: Decoding) -> Self {
        self.decoding = decoding;
        self
    }

    pub fn language(&self) -> PromptLanguage {
        self.language
    }

    pub fn shots(&self) -> &[Shot] {
        &self.shots
    }

    pub fn build(&self, doc: &Document) -> Result<PromptBundle> {
        if self.shot_ids.contains(&doc.id) {
            return Err(Error::ShotLeakage(doc.id.clone()));
        }
        if let Some(s) = self.shots.iter().find(|s| s.language != doc.language) {
            return Err(Error::InvalidArgument(format!(
                "shot {} is in language {:?} but document {} is {:?}",
                s.doc_id, s.language, doc.id, doc.language
            )));
        }
        Ok(PromptBundle {
            system: self.system.clone(),
            shots: self.shots.clone(),
            target_id: doc.id.clone(),
            target: doc.text.clone(),
            decoding: self.decoding,
        })
    }
}

/// One-off bundle; `evaluation_ids` guards against leakage.
pub fn build_prompt<'a>(
    doc: &Document,
    language: PromptLanguage,
    shots: Vec<Shot>,
    evaluation_ids: impl IntoIterator<Item = &'a str>,
) -> Result<PromptBundle> {
    PromptBuilder::new(language, None, shots, evaluation_ids)?.build(doc)
}
