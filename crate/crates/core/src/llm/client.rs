use std::sync::Arc;

use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::parse::{parse_labels, ParseOutcome};
use super::prompt::PromptBundle;
use super::transport::{AuditLog, EndpointConfig, Transport};
use crate::corpus::{Document, Prediction};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Parsed,
    Repaired,
    Unparsed,
    /// The request itself failed after retries.
    Failed,
}

impl From<ParseOutcome> for Outcome {
    fn from(p: ParseOutcome) -> Self {
        match p {
            ParseOutcome::Parsed => Self::Parsed,
            ParseOutcome::Repaired => Self::Repaired,
            ParseOutcome::Unparsed => Self::Unparsed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub prediction: Prediction,
    pub outcome: Outcome,
    /// Model text, when a response was received.
    pub raw: Option<String>,
    pub error: Option<String>,
    pub attempts: u32,
    pub truncated: bool,
}

/// Chat-completion client. Safe to share across tasks.
#[derive(Debug, Clone)]
pub struct LlmClient {
    transport: Transport,
}

impl LlmClient {
    pub fn new(config: EndpointConfig) -> Result<Self> {
        Ok(Self {
            transport: Transport::new(config, None)?,
        })
    }

    pub fn with_audit(config: EndpointConfig, audit: Arc<AuditLog>) -> Result<Self> {
        Ok(Self {
            transport: Transport::new(config, Some(audit))?,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.transport.config
    }

    pub fn request_body(&self, bundle: &PromptBundle) -> Value {
        json!({
            "model": self.transport.config.model,
            "messages": bundle.messages(),
            "temperature": bundle.decoding.temperature,
            "max_tokens": bundle.decoding.max_tokens,
        })
    }

    /// Classifies one prompt. Errors only on auth rejection.
    pub async fn annotate(&self, bundle: &PromptBundle, approach: &str) -> Result<Annotation> {
        let body = self.request_body(bundle);
        let ex = self.transport.post("chat", &bundle.target_id, &body).await?;
        let content = ex.body.and_then(|text| {
            let v: Value = serde_json::from_str(&text).map_err(|e| format!("response is not JSON: {e}"))?;
            v.pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| "response has no choices[0].message.content".to_string())
        });
        Ok(match content {
            Ok(text) => {
                let parsed = parse_labels(&text);
                let outcome = parsed.outcome.into();
                let truncated = parsed.truncated;
                if outcome == Outcome::Unparsed {
                    log::warn!("{}: unparseable response", bundle.target_id);
                }
                Annotation {
                    prediction: parsed.into_prediction(&bundle.target_id, approach),
                    outcome,
                    raw: Some(text),
                    error: None,
                    attempts: ex.attempts,
                    truncated,
                }
            }
            Err(msg) => {
                log::error!("{}: request failed after {} attempt(s): {msg}", bundle.target_id, ex.attempts);
                Annotation {
                    prediction: Prediction::unknown(&bundle.target_id, approach),
                    outcome: Outcome::Failed,
                    raw: None,
                    error: Some(msg),
                    attempts: ex.attempts,
                    truncated: false,
                }
            }
        })
    }

    /// One annotation per document, in input order, with at most
    /// `max_parallel` requests in flight. Prompt construction errors and
    /// auth rejections abort the batch.
    pub async fn classify_batch<F>(&self, docs: &[Document], bundle: F, approach: &str) -> Result<Vec<Annotation>>
    where
        F: Fn(&Document) -> Result<PromptBundle>,
    {
        let bundles = docs.iter().map(&bundle).collect::<Result<Vec<_>>>()?;
        stream::iter(bundles.iter())
            .map(|b| self.annotate(b, approach))
            .buffered(self.transport.config.max_parallel)
            .try_collect()
            .await
    }
}
