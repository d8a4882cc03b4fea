//! Remote LLM annotation and machine translation.

mod client;
mod parse;
mod prompt;
mod transport;
mod translate;

pub use client::{Annotation, LlmClient, Outcome};
pub use parse::{parse_labels, parse_response, scan_names, ParseOutcome, ParsedResponse, MAX_LABELS};
pub use prompt::{
    build_prompt, format_reply, system_prompt, ChatMessage, Decoding, PromptBuilder, PromptBundle, PromptLanguage,
    Role, Shot, DEFAULT_CULTURE, DEFAULT_SHOTS,
};
pub use transport::{block_on, AuditLog, EndpointConfig};
pub use translate::{default_cache_path, Translator, DEFAULT_CHUNK};
