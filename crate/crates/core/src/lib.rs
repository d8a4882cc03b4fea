//! Cross-lingual moral foundation measurement: lexicon and embedding
//! scorers, an LLM annotation client, and the lenient evaluation protocol
//! used to compare them on labeled benchmarks.

pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod lexicon;
pub mod llm;
pub mod segment;

pub use error::{Error, Result};
