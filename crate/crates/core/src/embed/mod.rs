//! Embedding-based scoring: semantic similarity to per-foundation anchors
//! and FrameAxis micro-frame bias with bootstrap significance.

mod frameaxis;
mod similarity;
mod store;
pub mod vector;

pub use frameaxis::{
    build_microframes, build_null_model, frameaxis_score, null_sample_size, BackgroundSource,
    FrameAxisScore, FrameAxisScorer, MicroFrame, NullModel, DEFAULT_BOOTSTRAP, DEFAULT_Z_CRIT,
    MIN_BOOTSTRAP, SAMPLE_SIZE_RANGE,
};
pub use similarity::{semantic_similarity_score, SemanticAnchors};
pub use store::{load_vectors, read_vectors, write_vectors, write_vectors_to, EmbeddingStore};
