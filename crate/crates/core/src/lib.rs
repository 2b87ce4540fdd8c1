//! Training-free, retrieval-augmented captioning for remote sensing imagery.
//!
//! The pipeline for one query image:
//!
//! 1. [`embed_store`]: retrieve similar captions and similar images from an
//!    embedding datastore by exact cosine similarity.
//! 2. [`prompt_forge::assemble_pool`]: gather the candidate pool (retrieved
//!    captions, similar images with their gold and similar captions).
//! 3. [`graph_rank`]: re-rank the pool with personalized PageRank over a
//!    fully connected similarity graph.
//! 4. [`prompt_forge`]: pick a repetition-free set of input captions and
//!    few-shot examples and render the prompt.
//! 5. [`lm_gateway`]: obtain a caption from a chat-completion service or a
//!    deterministic mock.
//! 6. [`metrics`]: score captions (BLEU, CIDEr-D, RefSigLIPScore) and analyse
//!    prompt/reference overlap.

pub mod embed_store;
pub mod graph_rank;
pub mod language;
pub mod lm_gateway;
pub mod metrics;
pub mod pipeline;
pub mod prompt_forge;
pub mod synthetic;

pub use embed_store::Datastore;
pub use language::Language;
