//! Candidate pool assembly, repetition-free prompt selection and prompt rendering.

mod pool;
mod render;
mod select;
mod spec;

use thiserror::Error;

pub use pool::{assemble_pool, CandidatePool, PoolCaption, PoolConfig, PoolImage, PoolOrdering, ReRankedPool};
pub use render::{render_baseline_prompt, render_caption_prompt, render_translation_prompt};
pub use select::{select_prompt_content, SelectedExample, Selection, SelectionWarning};
pub use spec::{build_prompt_spec, FewShotExample, PromptMode, PromptSpec};

use crate::embed_store::StoreError;
use crate::Language;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("insufficient candidates: need {needed} retrieved captions, pool has {available}")]
    InsufficientCandidates { needed: usize, available: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{0} caption combinations exceed the enumeration limit")]
    TooManyCombinations(u128),
    #[error("no {language} translation for gold caption {caption_id:?}")]
    MissingTranslation { caption_id: String, language: Language },
    #[error("invalid prompt spec: {0}")]
    InvalidSpec(String),
    #[error("empty caption")]
    EmptyCaption,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Canonical form used for duplicate detection: trimmed, internal whitespace
/// runs collapsed to one space, case preserved.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize_text("  a   plane\tis\n parked "), "a plane is parked");
        assert_ne!(normalize_text("A plane"), normalize_text("a plane"));
    }
}
