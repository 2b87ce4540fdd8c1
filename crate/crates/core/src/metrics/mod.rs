//! Caption-quality metrics and prompt diagnostics.

mod bleu;
mod cider;
mod overlap;
mod refscore;
mod report;
mod tokenize;

use thiserror::Error;

pub use bleu::bleu;
pub use cider::{cider_d, cider_d_items};
pub use overlap::{ngram_overlap, prompt_attribution, set_overlap, AttributionCounts};
pub use refscore::ref_siglip_score;
pub use report::{
    render_attribution_table, render_overlap_table, render_report, render_score_table, score_corpus, LanguageScores,
    MetricReport, OverlapScores,
};
pub use tokenize::{tokenize, TokenizedCaption};

use crate::embed_store::StoreError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("{candidates} candidates but {references} reference sets")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("n-gram order must be positive, got {0}")]
    InvalidOrder(usize),
    #[error("item {0} has no references")]
    MissingReferences(usize),
    #[error("invalid embedding: {0}")]
    Embedding(#[from] StoreError),
}
