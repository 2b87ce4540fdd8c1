//! Reference-augmented embedding score.

use super::MetricError;
use crate::embed_store::{cosine_similarity, EmbeddingVector};

/// Harmonic mean of the caption's clipped cosine to the image and its best
/// clipped cosine to any reference caption. Lies in `[0, 1]`.
pub fn ref_siglip_score(
    caption: &EmbeddingVector,
    image: &EmbeddingVector,
    references: &[EmbeddingVector],
) -> Result<f64, MetricError> {
    if references.is_empty() {
        return Err(MetricError::MissingReferences(0));
    }
    let a = cosine_similarity(caption, image)?.max(0.0);
    let mut b: f64 = 0.0;
    for r in references {
        b = b.max(cosine_similarity(caption, r)?.max(0.0));
    }
    if a == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * a * b / (a + b)).clamp(0.0, 1.0))
}
