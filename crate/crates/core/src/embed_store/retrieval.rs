use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::datastore::{Datastore, SplitFilter};
use super::vector::{cosine_raw, EmbeddingVector, VectorTable};
use super::StoreError;

/// One ranked retrieval result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub target_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Descending score, then ascending id.
fn hit_order(a: (f64, &str), b: (f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

fn check_query(store: &Datastore, query: &EmbeddingVector) -> Result<(), StoreError> {
    if query.dim() != store.dim() {
        return Err(StoreError::DimensionMismatch {
            expected: store.dim(),
            found: query.dim(),
        });
    }
    if query.norm() == 0.0 {
        return Err(StoreError::DegenerateEmbedding);
    }
    Ok(())
}

/// Exact top-`m` over `candidates` (id, embedding row) pairs.
fn top_m<'a>(
    table: &VectorTable,
    query: &EmbeddingVector,
    candidates: impl Iterator<Item = (&'a str, usize)>,
    m: usize,
) -> Vec<RetrievalHit> {
    let q = query.values();
    let qn = query.norm();
    let mut scored: Vec<(f64, &str)> = candidates
        .map(|(id, row)| (cosine_raw(q, qn, table.row(row), table.norm(row)), id))
        .collect();
    let cmp = |a: &(f64, &str), b: &(f64, &str)| hit_order(*a, *b);
    if m == 0 {
        return Vec::new();
    }
    if scored.len() > m {
        scored.select_nth_unstable_by(m - 1, cmp);
        scored.truncate(m);
    }
    scored.sort_unstable_by(cmp);
    scored
        .into_iter()
        .enumerate()
        .map(|(i, (score, id))| RetrievalHit {
            target_id: id.to_string(),
            score,
            rank: i + 1,
        })
        .collect()
}

/// Top-`m` captions by cosine to `query`, restricted to `splits`.
pub fn retrieve_captions(
    store: &Datastore,
    query: &EmbeddingVector,
    m: usize,
    splits: &SplitFilter,
) -> Result<Vec<RetrievalHit>, StoreError> {
    check_query(store, query)?;
    let candidates = store
        .captions()
        .iter()
        .filter(|c| splits.allows(c.split))
        .map(|c| (c.caption_id.as_str(), c.embedding_row));
    Ok(top_m(store.caption_vectors(), query, candidates, m))
}

/// Top-`m` images by cosine to `query`, restricted to `splits`.
pub fn retrieve_images(
    store: &Datastore,
    query: &EmbeddingVector,
    m: usize,
    splits: &SplitFilter,
) -> Result<Vec<RetrievalHit>, StoreError> {
    check_query(store, query)?;
    let candidates = store
        .images()
        .iter()
        .filter(|i| splits.allows(i.split))
        .map(|i| (i.image_id.as_str(), i.embedding_row));
    Ok(top_m(store.image_vectors(), query, candidates, m))
}

/// The image's own captions ranked by cosine to the image embedding.
pub fn rank_captions_of_image(store: &Datastore, image_id: &str) -> Result<Vec<RetrievalHit>, StoreError> {
    let img = store.image(image_id)?;
    let query = store.image_embedding(image_id)?;
    let captions = img
        .caption_ids
        .iter()
        .map(|cid| store.caption(cid).map(|c| (c.caption_id.as_str(), c.embedding_row)))
        .collect::<Result<Vec<_>, _>>()?;
    let n = captions.len();
    Ok(top_m(store.caption_vectors(), &query, captions.into_iter(), n))
}
