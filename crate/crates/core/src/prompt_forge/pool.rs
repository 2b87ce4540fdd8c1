//! Candidate pool assembly.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::normalize_text;
use crate::embed_store::{
    rank_captions_of_image, retrieve_captions, retrieve_images, Datastore, EmbeddingVector, SplitFilter, StoreError,
};

/// A caption in the pool.
///
/// `similarity` is the cosine to the anchor the caption was retrieved for:
/// the query image for retrieved captions, the similar image for its gold
/// and similar captions. `rank_score` is set once the pool is re-ranked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolCaption {
    pub caption_id: String,
    pub text: String,
    pub similarity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_score: Option<f64>,
}

impl PoolCaption {
    /// The score the current ordering is based on.
    pub fn score(&self) -> f64 {
        self.rank_score.unwrap_or(self.similarity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolImage {
    pub image_id: String,
    pub similarity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_score: Option<f64>,
    /// Captions retrieved against this image's embedding.
    pub similar_captions: Vec<PoolCaption>,
    /// The image's own captions, ranked by similarity to the image, minus
    /// any that duplicate a retrieved caption of the query.
    pub gold_captions: Vec<PoolCaption>,
}

impl PoolImage {
    pub fn score(&self) -> f64 {
        self.rank_score.unwrap_or(self.similarity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub query_id: String,
    pub retrieved_captions: Vec<PoolCaption>,
    pub similar_images: Vec<PoolImage>,
}

/// Which scores determine the pool's current order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolOrdering {
    Similarity,
    PageRank,
}

/// A pool in its final order, ready for prompt selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReRankedPool {
    pub ordering: PoolOrdering,
    pub pool: CandidatePool,
}

impl ReRankedPool {
    /// Keeps the retrieval (similarity) order untouched.
    pub fn by_similarity(pool: CandidatePool) -> Self {
        Self {
            ordering: PoolOrdering::Similarity,
            pool,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub pool_size: usize,
    pub splits: SplitFilter,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            pool_size: 10,
            splits: SplitFilter::train_only(),
        }
    }
}

fn to_pool_captions(
    store: &Datastore,
    hits: impl IntoIterator<Item = crate::embed_store::RetrievalHit>,
) -> Result<Vec<PoolCaption>, StoreError> {
    hits.into_iter()
        .map(|h| {
            let rec = store.caption(&h.target_id)?;
            Ok(PoolCaption {
                caption_id: h.target_id,
                text: rec.text.clone(),
                similarity: h.score,
                rank_score: None,
            })
        })
        .collect()
}

/// Builds the candidate pool for one query image.
///
/// If `query_id` names an image in the store, that image and its own captions
/// never enter the pool. Lists are shorter than `pool_size` when the store
/// is too small; that is not an error.
pub fn assemble_pool(
    store: &Datastore,
    query_id: &str,
    query: &EmbeddingVector,
    config: &PoolConfig,
) -> Result<CandidatePool, StoreError> {
    let m = config.pool_size;
    let own_captions: HashSet<&str> = store
        .image(query_id)
        .map(|img| img.caption_ids.iter().map(String::as_str).collect())
        .unwrap_or_default();

    let caption_hits = retrieve_captions(store, query, m + own_captions.len(), &config.splits)?;
    let retrieved = to_pool_captions(
        store,
        caption_hits
            .into_iter()
            .filter(|h| !own_captions.contains(h.target_id.as_str()))
            .take(m),
    )?;
    let retrieved_texts: HashSet<String> = retrieved.iter().map(|c| normalize_text(&c.text)).collect();

    let image_hits = retrieve_images(store, query, m + 1, &config.splits)?;
    let mut similar_images = Vec::with_capacity(m);
    for hit in image_hits.into_iter().filter(|h| h.target_id != query_id).take(m) {
        let image_emb = store.image_embedding(&hit.target_id)?;
        let similar = to_pool_captions(
            store,
            retrieve_captions(store, &image_emb, m + own_captions.len(), &config.splits)?
                .into_iter()
                .filter(|h| !own_captions.contains(h.target_id.as_str()))
                .take(m),
        )?;
        let gold = to_pool_captions(store, rank_captions_of_image(store, &hit.target_id)?)?
            .into_iter()
            .filter(|c| !retrieved_texts.contains(&normalize_text(&c.text)))
            .collect();
        similar_images.push(PoolImage {
            image_id: hit.target_id,
            similarity: hit.score,
            rank_score: None,
            similar_captions: similar,
            gold_captions: gold,
        });
    }

    Ok(CandidatePool {
        query_id: query_id.to_string(),
        retrieved_captions: retrieved,
        similar_images,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed_store::Split;
    use crate::synthetic::{generate_store, StoreBuilder, SyntheticConfig};

    #[test]
    fn default_sizes_on_a_large_store() {
        let store = generate_store(&SyntheticConfig {
            images: 40,
            ..Default::default()
        })
        .unwrap();
        let q = store.images().iter().find(|i| i.split == Split::Test).unwrap();
        let emb = store.image_embedding(&q.image_id).unwrap();
        let pool = assemble_pool(&store, &q.image_id, &emb, &PoolConfig::default()).unwrap();
        assert_eq!(pool.retrieved_captions.len(), 10);
        assert_eq!(pool.similar_images.len(), 10);
        for img in &pool.similar_images {
            assert_eq!(img.similar_captions.len(), 10);
            assert!(store.image(&img.image_id).unwrap().split == Split::Train);
        }
        let sims: Vec<f64> = pool.retrieved_captions.iter().map(|c| c.similarity).collect();
        assert!(sims.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn small_store_truncates_and_excludes_query() {
        let mut b = StoreBuilder::new(2);
        b.image("a", Split::Train, &[1.0, 0.0])
            .caption("a0", "a", "a plane", &[1.0, 0.2])
            .caption("a1", "a", "a runway", &[1.0, 0.4])
            .image("b", Split::Train, &[0.0, 1.0])
            .caption("b0", "b", "a river", &[0.1, 1.0])
            .image("q", Split::Train, &[1.0, 0.1])
            .caption("q0", "q", "the query caption", &[1.0, 0.1]);
        let store = b.build().unwrap();
        let emb = store.image_embedding("q").unwrap();
        let pool = assemble_pool(&store, "q", &emb, &PoolConfig::default()).unwrap();
        assert_eq!(pool.retrieved_captions.len(), 3);
        assert!(pool.retrieved_captions.iter().all(|c| c.caption_id != "q0"));
        let ids: Vec<&str> = pool.similar_images.iter().map(|i| i.image_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }

    #[test]
    fn gold_captions_duplicating_retrieved_text_are_dropped() {
        let mut b = StoreBuilder::new(2);
        b.image("a", Split::Train, &[1.0, 0.0])
            .caption("a0", "a", "many  planes", &[0.0, 1.0])
            .caption("a1", "a", "a runway", &[1.0, 0.1])
            .image("c", Split::Train, &[0.0, 1.0])
            .caption("c0", "c", "many planes", &[1.0, 0.05])
            .image("q", Split::Test, &[1.0, 0.0]);
        // The test image needs a caption of its own to exist in metadata.
        b.caption("q0", "q", "query", &[1.0, 0.0]);
        let store = b.build().unwrap();
        let emb = store.image_embedding("q").unwrap();
        let config = PoolConfig {
            pool_size: 1,
            ..Default::default()
        };
        let pool = assemble_pool(&store, "q", &emb, &config).unwrap();
        assert_eq!(pool.retrieved_captions[0].caption_id, "c0");
        let a = &pool.similar_images[0];
        assert_eq!(a.image_id, "a");
        let gold: Vec<&str> = a.gold_captions.iter().map(|c| c.caption_id.as_str()).collect();
        assert_eq!(gold, ["a1"]);
    }
}
