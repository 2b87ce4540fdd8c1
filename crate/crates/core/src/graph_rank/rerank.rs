use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{GraphError, GraphNode, NodeKind, RankGraph, RankScores};
use crate::embed_store::{cosine_similarity, Datastore, EmbeddingVector};
use crate::prompt_forge::{CandidatePool, PoolCaption, PoolOrdering, ReRankedPool};

/// Identity of a graph node. A caption that appears in several pool roles
/// maps to a single node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKey {
    Caption(String),
    Image(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeMap {
    index: HashMap<NodeKey, usize>,
}

impl NodeMap {
    pub fn get(&self, key: &NodeKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn insert(&mut self, key: NodeKey, node: usize) {
        self.index.insert(key, node);
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    fn caption(&self, id: &str) -> Result<usize, GraphError> {
        self.get(&NodeKey::Caption(id.to_string()))
            .ok_or_else(|| GraphError::Unmapped(format!("caption {id:?}")))
    }

    fn image(&self, id: &str) -> Result<usize, GraphError> {
        self.get(&NodeKey::Image(id.to_string()))
            .ok_or_else(|| GraphError::Unmapped(format!("image {id:?}")))
    }
}

/// Turns every pool element into a graph node.
///
/// Node order: retrieved captions, then for each similar image the image
/// itself, its gold captions and its similar captions. Repeated captions
/// keep their first node.
pub fn pool_graph(
    store: &Datastore,
    query: &EmbeddingVector,
    pool: &CandidatePool,
) -> Result<(Vec<GraphNode>, NodeMap), GraphError> {
    let mut nodes = Vec::new();
    let mut map = NodeMap::default();

    let mut add = |key: NodeKey, kind: NodeKind, embedding: EmbeddingVector| -> Result<(), GraphError> {
        if map.get(&key).is_some() {
            return Ok(());
        }
        let s = cosine_similarity(query, &embedding).map_err(|source| GraphError::Embedding {
            node: nodes.len(),
            source,
        })?;
        let source_id = match &key {
            NodeKey::Caption(id) | NodeKey::Image(id) => id.clone(),
        };
        map.insert(key, nodes.len());
        nodes.push(GraphNode {
            kind,
            source_id,
            embedding,
            query_similarity: s,
        });
        Ok(())
    };

    for c in &pool.retrieved_captions {
        add(
            NodeKey::Caption(c.caption_id.clone()),
            NodeKind::RetrievedCaption,
            store.caption_embedding(&c.caption_id)?,
        )?;
    }
    for img in &pool.similar_images {
        add(
            NodeKey::Image(img.image_id.clone()),
            NodeKind::SimilarImage,
            store.image_embedding(&img.image_id)?,
        )?;
        for c in &img.gold_captions {
            add(
                NodeKey::Caption(c.caption_id.clone()),
                NodeKind::GoldCaption,
                store.caption_embedding(&c.caption_id)?,
            )?;
        }
        for c in &img.similar_captions {
            add(
                NodeKey::Caption(c.caption_id.clone()),
                NodeKind::SimilarCaption,
                store.caption_embedding(&c.caption_id)?,
            )?;
        }
    }
    Ok((nodes, map))
}

fn score_captions(list: &mut [PoolCaption], scores: &[f64], map: &NodeMap) -> Result<(), GraphError> {
    for c in list.iter_mut() {
        c.rank_score = Some(scores[map.caption(&c.caption_id)?]);
    }
    Ok(())
}

fn by_rank_desc(a: f64, b: f64) -> std::cmp::Ordering {
    b.total_cmp(&a)
}

/// Attaches PageRank scores to every pool element and reorders retrieved
/// captions, similar images and each image's similar captions by descending
/// score. Equal scores keep their similarity order; gold-caption order is
/// never changed.
pub fn rerank_pool(mut pool: CandidatePool, scores: &RankScores, map: &NodeMap) -> Result<ReRankedPool, GraphError> {
    let r = &scores.scores;
    let expected = map.index.values().copied().max().map_or(0, |m| m + 1);
    if r.len() < expected {
        return Err(GraphError::ScoreLength {
            expected,
            found: r.len(),
        });
    }

    score_captions(&mut pool.retrieved_captions, r, map)?;
    pool.retrieved_captions
        .sort_by(|a, b| by_rank_desc(a.score(), b.score()));

    for img in &mut pool.similar_images {
        img.rank_score = Some(r[map.image(&img.image_id)?]);
        score_captions(&mut img.gold_captions, r, map)?;
        score_captions(&mut img.similar_captions, r, map)?;
        img.similar_captions.sort_by(|a, b| by_rank_desc(a.score(), b.score()));
    }
    pool.similar_images.sort_by(|a, b| by_rank_desc(a.score(), b.score()));

    Ok(ReRankedPool {
        ordering: PoolOrdering::PageRank,
        pool,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DumpNode {
    pub node: usize,
    pub kind: NodeKind,
    pub source_id: String,
    pub query_similarity: f64,
}

/// Inspection snapshot of one graph: nodes, W (row-major), v and r.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankDump {
    pub query_id: String,
    pub alpha: f64,
    pub nodes: Vec<DumpNode>,
    pub weights: Vec<Vec<f64>>,
    pub personalization: Vec<f64>,
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub fn rank_dump(query_id: &str, graph: &RankGraph, scores: &RankScores) -> RankDump {
    let n = graph.len();
    RankDump {
        query_id: query_id.to_string(),
        alpha: graph.alpha(),
        nodes: graph
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, nd)| DumpNode {
                node: i,
                kind: nd.kind,
                source_id: nd.source_id.clone(),
                query_similarity: nd.query_similarity,
            })
            .collect(),
        weights: (0..n)
            .map(|i| graph.weights().row(i).iter().copied().collect())
            .collect(),
        personalization: graph.personalization().iter().copied().collect(),
        scores: scores.scores.clone(),
        iterations: scores.iterations,
        residual: scores.residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt_forge::PoolImage;

    fn cap(id: &str, sim: f64) -> PoolCaption {
        PoolCaption {
            caption_id: id.into(),
            text: format!("text {id}"),
            similarity: sim,
            rank_score: None,
        }
    }

    fn pool() -> (CandidatePool, NodeMap) {
        let pool = CandidatePool {
            query_id: "q".into(),
            retrieved_captions: vec![
                cap("a", 0.9),
                cap("b", 0.8),
                cap("c", 0.7),
                cap("d", 0.6),
                cap("e", 0.5),
            ],
            similar_images: vec![
                PoolImage {
                    image_id: "i1".into(),
                    similarity: 0.9,
                    rank_score: None,
                    similar_captions: vec![cap("a", 0.9), cap("f", 0.5)],
                    gold_captions: vec![cap("g", 0.8), cap("h", 0.7)],
                },
                PoolImage {
                    image_id: "i2".into(),
                    similarity: 0.8,
                    rank_score: None,
                    similar_captions: vec![cap("b", 0.6)],
                    gold_captions: vec![cap("k", 0.9)],
                },
            ],
        };
        let mut map = NodeMap::default();
        for (i, id) in ["a", "b", "c", "d", "e"].iter().enumerate() {
            map.insert(NodeKey::Caption(id.to_string()), i);
        }
        map.insert(NodeKey::Image("i1".into()), 5);
        map.insert(NodeKey::Caption("g".into()), 6);
        map.insert(NodeKey::Caption("h".into()), 7);
        map.insert(NodeKey::Caption("f".into()), 8);
        map.insert(NodeKey::Image("i2".into()), 9);
        map.insert(NodeKey::Caption("k".into()), 10);
        (pool, map)
    }

    fn ids(p: &ReRankedPool) -> Vec<&str> {
        p.pool
            .retrieved_captions
            .iter()
            .map(|c| c.caption_id.as_str())
            .collect()
    }

    #[test]
    fn equal_scores_keep_order() {
        let (pool, map) = pool();
        let scores = RankScores {
            scores: vec![1.0 / 11.0; 11],
            iterations: 1,
            residual: 0.0,
        };
        let rr = rerank_pool(pool.clone(), &scores, &map).unwrap();
        assert_eq!(ids(&rr), ["a", "b", "c", "d", "e"]);
        assert_eq!(rr.pool.similar_images[0].image_id, "i1");
        assert_eq!(rr.ordering, PoolOrdering::PageRank);
    }

    #[test]
    fn argmax_goes_first() {
        let (pool, map) = pool();
        let eps = 1e-6;
        let mut s = vec![eps; 11];
        s[3] = 1.0 - 10.0 * eps;
        let rr = rerank_pool(
            pool,
            &RankScores {
                scores: s,
                iterations: 1,
                residual: 0.0,
            },
            &map,
        )
        .unwrap();
        assert_eq!(ids(&rr)[0], "d");
    }

    #[test]
    fn sorted_like_oracle_and_permutation() {
        let (pool, map) = pool();
        // scores for a..e: 0.1, 0.3, 0.05, 0.3, 0.2 ; sort oracle: b, d (tie keeps b before d), e, a, c
        let mut s = vec![0.0; 11];
        s[..5].copy_from_slice(&[0.1, 0.3, 0.05, 0.3, 0.2]);
        s[5] = 0.01; // i1
        s[9] = 0.02; // i2
        s[6] = 0.0;
        s[7] = 0.5; // h, gold order must still be g, h
        s[8] = 0.4; // f above a
        let rr = rerank_pool(
            pool.clone(),
            &RankScores {
                scores: s,
                iterations: 1,
                residual: 0.0,
            },
            &map,
        )
        .unwrap();
        assert_eq!(ids(&rr), ["b", "d", "e", "a", "c"]);
        assert_eq!(rr.pool.similar_images[0].image_id, "i2");
        let i1 = &rr.pool.similar_images[1];
        assert_eq!(i1.gold_captions[0].caption_id, "g");
        assert_eq!(i1.similar_captions[0].caption_id, "f");

        let mut before: Vec<_> = pool.retrieved_captions.iter().map(|c| c.caption_id.clone()).collect();
        let mut after: Vec<_> = rr
            .pool
            .retrieved_captions
            .iter()
            .map(|c| c.caption_id.clone())
            .collect();
        before.sort();
        after.sort();
        assert_eq!(before, after);
    }

    #[test]
    fn unmapped_element_fails() {
        let (mut pool, map) = pool();
        pool.retrieved_captions.push(cap("zzz", 0.1));
        let scores = RankScores {
            scores: vec![0.1; 11],
            iterations: 1,
            residual: 0.0,
        };
        assert!(matches!(rerank_pool(pool, &scores, &map), Err(GraphError::Unmapped(_))));
    }
}
