//! One query image from retrieval to a rendered prompt.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed_store::{EmbeddingVector, StoreError};
use crate::graph_rank::{
    build_rank_graph, pagerank, pool_graph, rank_dump, rerank_pool, Diagonal, GraphError, RankDump, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
use crate::prompt_forge::{
    assemble_pool, build_prompt_spec, select_prompt_content, PoolConfig, PromptError, PromptMode, PromptSpec,
    ReRankedPool, Selection,
};
use crate::{Datastore, Language};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub pool: PoolConfig,
    pub n_examples: usize,
    pub k_captions: usize,
    pub alpha: f64,
    pub pagerank: bool,
    pub diagonal: Diagonal,
    pub mode: PromptMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pool: PoolConfig::default(),
            n_examples: 3,
            k_captions: 3,
            alpha: 0.9,
            pagerank: true,
            diagonal: Diagonal::Include,
            mode: PromptMode::ImageBlind,
        }
    }
}

/// Everything decided for one query before the model is called.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedPrompt {
    pub query_id: String,
    /// `None` in baseline mode.
    pub pool: Option<ReRankedPool>,
    /// `None` when re-ranking is disabled or in baseline mode.
    pub ranking: Option<RankSummary>,
    pub selection: Option<Selection>,
    pub spec: PromptSpec,
}

/// Per-node PageRank scores plus solver statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub nodes: Vec<(String, f64)>,
    pub iterations: usize,
    pub residual: f64,
}

impl From<&RankDump> for RankSummary {
    fn from(d: &RankDump) -> Self {
        Self {
            nodes: d
                .nodes
                .iter()
                .zip(&d.scores)
                .map(|(n, s)| (n.source_id.clone(), *s))
                .collect(),
            iterations: d.iterations,
            residual: d.residual,
        }
    }
}

/// Retrieves the pool, optionally re-ranks it with PageRank.
pub fn ranked_pool(
    store: &Datastore,
    query_id: &str,
    query: &EmbeddingVector,
    config: &PipelineConfig,
) -> Result<(ReRankedPool, Option<RankDump>), PipelineError> {
    let pool = assemble_pool(store, query_id, query, &config.pool)?;
    if !config.pagerank {
        return Ok((ReRankedPool::by_similarity(pool), None));
    }
    let (nodes, map) = pool_graph(store, query, &pool)?;
    let graph = build_rank_graph(nodes, config.alpha, config.diagonal)?;
    let scores = pagerank(&graph, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let dump = rank_dump(query_id, &graph, &scores);
    Ok((rerank_pool(pool, &scores, &map)?, Some(dump)))
}

/// Builds the prompt for `query_id` in `language`.
pub fn prepare_prompt(
    store: &Datastore,
    query_id: &str,
    query: &EmbeddingVector,
    language: Language,
    config: &PipelineConfig,
) -> Result<PreparedPrompt, PipelineError> {
    if config.mode == PromptMode::NoRetrievalBaseline {
        return Ok(PreparedPrompt {
            query_id: query_id.to_string(),
            pool: None,
            ranking: None,
            selection: None,
            spec: PromptSpec::baseline(language),
        });
    }
    let (pool, dump) = ranked_pool(store, query_id, query, config)?;
    let selection = select_prompt_content(&pool, config.n_examples, config.k_captions)?;
    let spec = build_prompt_spec(&selection, store, language, config.mode)?;
    Ok(PreparedPrompt {
        query_id: query_id.to_string(),
        ranking: dump.as_ref().map(RankSummary::from),
        pool: Some(pool),
        selection: Some(selection),
        spec,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed_store::Split;
    use crate::synthetic::{generate_store, SyntheticConfig};

    fn store() -> Datastore {
        generate_store(&SyntheticConfig {
            images: 30,
            translations: vec![Language::German],
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn prepares_blind_prompt_with_default_shape() {
        let s = store();
        let q = s.images().iter().find(|i| i.split == Split::Test).unwrap();
        let emb = s.image_embedding(&q.image_id).unwrap();
        let p = prepare_prompt(&s, &q.image_id, &emb, Language::German, &PipelineConfig::default()).unwrap();
        assert_eq!(p.spec.input_captions.len(), 3);
        assert!(p.ranking.is_some());
        assert_eq!(
            p.spec.rendered.lines().filter(|l| l.starts_with("CAPTION ")).count(),
            3 + 3 * p.spec.n_examples
        );
        assert!(p.spec.examples.iter().all(|e| e.gold_caption.starts_with("[de] ")));
    }

    #[test]
    fn baseline_skips_retrieval() {
        let s = store();
        let emb = s.image_embedding("img00004").unwrap();
        let cfg = PipelineConfig {
            mode: PromptMode::NoRetrievalBaseline,
            ..Default::default()
        };
        let p = prepare_prompt(&s, "img00004", &emb, Language::English, &cfg).unwrap();
        assert!(p.pool.is_none() && p.selection.is_none());
        assert!(!p.spec.rendered.contains("CAPTION"));
    }

    #[test]
    fn missing_translation_is_reported() {
        let s = store();
        let emb = s.image_embedding("img00004").unwrap();
        let err = prepare_prompt(&s, "img00004", &emb, Language::Korean, &PipelineConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Prompt(PromptError::MissingTranslation { .. })
        ));
    }
}
