//! Personalized PageRank re-ranking of the candidate pool.
//!
//! Every pool element (retrieved caption, similar image, gold caption,
//! similar caption) becomes a node of a fully connected graph. Edge weights
//! are the positive part of pairwise embedding cosines, row-normalized; the
//! teleport distribution is the positive part of each node's cosine to the
//! query image, normalized. The query image itself is not a node.

mod graph;
mod rerank;
mod solver;

use thiserror::Error;

pub use graph::{build_rank_graph, Diagonal, GraphNode, NodeKind, RankGraph};
pub use rerank::{pool_graph, rank_dump, rerank_pool, NodeKey, NodeMap, RankDump};
pub use solver::{pagerank, pagerank_oracle, RankScores, DEFAULT_MAX_ITER, DEFAULT_TOL};

use crate::embed_store::StoreError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("damping factor {0} outside (0, 1)")]
    InvalidAlpha(f64),
    #[error("node {node}: query similarity {value} is not a cosine")]
    InvalidSimilarity { node: usize, value: f64 },
    #[error("node {node}: {source}")]
    Embedding {
        node: usize,
        #[source]
        source: StoreError,
    },
    #[error("pagerank did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("dense oracle limited to {max} nodes, got {n}")]
    OracleTooLarge { n: usize, max: usize },
    #[error("score vector has {found} entries, graph has {expected} nodes")]
    ScoreLength { expected: usize, found: usize },
    #[error("pool element {0} has no graph node")]
    Unmapped(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}
