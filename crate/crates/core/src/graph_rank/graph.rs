use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GraphError;
use crate::embed_store::{cosine_similarity, EmbeddingVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    RetrievedCaption,
    SimilarImage,
    GoldCaption,
    SimilarCaption,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub kind: NodeKind,
    pub source_id: String,
    pub embedding: EmbeddingVector,
    /// Cosine between this node's embedding and the query image.
    pub query_similarity: f64,
}

/// How the diagonal of the weight matrix is treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagonal {
    /// Self-similarity (1) is part of each row: `W_ii = 1 / row_sum`.
    #[default]
    Include,
    /// No self-loops; a row with no positive off-diagonal cosine becomes uniform.
    Exclude,
}

/// A fully connected graph with row-stochastic weights and a personalization vector.
#[derive(Debug, Clone)]
pub struct RankGraph {
    pub(super) nodes: Vec<GraphNode>,
    pub(super) weights: DMatrix<f64>,
    pub(super) personalization: DVector<f64>,
    pub(super) alpha: f64,
}

impl RankGraph {
    /// Assembles a graph from explicit parts, checking stochasticity.
    ///
    /// Intended for tests and tools that already hold a transition matrix.
    pub fn from_parts(
        nodes: Vec<GraphNode>,
        weights: DMatrix<f64>,
        personalization: DVector<f64>,
        alpha: f64,
    ) -> Result<Self, String> {
        let g = Self {
            nodes,
            weights,
            personalization,
            alpha,
        };
        g.check_invariants(1e-9)?;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn personalization(&self) -> &DVector<f64> {
        &self.personalization
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// One update `out = alpha * W^T r + (1 - alpha) * v`.
    pub fn power_step(&self, r: &[f64], out: &mut [f64]) {
        let n = self.len();
        let a = self.alpha;
        for (j, o) in out.iter_mut().enumerate().take(n) {
            *o = (1.0 - a) * self.personalization[j];
        }
        for (i, &ri) in r.iter().enumerate().take(n) {
            let flow = a * ri;
            if flow == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate().take(n) {
                *o += flow * self.weights[(i, j)];
            }
        }
    }

    /// Verifies row-stochastic W and a probability vector v within `tol`.
    pub fn check_invariants(&self, tol: f64) -> Result<(), String> {
        let n = self.weights.nrows();
        if n == 0 {
            return Err("empty graph".into());
        }
        if self.weights.ncols() != n || self.personalization.len() != n {
            return Err("shape mismatch".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(format!("alpha {} outside (0, 1)", self.alpha));
        }
        for i in 0..n {
            let row = self.weights.row(i);
            if row.iter().any(|&w| w < 0.0 || !w.is_finite()) {
                return Err(format!("row {i} has a negative or non-finite entry"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(format!("row {i} sums to {s}"));
            }
        }
        if self.personalization.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err("personalization has a negative or non-finite entry".into());
        }
        let s: f64 = self.personalization.iter().sum();
        if (s - 1.0).abs() > tol {
            return Err(format!("personalization sums to {s}"));
        }
        Ok(())
    }
}

/// Builds `W` and `v` from node embeddings and query similarities.
///
/// `W_ij = max(cos(e_i, e_j), 0) / sum_k max(cos(e_i, e_k), 0)` and
/// `v_i = max(s_i, 0) / sum_j max(s_j, 0)`, falling back to a uniform `v`
/// when no similarity is positive.
pub fn build_rank_graph(nodes: Vec<GraphNode>, alpha: f64, diagonal: Diagonal) -> Result<RankGraph, GraphError> {
    let n = nodes.len();
    if n == 0 {
        return Err(GraphError::Empty);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(GraphError::InvalidAlpha(alpha));
    }
    for (i, node) in nodes.iter().enumerate() {
        let s = node.query_similarity;
        if !s.is_finite() || s.abs() > 1.0 + 1e-6 {
            return Err(GraphError::InvalidSimilarity { node: i, value: s });
        }
        if node.embedding.norm() == 0.0 {
            return Err(GraphError::Embedding {
                node: i,
                source: crate::embed_store::StoreError::DegenerateEmbedding,
            });
        }
    }

    let mut weights = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        weights[(i, i)] = match diagonal {
            Diagonal::Include => 1.0,
            Diagonal::Exclude => 0.0,
        };
        for j in (i + 1)..n {
            let c = cosine_similarity(&nodes[i].embedding, &nodes[j].embedding)
                .map_err(|source| GraphError::Embedding { node: i, source })?
                .max(0.0);
            weights[(i, j)] = c;
            weights[(j, i)] = c;
        }
    }
    for i in 0..n {
        let sum: f64 = weights.row(i).iter().sum();
        if sum > 0.0 {
            weights.row_mut(i).iter_mut().for_each(|w| *w /= sum);
        } else {
            weights.row_mut(i).fill(1.0 / n as f64);
        }
    }

    let positive: Vec<f64> = nodes.iter().map(|nd| nd.query_similarity.max(0.0)).collect();
    let total: f64 = positive.iter().sum();
    let personalization = if total > 0.0 {
        DVector::from_iterator(n, positive.iter().map(|p| p / total))
    } else {
        DVector::from_element(n, 1.0 / n as f64)
    };

    Ok(RankGraph {
        nodes,
        weights,
        personalization,
        alpha,
    })
}
