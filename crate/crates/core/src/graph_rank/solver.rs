use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{GraphError, RankGraph};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1000;

/// Largest graph the dense oracle accepts.
const ORACLE_MAX_NODES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankScores {
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// L1 distance between the last two iterates (oracle: L1 residual of the linear system).
    pub residual: f64,
}

/// Power iteration `r <- alpha W^T r + (1 - alpha) v` from `r0 = v`, until
/// the L1 change drops below `tol`.
pub fn pagerank(graph: &RankGraph, tol: f64, max_iter: usize) -> Result<RankScores, GraphError> {
    let n = graph.len();
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut r = graph.personalization.as_slice().to_vec();
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        graph.power_step(&r, &mut next);
        residual = r.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut r, &mut next);
        if residual < tol {
            return Ok(RankScores {
                scores: r,
                iterations: it,
                residual,
            });
        }
    }
    Err(GraphError::NotConverged {
        iterations: max_iter,
        residual,
    })
}

/// Fixed point by direct solve: `(I - alpha W^T) r = (1 - alpha) v`.
///
/// Reference solver for checking [`pagerank`]; dense LU, so limited to small graphs.
pub fn pagerank_oracle(graph: &RankGraph) -> Result<RankScores, GraphError> {
    let n = graph.len();
    if n == 0 {
        return Err(GraphError::Empty);
    }
    if n > ORACLE_MAX_NODES {
        return Err(GraphError::OracleTooLarge {
            n,
            max: ORACLE_MAX_NODES,
        });
    }
    let a = graph.alpha;
    let system: DMatrix<f64> = DMatrix::identity(n, n) - graph.weights.transpose() * a;
    let rhs: DVector<f64> = &graph.personalization * (1.0 - a);
    let solution = system
        .clone()
        .lu()
        .solve(&rhs)
        .expect("I - alpha W^T is nonsingular for alpha < 1 and row-stochastic W");
    let residual = (&system * &solution - &rhs).abs().sum();
    Ok(RankScores {
        scores: solution.iter().copied().collect(),
        iterations: 0,
        residual,
    })
}
