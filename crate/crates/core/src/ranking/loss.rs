//! LambdaMART / RankNet pairwise logistic loss for a single query.
//!
//! For every pair `(i, j)` with `y_i > y_j` the loss adds
//! `w_ij · log(1 + exp(-σ (s_i - s_j)))`, where `w_ij` is |ΔNDCG| of swapping
//! the two items under the current score ranking (LambdaMART) or 1 (RankNet).
//! Gradients treat `w_ij` as a constant, as LambdaMART does.

use serde::{Deserialize, Serialize};

use super::ndcg::{delta_ndcg_with_idcg, ideal_dcg, rank_positions};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Sigmoid spread σ.
    pub sigma: f64,
    /// |ΔNDCG| pair weights (LambdaMART) instead of unit weights (RankNet).
    pub use_delta_ndcg: bool,
    /// Truncation for reported NDCG.
    pub ndcg_truncation: Option<usize>,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { sigma: 1.0, use_delta_ndcg: true, ndcg_truncation: Some(5) }
    }
}

impl LossConfig {
    pub fn ranknet() -> Self {
        Self { use_delta_ndcg: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::config("sigma must be positive and finite"));
        }
        if self.ndcg_truncation == Some(0) {
            return Err(Error::config("NDCG truncation must be at least 1"));
        }
        Ok(())
    }
}

/// Item pairs of one query with a strict label order, `y_i > y_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    pairs: Vec<(usize, usize)>,
}

impl PairSet {
    pub fn from_labels(labels: &[f64]) -> Self {
        let mut pairs = Vec::new();
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi > yj {
                    pairs.push((i, j));
                }
            }
        }
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// `(log(1 + exp(-z)), 1 / (1 + exp(z)))` from a single exponential.
#[inline]
fn pair_terms(z: f64) -> (f64, f64) {
    let e = (-z.abs()).exp();
    if z > 0.0 {
        (e.ln_1p(), e / (1.0 + e))
    } else {
        (-z + e.ln_1p(), 1.0 / (1.0 + e))
    }
}

fn check(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), found: scores.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    Ok(())
}

/// Loss of one query; also writes `∂ℓ/∂s` into `grad` (overwritten).
pub fn per_query_loss_and_gradient(scores: &[f64], labels: &[f64], cfg: &LossConfig, grad: &mut [f64]) -> Result<f64> {
    check(scores, labels)?;
    if grad.len() != scores.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), found: grad.len() });
    }
    grad.fill(0.0);
    let n = scores.len();
    if n < 2 {
        return Ok(0.0);
    }

    let weighting = if cfg.use_delta_ndcg {
        let idcg = ideal_dcg(labels, None);
        if idcg <= 0.0 {
            return Ok(0.0);
        }
        Some((rank_positions(scores), idcg))
    } else {
        None
    };

    let sigma = cfg.sigma;
    let mut loss = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] <= labels[j] {
                continue;
            }
            let w = match &weighting {
                Some((ranks, idcg)) => delta_ndcg_with_idcg(labels, ranks, i, j, *idcg),
                None => 1.0,
            };
            if w == 0.0 {
                continue;
            }
            let z = sigma * (scores[i] - scores[j]);
            let (l, q) = pair_terms(z);
            loss += w * l;
            let lambda = sigma * w * q;
            grad[i] -= lambda;
            grad[j] += lambda;
        }
    }
    Ok(loss)
}

pub fn per_query_loss(scores: &[f64], labels: &[f64], cfg: &LossConfig) -> Result<f64> {
    let mut grad = vec![0.0; scores.len()];
    per_query_loss_and_gradient(scores, labels, cfg, &mut grad)
}

pub fn per_query_gradient(scores: &[f64], labels: &[f64], cfg: &LossConfig) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; scores.len()];
    per_query_loss_and_gradient(scores, labels, cfg, &mut grad)?;
    Ok(grad)
}
