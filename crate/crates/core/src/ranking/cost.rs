//! Per-objective cost vectors and score-gradient matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::loss::{per_query_loss_and_gradient, LossConfig};
use super::ndcg::mean_ndcg;
use crate::dataset::MultiLabelDataset;
use crate::{Error, Result};

/// Costs `c ∈ R^K`, gradient columns `∇_s c_k` (the matrix `C`, stored
/// column-wise), the Gram matrix `CᵀC` and its principal square root.
#[derive(Debug, Clone)]
pub struct CostState {
    pub costs: Vec<f64>,
    pub gradients: Vec<Vec<f64>>,
    pub gram: DMatrix<f64>,
    pub gram_sqrt: DMatrix<f64>,
}

impl CostState {
    pub fn from_parts(costs: Vec<f64>, gradients: Vec<Vec<f64>>) -> Result<Self> {
        if costs.len() != gradients.len() {
            return Err(Error::DimensionMismatch { expected: costs.len(), found: gradients.len() });
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("costs"));
        }
        let k = costs.len();
        let mut gram = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let dot: f64 = gradients[a].iter().zip(&gradients[b]).map(|(x, y)| x * y).sum();
                gram[(a, b)] = dot;
                gram[(b, a)] = dot;
            }
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradients"));
        }
        let gram_sqrt = psd_sqrt(&gram);
        Ok(Self { costs, gradients, gram, gram_sqrt })
    }

    /// A state carrying only a Gram matrix, for driving the coefficient rules
    /// directly (no gradient columns attached).
    pub fn from_gram(costs: Vec<f64>, gram: DMatrix<f64>) -> Self {
        let gram_sqrt = psd_sqrt(&gram);
        Self { costs, gradients: Vec::new(), gram, gram_sqrt }
    }

    pub fn num_objectives(&self) -> usize {
        self.costs.len()
    }

    /// `λ = Cα`. Terms with `α_k = 0` are skipped so a one-hot α reproduces a
    /// gradient column bit for bit.
    pub fn combine(&self, alpha: &[f64]) -> Vec<f64> {
        let m = self.gradients.first().map_or(0, Vec::len);
        let mut out = vec![0.0; m];
        let mut first = true;
        for (col, &a) in self.gradients.iter().zip(alpha) {
            if a == 0.0 {
                continue;
            }
            if first && a == 1.0 {
                out.copy_from_slice(col);
            } else {
                for (o, g) in out.iter_mut().zip(col) {
                    *o += a * g;
                }
            }
            first = false;
        }
        out
    }
}

/// Principal square root of a symmetric PSD matrix; negative eigenvalues
/// from round-off are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Evaluates all `K` costs of a dataset from a flat score vector. Label
/// columns and query offsets are extracted once; queries are evaluated in
/// parallel and reduced in query order, so results are bitwise reproducible.
#[derive(Debug, Clone)]
pub struct CostEvaluator {
    offsets: Vec<usize>,
    /// Per objective: the labels the loss sees (ordinal or raw).
    loss_labels: Vec<Vec<f64>>,
    /// Per objective: ordinal labels for NDCG reporting.
    metric_labels: Vec<Vec<f64>>,
    losses: Vec<LossConfig>,
}

impl CostEvaluator {
    /// One loss config per label, or a single config applied to all labels.
    pub fn new(data: &MultiLabelDataset, losses: &[LossConfig]) -> Result<Self> {
        let k = data.label_count();
        let losses: Vec<LossConfig> = match losses.len() {
            1 => vec![losses[0].clone(); k],
            n if n == k => losses.to_vec(),
            n => return Err(Error::DimensionMismatch { expected: k, found: n }),
        };
        for l in &losses {
            l.validate()?;
        }
        // RankNet weighting uses unquantized values; |ΔNDCG| needs levels.
        let loss_labels = (0..k)
            .map(|j| if losses[j].use_delta_ndcg { data.label_column(j) } else { data.raw_label_column(j) })
            .collect();
        let metric_labels = (0..k).map(|j| data.label_column(j)).collect();
        Ok(Self { offsets: data.query_offsets(), loss_labels, metric_labels, losses })
    }

    pub fn num_items(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn num_queries(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_objectives(&self) -> usize {
        self.losses.len()
    }

    fn check_scores(&self, scores: &[f64]) -> Result<()> {
        if scores.len() != self.num_items() {
            return Err(Error::DimensionMismatch { expected: self.num_items(), found: scores.len() });
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::NonFinite("scores"));
        }
        Ok(())
    }

    /// Costs, gradient columns (each divided by the query count `m`) and Gram matrices.
    pub fn evaluate(&self, scores: &[f64]) -> Result<CostState> {
        self.check_scores(scores)?;
        let k = self.num_objectives();
        let m = self.num_queries() as f64;
        let per_query: Vec<(Vec<f64>, Vec<Vec<f64>>)> = self
            .offsets
            .par_windows(2)
            .map(|w| {
                let s = &scores[w[0]..w[1]];
                let mut losses = Vec::with_capacity(k);
                let mut grads = Vec::with_capacity(k);
                for j in 0..k {
                    let mut g = vec![0.0; s.len()];
                    let l = per_query_loss_and_gradient(s, &self.loss_labels[j][w[0]..w[1]], &self.losses[j], &mut g)?;
                    losses.push(l);
                    grads.push(g);
                }
                Ok((losses, grads))
            })
            .collect::<Result<_>>()?;

        let mut costs = vec![0.0; k];
        let mut gradients = vec![Vec::with_capacity(self.num_items()); k];
        for (losses, grads) in per_query {
            for j in 0..k {
                costs[j] += losses[j];
                gradients[j].extend(grads[j].iter().map(|g| g / m));
            }
        }
        for c in &mut costs {
            *c /= m;
        }
        CostState::from_parts(costs, gradients)
    }

    /// Costs only, without building the gradient matrix.
    pub fn costs(&self, scores: &[f64]) -> Result<Vec<f64>> {
        self.check_scores(scores)?;
        let k = self.num_objectives();
        let per_query: Vec<Vec<f64>> = self
            .offsets
            .par_windows(2)
            .map(|w| {
                let s = &scores[w[0]..w[1]];
                let mut g = vec![0.0; s.len()];
                (0..k)
                    .map(|j| per_query_loss_and_gradient(s, &self.loss_labels[j][w[0]..w[1]], &self.losses[j], &mut g))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let m = self.num_queries() as f64;
        let mut costs = vec![0.0; k];
        for q in per_query {
            for (c, l) in costs.iter_mut().zip(q) {
                *c += l;
            }
        }
        Ok(costs.into_iter().map(|c| c / m).collect())
    }

    /// Mean NDCG@k per objective; queries without positive gain count as 1.0.
    pub fn ndcg(&self, scores: &[f64], k: usize) -> Result<Vec<f64>> {
        self.check_scores(scores)?;
        self.metric_labels.iter().map(|labels| mean_ndcg(scores, labels, &self.offsets, k, false)).collect()
    }
}
