//! The boosting loop: evaluate all costs and score-gradients, ask the
//! combination rule for `α`, fit a tree to `λ = Cα`, subtract it.

mod ensemble;

use std::io::Write;
use std::path::Path;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::combinators::{get_coefficients, CombinatorKind, CombinatorParams, CombinatorState, Preference};
use crate::dataset::MultiLabelDataset;
use crate::ranking::{CostEvaluator, LossConfig};
use crate::tree::{fit_tree_presorted, FeatureMatrix, Presorted, TreeConfig};
use crate::{Error, Result};

pub use ensemble::{TreeEnsemble, MODEL_FORMAT, MODEL_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GBMConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Stop once successive cost vectors differ by less than this (L2).
    pub convergence_tol: f64,
    pub rng_seed: u64,
    /// Fraction of queries each tree is fit on.
    pub subsample: f64,
    /// Stop when validation NDCG has not improved for this many trees.
    pub early_stopping_rounds: Option<usize>,
    /// Truncation of the validation NDCG.
    pub ndcg_k: usize,
}

impl Default for GBMConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            learning_rate: 0.25,
            max_leaves: 16,
            max_depth: 6,
            min_samples_leaf: 10,
            convergence_tol: 1e-9,
            rng_seed: 0,
            subsample: 1.0,
            early_stopping_rounds: None,
            ndcg_k: 5,
        }
    }
}

impl GBMConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("n_trees must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol >= 0.0) {
            return Err(Error::config("convergence_tol must be nonnegative"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::config("subsample must lie in (0, 1]"));
        }
        if self.ndcg_k == 0 {
            return Err(Error::config("ndcg_k must be positive"));
        }
        if self.early_stopping_rounds == Some(0) {
            return Err(Error::config("early_stopping_rounds must be positive"));
        }
        self.tree_config().validate()
    }

    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig { max_depth: self.max_depth, max_leaves: self.max_leaves, min_samples_leaf: self.min_samples_leaf }
    }
}

/// Everything besides data, preference and rule that shapes a run.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions<'a> {
    pub smoothing: bool,
    pub params: CombinatorParams,
    pub validation: Option<&'a MultiLabelDataset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Costs of the model before this iteration's tree.
    pub costs: Vec<f64>,
    pub raw_alpha: Vec<f64>,
    /// Coefficients actually used (smoothed when enabled).
    pub alpha: Vec<f64>,
    /// EC multipliers after this iteration's update.
    pub ec_multipliers: Vec<f64>,
    /// Per-label validation NDCG after this iteration's tree.
    pub validation_ndcg: Option<Vec<f64>>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxTrees,
    Converged,
    EarlyStopping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub label_names: Vec<String>,
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    /// Training costs of the returned ensemble.
    pub final_costs: Vec<f64>,
}

impl TrainingTrace {
    /// Columns: `iter, c_1..c_K, alpha_1..alpha_K, raw_alpha_1..raw_alpha_K`,
    /// then `mult_*` for the non-primary objectives and `ndcg_*` when
    /// present, then `note`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let k = self.label_names.len();
        let mults = self.records.first().map_or(0, |r| r.ec_multipliers.len());
        let with_ndcg = self.records.iter().any(|r| r.validation_ndcg.is_some());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iter".to_string()];
        header.extend((1..=k).map(|i| format!("c_{i}")));
        header.extend((1..=k).map(|i| format!("alpha_{i}")));
        header.extend((1..=k).map(|i| format!("raw_alpha_{i}")));
        header.extend((1..=mults).map(|i| format!("mult_{i}")));
        if with_ndcg {
            header.extend((1..=k).map(|i| format!("ndcg_{i}")));
        }
        header.push("note".into());
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.iter.to_string()];
            row.extend(
                r.costs.iter().chain(&r.alpha).chain(&r.raw_alpha).chain(&r.ec_multipliers).map(|v| v.to_string()),
            );
            if with_ndcg {
                match &r.validation_ndcg {
                    Some(n) => row.extend(n.iter().map(|v| v.to_string())),
                    None => row.extend(std::iter::repeat_n(String::new(), k)),
                }
            }
            row.push(r.note.clone().unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub ensemble: TreeEnsemble,
    pub trace: TrainingTrace,
}

/// Train one multi-label ranker.
pub fn train(
    data: &MultiLabelDataset,
    preference: &Preference,
    kind: CombinatorKind,
    gbm: &GBMConfig,
    losses: &[LossConfig],
    options: &TrainOptions<'_>,
) -> Result<TrainOutput> {
    gbm.validate()?;
    let k = data.label_count();
    preference.validate_for(kind, k)?;
    let evaluator = CostEvaluator::new(data, losses)?;
    let validation = match options.validation {
        Some(v) => {
            if v.label_count() != k || v.feature_dim() != data.feature_dim() {
                return Err(Error::config("validation data must match the training labels and features"));
            }
            Some((v, CostEvaluator::new(v, losses)?))
        }
        None => None,
    };
    if gbm.early_stopping_rounds.is_some() && validation.is_none() {
        return Err(Error::config("early stopping needs validation data"));
    }

    let m_items = data.num_items();
    let flat = data.feature_matrix();
    let x = FeatureMatrix::new(&flat, m_items, data.feature_dim())?;
    let presorted = Presorted::new(&x);
    let offsets = data.query_offsets();
    let tree_cfg = gbm.tree_config();

    let mut state =
        CombinatorState::new(k, options.smoothing, options.params.clone(), gbm.rng_seed ^ 0x5851_f42d_4c95_7f2d)?;
    let mut sampler = ChaCha8Rng::seed_from_u64(gbm.rng_seed);
    let mut ensemble = TreeEnsemble::new(data.feature_dim(), 0.0);
    let mut scores = vec![ensemble.init_score; m_items];
    let mut val_scores = validation.as_ref().map(|(v, _)| vec![ensemble.init_score; v.num_items()]);
    let val_rows: Option<Vec<&[f64]>> =
        validation.as_ref().map(|(v, _)| v.items().map(|it| it.features.as_slice()).collect());

    let mut records = Vec::with_capacity(gbm.n_trees);
    let mut prev_costs: Option<Vec<f64>> = None;
    let mut stop_reason = StopReason::MaxTrees;
    let mut best_val: Option<(f64, usize)> = None;
    let mut mask = vec![true; m_items];

    for iter in 0..gbm.n_trees {
        let cost_state = evaluator.evaluate(&scores)?;
        if let Some(prev) = &prev_costs {
            let diff = prev.iter().zip(&cost_state.costs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if diff == 0.0 || diff < gbm.convergence_tol {
                debug!("converged at iteration {iter} (Δc = {diff:e})");
                stop_reason = StopReason::Converged;
                break;
            }
        }
        let coeffs = get_coefficients(kind, &cost_state, preference, &mut state)?;
        if let Some(note) = &coeffs.note {
            debug!("iteration {iter}: {note}");
        }
        let lambda = cost_state.combine(coeffs.alpha.as_slice());

        let sample = if gbm.subsample < 1.0 {
            mask.iter_mut().for_each(|v| *v = false);
            let mut any = false;
            for w in offsets.windows(2) {
                if sampler.random::<f64>() < gbm.subsample {
                    mask[w[0]..w[1]].iter_mut().for_each(|v| *v = true);
                    any = true;
                }
            }
            if !any {
                let q = sampler.random_range(0..offsets.len() - 1);
                mask[offsets[q]..offsets[q + 1]].iter_mut().for_each(|v| *v = true);
            }
            Some(mask.as_slice())
        } else {
            None
        };
        let tree = fit_tree_presorted(&x, &presorted, &lambda, sample, &tree_cfg)?;
        let eta = gbm.learning_rate;
        for (i, s) in scores.iter_mut().enumerate() {
            *s -= eta * tree.predict(x.row(i));
        }

        let mut validation_ndcg = None;
        if let (Some((_, val_eval)), Some(vs), Some(rows)) = (&validation, val_scores.as_mut(), &val_rows) {
            for (s, row) in vs.iter_mut().zip(rows) {
                *s -= eta * tree.predict(row);
            }
            let n = val_eval.ndcg(vs, gbm.ndcg_k)?;
            let mean = n.iter().sum::<f64>() / n.len() as f64;
            if best_val.is_none_or(|(b, _)| mean > b) {
                best_val = Some((mean, iter + 1));
            }
            validation_ndcg = Some(n);
        }
        ensemble.push(tree, eta);
        records.push(IterationRecord {
            iter,
            costs: cost_state.costs.clone(),
            raw_alpha: coeffs.raw.as_slice().to_vec(),
            alpha: coeffs.alpha.as_slice().to_vec(),
            ec_multipliers: state.ec_multipliers.clone(),
            validation_ndcg,
            note: coeffs.note,
        });
        prev_costs = Some(cost_state.costs);

        if let (Some(patience), Some((_, best_len))) = (gbm.early_stopping_rounds, best_val) {
            if ensemble.len() - best_len >= patience {
                ensemble.truncate(best_len);
                records.truncate(best_len);
                stop_reason = StopReason::EarlyStopping;
                scores = ensemble.predict_dataset(data)?;
                break;
            }
        }
    }

    let final_costs = evaluator.costs(&scores)?;
    Ok(TrainOutput {
        ensemble,
        trace: TrainingTrace { label_names: data.label_names().to_vec(), records, stop_reason, final_costs },
    })
}
