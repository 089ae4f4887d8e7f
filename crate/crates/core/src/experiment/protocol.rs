//! Preference generation and the pieces every run shares: data loading,
//! single-objective baselines and held-out evaluation.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DataConfig, ExperimentConfig};
use crate::combinators::{CombinatorKind, Preference};
use crate::dataset::cache::read_cache_file;
use crate::dataset::{parse_letor_file, promote_labels, LabelPromotionSpec, MultiLabelDataset};
use crate::pareto::mwl;
use crate::ranking::{CostEvaluator, LossConfig};
use crate::synth::generate_split;
use crate::trainer::{train, GBMConfig, TrainOptions, TrainOutput, TreeEnsemble};
use crate::{Error, Result};

/// Train, optional validation and test data with identical label layouts.
#[derive(Debug, Clone)]
pub struct DataBundle {
    pub train: MultiLabelDataset,
    pub valid: Option<MultiLabelDataset>,
    pub test: MultiLabelDataset,
}

impl DataBundle {
    pub fn select_labels(&self, set: &[usize]) -> Result<Self> {
        Ok(Self {
            train: self.train.select_labels(set)?,
            valid: self.valid.as_ref().map(|v| v.select_labels(set)).transpose()?,
            test: self.test.select_labels(set)?,
        })
    }
}

fn load_file(path: &Path, promote: Option<&LabelPromotionSpec>) -> Result<MultiLabelDataset> {
    if path.extension().is_some_and(|e| e == "bin") {
        return read_cache_file(path);
    }
    let raw = parse_letor_file(path)?;
    let spec = promote.cloned().unwrap_or_default();
    promote_labels(&raw, &spec)
}

/// Load the configured data, or generate the synthetic workload.
pub fn load_data(cfg: &DataConfig) -> Result<DataBundle> {
    let Some(train_path) = &cfg.train else {
        let (train, test) = generate_split(&cfg.synthetic, cfg.synthetic_seed)?;
        return Ok(DataBundle { train, valid: None, test });
    };
    let promote = cfg.promote.as_ref();
    let mut train = load_file(train_path, promote)?;
    if cfg.query_fraction < 1.0 {
        let keep = ((train.num_queries() as f64 * cfg.query_fraction).round() as usize).max(1);
        let positions: Vec<usize> = (0..keep).collect();
        train = train.subset_queries(&positions)?;
    }
    let valid = cfg.valid.as_deref().map(|p| load_file(p, promote)).transpose()?;
    let test = match &cfg.test {
        Some(p) => load_file(p, promote)?,
        None => {
            warn!("no test file configured; test metrics are computed on the training data");
            train.clone()
        }
    };
    for other in valid.iter().chain(std::iter::once(&test)) {
        if other.label_count() != train.label_count() || other.feature_dim() != train.feature_dim() {
            return Err(Error::config("train, validation and test files must share features and labels"));
        }
    }
    Ok(DataBundle { train, valid, test })
}

/// Costs and NDCG of a model on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub costs: Vec<f64>,
    pub ndcg: Vec<f64>,
}

pub fn evaluate(
    model: &TreeEnsemble,
    data: &MultiLabelDataset,
    loss: &LossConfig,
    ndcg_k: usize,
) -> Result<Evaluation> {
    let scores = model.predict_dataset(data)?;
    let evaluator = CostEvaluator::new(data, std::slice::from_ref(loss))?;
    Ok(Evaluation { costs: evaluator.costs(&scores)?, ndcg: evaluator.ndcg(&scores, ndcg_k)? })
}

/// One model trained on a single objective with LS and a one-hot weight.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub objective: usize,
    pub train_costs: Vec<f64>,
    pub test: Evaluation,
    pub model: TreeEnsemble,
}

/// Train one baseline per objective. Row `k` of the returned cost matrix
/// holds all training costs of the model that only optimized objective `k`.
pub fn single_objective_baselines(
    data: &DataBundle,
    gbm: &GBMConfig,
    loss: &LossConfig,
    ndcg_k: usize,
) -> Result<Vec<Baseline>> {
    let k = data.train.label_count();
    (0..k)
        .into_par_iter()
        .map(|j| {
            let mut r = vec![0.0; k];
            r[j] = 1.0;
            let out = train(
                &data.train,
                &Preference::priority(r),
                CombinatorKind::Ls,
                gbm,
                std::slice::from_ref(loss),
                &TrainOptions::default(),
            )?;
            let test = evaluate(&out.ensemble, &data.test, loss, ndcg_k)?;
            info!("baseline {j}: train costs {:?}", out.trace.final_costs);
            Ok(Baseline { objective: j, train_costs: out.trace.final_costs, test, model: out.ensemble })
        })
        .collect()
}

fn check_baselines(baseline_costs: &[Vec<f64>]) -> Result<usize> {
    let k = baseline_costs.len();
    if !(2..=3).contains(&k) {
        return Err(Error::config(format!("preference rays need two or three objectives, got {k}")));
    }
    for row in baseline_costs {
        if row.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: row.len() });
        }
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) || row.iter().all(|&v| v == 0.0) {
            return Err(Error::config("baseline costs must be finite, nonnegative and not all zero"));
        }
    }
    Ok(k)
}

/// Priority weights for a direction: `r ∝ 1/d`, scaled to sum to one.
/// Components of `d` at zero are lifted to a tiny positive value.
fn weights_for_direction(d: &[f64]) -> Vec<f64> {
    let floor = 1e-12 * d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let inv: Vec<f64> = d.iter().map(|&v| 1.0 / v.max(floor).max(f64::MIN_POSITIVE)).collect();
    let total: f64 = inv.iter().sum();
    inv.into_iter().map(|v| v / total).collect()
}

fn uniform_simplex_rays(k: usize, n: usize) -> Vec<Vec<f64>> {
    if k == 2 {
        return (1..=n)
            .map(|i| {
                let t = i as f64 / (n + 1) as f64;
                vec![t, 1.0 - t]
            })
            .collect();
    }
    barycentric_points(n).into_iter().map(|w| w.to_vec()).collect()
}

/// `n` interior points of the smallest barycentric grid holding at least
/// `n` of them, nearest the centroid first, returned in lexicographic order.
fn barycentric_points(n: usize) -> Vec<[f64; 3]> {
    let mut level = 3;
    while (level - 1) * (level - 2) / 2 < n {
        level += 1;
    }
    let mut points = Vec::new();
    for i in 1..level {
        for j in 1..level - i {
            points.push([i, j, level - i - j]);
        }
    }
    let third = level as f64 / 3.0;
    let dist = |p: &[usize; 3]| p.iter().map(|&v| (v as f64 - third).powi(2)).sum::<f64>();
    points.sort_by(|a, b| dist(a).total_cmp(&dist(b)).then(a.cmp(b)));
    points.truncate(n);
    points.sort();
    let l = level as f64;
    points.into_iter().map(|p| [p[0] as f64 / l, p[1] as f64 / l, p[2] as f64 / l]).collect()
}

/// `n` preference weight vectors whose directions are spread between the
/// single-objective baselines: equal angles for two objectives, a
/// barycentric grid of blended directions for three. The weights of a
/// direction `d` are `1/d` normalized to sum to one.
pub fn generate_rays(baseline_costs: &[Vec<f64>], n: usize) -> Result<Vec<Vec<f64>>> {
    let k = check_baselines(baseline_costs)?;
    if n == 0 {
        return Err(Error::config("at least one preference is required"));
    }
    if k == 2 {
        let a = baseline_costs[0][1].atan2(baseline_costs[0][0]);
        let b = baseline_costs[1][1].atan2(baseline_costs[1][0]);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if hi - lo < 1e-12 {
            warn!("baseline cost vectors are colinear; using uniform simplex weights");
            return Ok(uniform_simplex_rays(k, n));
        }
        let step = (hi - lo) / (n + 1) as f64;
        return Ok((1..=n)
            .map(|i| {
                let theta = (lo + i as f64 * step).clamp(0.0, FRAC_PI_2);
                weights_for_direction(&[theta.cos(), theta.sin()])
            })
            .collect());
    }

    let units: Vec<Vec<f64>> = baseline_costs
        .iter()
        .map(|row| {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.iter().map(|v| v / norm).collect()
        })
        .collect();
    let rank = {
        let m = nalgebra::DMatrix::from_fn(3, 3, |i, j| units[i][j]);
        m.rank(1e-9)
    };
    if rank < 3 {
        warn!("baseline cost vectors are degenerate; using uniform simplex weights");
        return Ok(uniform_simplex_rays(k, n));
    }
    Ok(barycentric_points(n)
        .into_iter()
        .map(|w| {
            let d: Vec<f64> = (0..3).map(|c| (0..3).map(|i| w[i] * units[i][c]).sum()).collect();
            weights_for_direction(&d)
        })
        .collect())
}

/// `n` bound vectors for the non-primary objectives, equally spaced between
/// zero and the primary baseline's cost on each of them:
/// `ε_k = i/(n+1) · baseline[primary][k]` for `i = 1..=n`.
pub fn generate_epsilon_bounds(baseline_costs: &[Vec<f64>], primary: usize, n: usize) -> Result<Vec<Vec<f64>>> {
    let k = baseline_costs.len();
    if primary >= k {
        return Err(Error::IndexOutOfRange { index: primary, limit: k });
    }
    if n == 0 {
        return Err(Error::config("at least one bound set is required"));
    }
    let row = &baseline_costs[primary];
    if row.len() != k || row.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::config("baseline costs must be finite and nonnegative"));
    }
    Ok((1..=n)
        .map(|i| {
            let f = i as f64 / (n + 1) as f64;
            (0..k).filter(|&j| j != primary).map(|j| f * row[j]).collect()
        })
        .collect())
}

/// Preferences of a label set for a rule: rays for priority rules, bound
/// sets for the bound-based ones.
pub fn preferences_for(
    kind: CombinatorKind,
    rays: &[Vec<f64>],
    bounds: &[Vec<f64>],
    cfg: &ExperimentConfig,
) -> Vec<Preference> {
    if kind.uses_bounds() {
        bounds.iter().map(|b| Preference::epsilon_constraint(cfg.epsilon.primary, b.clone(), cfg.epsilon.mu)).collect()
    } else {
        rays.iter().map(|r| Preference::priority(r.clone())).collect()
    }
}

/// Maximum weighted loss of a cost vector for a priority preference.
pub fn preference_mwl(preference: &Preference, costs: &[f64]) -> Option<f64> {
    preference.weights().map(|r| mwl(costs, r))
}

pub(crate) fn train_one(
    data: &DataBundle,
    preference: &Preference,
    kind: CombinatorKind,
    smoothing: bool,
    gbm: &GBMConfig,
    cfg: &ExperimentConfig,
) -> Result<TrainOutput> {
    let options = TrainOptions { smoothing, params: cfg.combinator.clone(), validation: data.valid.as_ref() };
    train(&data.train, preference, kind, gbm, std::slice::from_ref(&cfg.loss), &options)
}
