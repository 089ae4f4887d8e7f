//! Improving on an existing model: every run starts from scratch but the
//! rules see costs relative to the reference model's costs.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MethodSpec};
use super::grid::{seeded, thread_pool};
use super::protocol::{evaluate, generate_rays, train_one, DataBundle, Evaluation};
use crate::combinators::{CombinatorKind, Preference};
use crate::pareto::{dominates, Orientation};
use crate::trainer::{train, TrainOptions, TrainingTrace, TreeEnsemble};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRun {
    pub method: MethodSpec,
    pub preference_index: usize,
    pub seed: u64,
    pub weights: Vec<f64>,
    pub outcome: std::result::Result<ReferenceMetrics, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMetrics {
    pub train_costs: Vec<f64>,
    pub test: Evaluation,
    /// `c − b` on the training data; negative entries are improvements.
    pub improvement: Vec<f64>,
    pub dominates_reference: bool,
    /// `max_k r_k (c_k − b_k)` on the training data.
    pub mwl_vs_reference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub method: MethodSpec,
    pub runs: usize,
    pub failed: usize,
    pub dominating: usize,
    pub mean_mwl_vs_reference: f64,
    pub mean_improvement: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReferenceReport {
    pub label_names: Vec<String>,
    pub reference_costs: Vec<f64>,
    pub reference_test: Evaluation,
    pub preferences: Vec<Vec<f64>>,
    pub runs: Vec<ReferenceRun>,
    pub traces: Vec<Option<TrainingTrace>>,
    pub summaries: Vec<ReferenceSummary>,
}

impl ReferenceReport {
    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn summary(&self, method: MethodSpec) -> Option<&ReferenceSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

/// Preference weights spread between the objective axes, used when the
/// reference model is the only anchor.
pub fn reference_preferences(reference_costs: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
    let k = reference_costs.len();
    if reference_costs.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::config("reference costs must be positive"));
    }
    let axes: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row = vec![0.0; k];
            row[i] = reference_costs[i];
            row
        })
        .collect();
    generate_rays(&axes, n)
}

/// The under-trained model used when no reference model is supplied: the
/// configured priority (uniform by default) trained with LS for
/// `reference.trees` trees.
pub fn build_reference_model(cfg: &ExperimentConfig, data: &DataBundle) -> Result<TreeEnsemble> {
    let k = data.train.label_count();
    let weights = cfg.reference.weights.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]);
    let gbm = crate::trainer::GBMConfig {
        n_trees: cfg.reference.trees,
        early_stopping_rounds: None,
        ..seeded(&cfg.gbm, cfg.seeds[0])
    };
    let out = train(
        &data.train,
        &Preference::priority(weights),
        CombinatorKind::Ls,
        &gbm,
        std::slice::from_ref(&cfg.loss),
        &TrainOptions { smoothing: false, params: cfg.combinator.clone(), validation: None },
    )?;
    Ok(out.ensemble)
}

/// Train each configured reference method for every preference and seed
/// against the reference model's training costs. An empty preference list
/// is an error.
pub fn explore_from_reference(
    cfg: &ExperimentConfig,
    data: &DataBundle,
    reference: &TreeEnsemble,
    preferences: &[Vec<f64>],
) -> Result<ReferenceReport> {
    if preferences.is_empty() {
        return Err(Error::config("reference exploration needs at least one preference"));
    }
    if cfg.reference.methods.is_empty() {
        return Err(Error::config("reference.methods must not be empty"));
    }
    let k = data.train.label_count();
    for m in &cfg.reference.methods {
        if m.kind.uses_bounds() {
            return Err(Error::config(format!("{m} does not take priority weights")));
        }
    }
    let pool = thread_pool(cfg.workers)?;
    pool.install(|| {
        let b = evaluate(reference, &data.train, &cfg.loss, cfg.metrics.ndcg_k)?.costs;
        let reference_test = evaluate(reference, &data.test, &cfg.loss, cfg.metrics.ndcg_k)?;
        info!("reference training costs {b:?}");
        let mut jobs = Vec::new();
        for &method in &cfg.reference.methods {
            for (i, r) in preferences.iter().enumerate() {
                if r.len() != k {
                    return Err(Error::DimensionMismatch { expected: k, found: r.len() });
                }
                for &seed in &cfg.seeds {
                    jobs.push((method, i, seed, r.clone()));
                }
            }
        }
        let results: Vec<(ReferenceRun, Option<TrainingTrace>)> = jobs
            .par_iter()
            .map(|(method, i, seed, r)| {
                let pref = Preference::priority(r.clone()).with_reference(b.clone());
                let gbm = seeded(&cfg.gbm, *seed);
                let attempt = || -> Result<(ReferenceMetrics, TrainingTrace)> {
                    let out = train_one(data, &pref, method.kind, method.smoothing, &gbm, cfg)?;
                    let test = evaluate(&out.ensemble, &data.test, &cfg.loss, cfg.metrics.ndcg_k)?;
                    let c = out.trace.final_costs.clone();
                    let improvement: Vec<f64> = c.iter().zip(&b).map(|(c, b)| c - b).collect();
                    let mwl_vs_reference =
                        improvement.iter().zip(r).map(|(d, w)| w * d).fold(f64::NEG_INFINITY, f64::max);
                    let metrics = ReferenceMetrics {
                        dominates_reference: dominates(&c, &b, Orientation::Cost),
                        train_costs: c,
                        test,
                        improvement,
                        mwl_vs_reference,
                    };
                    Ok((metrics, out.trace))
                };
                let (outcome, trace) = match attempt() {
                    Ok((m, t)) => (Ok(m), Some(t)),
                    Err(e) => {
                        warn!("reference run {method} pref {i} seed {seed} failed: {e}");
                        (Err(e.to_string()), None)
                    }
                };
                (
                    ReferenceRun { method: *method, preference_index: *i, seed: *seed, weights: r.clone(), outcome },
                    trace,
                )
            })
            .collect();
        let (runs, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();

        let summaries = cfg
            .reference
            .methods
            .iter()
            .map(|&method| {
                let all: Vec<&ReferenceRun> = runs.iter().filter(|r| r.method == method).collect();
                let ok: Vec<&ReferenceMetrics> = all.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
                let n = ok.len().max(1) as f64;
                ReferenceSummary {
                    method,
                    runs: all.len(),
                    failed: all.len() - ok.len(),
                    dominating: ok.iter().filter(|m| m.dominates_reference).count(),
                    mean_mwl_vs_reference: if ok.is_empty() {
                        f64::NAN
                    } else {
                        ok.iter().map(|m| m.mwl_vs_reference).sum::<f64>() / n
                    },
                    mean_improvement: (0..k).map(|j| ok.iter().map(|m| m.improvement[j]).sum::<f64>() / n).collect(),
                }
            })
            .collect();
        Ok(ReferenceReport {
            label_names: data.train.label_names().to_vec(),
            reference_costs: b,
            reference_test,
            preferences: preferences.to_vec(),
            runs,
            traces,
            summaries,
        })
    })
}
