//! Grid runs: every label set × method × preference × seed, followed by the
//! per-method aggregates and orig-vs-smoothed comparisons.

use std::cmp::Ordering;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MethodSpec};
use super::protocol::{
    evaluate, generate_epsilon_bounds, generate_rays, load_data, preference_mwl, preferences_for,
    single_objective_baselines, train_one, Baseline, DataBundle, Evaluation,
};
use crate::combinators::{CombinatorKind, Preference};
use crate::pareto::{default_reference, hypervolume, paired_t_test, vno, HVIConfig, Orientation, VnoOrder};
use crate::trainer::{GBMConfig, StopReason, TrainingTrace, TreeEnsemble};
use crate::{Error, Result};

/// Baselines and preferences of one label subset.
#[derive(Debug, Clone)]
pub struct LabelSetContext {
    pub index: usize,
    pub labels: Vec<usize>,
    pub name: String,
    pub label_names: Vec<String>,
    pub baselines: Vec<Baseline>,
    pub rays: Vec<Vec<f64>>,
    pub bounds: Vec<Vec<f64>>,
}

impl LabelSetContext {
    pub fn baseline_costs(&self) -> Vec<Vec<f64>> {
        self.baselines.iter().map(|b| b.train_costs.clone()).collect()
    }

    pub fn preferences(&self, kind: CombinatorKind, cfg: &ExperimentConfig) -> Vec<Preference> {
        preferences_for(kind, &self.rays, &self.bounds, cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub n_trees: usize,
    pub stop_reason: StopReason,
    pub train_costs: Vec<f64>,
    pub test: Evaluation,
    pub mwl_train: Option<f64>,
    pub mwl_test: Option<f64>,
    pub vno_test: f64,
    /// Iterations at which the rule fell back to another rule.
    pub fallbacks: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub label_set: usize,
    pub method: MethodSpec,
    pub preference_index: usize,
    pub seed: u64,
    pub preference: Preference,
    pub outcome: std::result::Result<RunMetrics, String>,
    pub trace: Option<TrainingTrace>,
    pub model: Option<TreeEnsemble>,
}

impl RunResult {
    pub fn metrics(&self) -> Option<&RunMetrics> {
        self.outcome.as_ref().ok()
    }

    /// File stem shared by the trace and model of this run.
    pub fn stem(&self, ctx: &LabelSetContext) -> String {
        format!("{}_{}_p{}_s{}", ctx.name, self.method, self.preference_index, self.seed)
    }
}

/// Hypervolume of one method's solutions (one per preference) for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HviRow {
    pub label_set: usize,
    pub method: MethodSpec,
    pub seed: u64,
    pub points: usize,
    pub hvi_cost: f64,
    pub hvi_ndcg: f64,
}

/// One metric of a rule with and without smoothing. SLA is paired with LS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label_set: usize,
    pub family: String,
    pub metric: String,
    pub orig: f64,
    pub ma: f64,
    pub gain_pct: f64,
    pub p_value: Option<f64>,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub label_set: usize,
    pub method: MethodSpec,
    pub runs: usize,
    pub failed: usize,
    pub mean_mwl_test: Option<f64>,
    pub mean_vno_test: f64,
    pub mean_hvi_cost: f64,
    pub mean_hvi_ndcg: f64,
    pub mean_test_ndcg: Vec<f64>,
    /// 1 = best by mean test MWL, ties broken by box volume. Bound-based rules are unranked.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub config: ExperimentConfig,
    pub label_sets: Vec<LabelSetContext>,
    pub runs: Vec<RunResult>,
    pub hvi: Vec<HviRow>,
    pub comparisons: Vec<Comparison>,
    pub summaries: Vec<MethodSummary>,
}

impl GridReport {
    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn comparison(&self, label_set: usize, family: &str, metric: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.label_set == label_set && c.family == family && c.metric == metric)
    }

    pub fn runs_of(&self, label_set: usize, method: MethodSpec) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(move |r| r.label_set == label_set && r.method == method)
    }

    pub fn hvi_of(&self, label_set: usize, method: MethodSpec) -> Vec<&HviRow> {
        self.hvi.iter().filter(|h| h.label_set == label_set && h.method == method).collect()
    }
}

pub(crate) fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
}

pub(crate) fn seeded(gbm: &GBMConfig, seed: u64) -> GBMConfig {
    GBMConfig { rng_seed: seed, ..gbm.clone() }
}

/// Baselines, rays and bounds for every configured label set.
pub fn prepare_label_sets(cfg: &ExperimentConfig, data: &DataBundle) -> Result<Vec<(LabelSetContext, DataBundle)>> {
    let base_gbm = seeded(&cfg.gbm, cfg.seeds[0]);
    cfg.label_sets
        .iter()
        .enumerate()
        .map(|(index, labels)| {
            let bundle = data.select_labels(labels)?;
            let label_names = bundle.train.label_names().to_vec();
            let name = label_names.join("+");
            let k = labels.len();
            let baselines = single_objective_baselines(&bundle, &base_gbm, &cfg.loss, cfg.metrics.ndcg_k)?;
            let costs: Vec<Vec<f64>> = baselines.iter().map(|b| b.train_costs.clone()).collect();
            let rays = match k {
                1 => vec![vec![1.0]],
                2 | 3 => generate_rays(&costs, cfg.n_preferences)?,
                _ => Vec::new(),
            };
            let bounds = if k >= 2 {
                generate_epsilon_bounds(&costs, cfg.epsilon.primary, cfg.n_preferences)?
            } else {
                Vec::new()
            };
            info!("label set {name}: {} rays, {} bound sets", rays.len(), bounds.len());
            Ok((LabelSetContext { index, labels: labels.clone(), name, label_names, baselines, rays, bounds }, bundle))
        })
        .collect()
}

struct Job {
    label_set: usize,
    method: MethodSpec,
    preference_index: usize,
    seed: u64,
    preference: Preference,
}

fn run_job(job: &Job, bundle: &DataBundle, cfg: &ExperimentConfig) -> RunResult {
    let gbm = seeded(&cfg.gbm, job.seed);
    let attempt = || -> Result<(RunMetrics, TrainingTrace, TreeEnsemble)> {
        let out = train_one(bundle, &job.preference, job.method.kind, job.method.smoothing, &gbm, cfg)?;
        let test = evaluate(&out.ensemble, &bundle.test, &cfg.loss, cfg.metrics.ndcg_k)?;
        let train_costs = out.trace.final_costs.clone();
        let metrics = RunMetrics {
            n_trees: out.ensemble.len(),
            stop_reason: out.trace.stop_reason,
            mwl_train: preference_mwl(&job.preference, &train_costs),
            mwl_test: preference_mwl(&job.preference, &test.costs),
            vno_test: vno(&test.costs),
            fallbacks: out.trace.records.iter().filter(|r| r.note.is_some()).count(),
            train_costs,
            test,
        };
        Ok((metrics, out.trace, out.ensemble))
    };
    let (outcome, trace, model) = match attempt() {
        Ok((m, t, e)) => (Ok(m), Some(t), Some(e)),
        Err(e) => {
            warn!("run {} pref {} seed {} failed: {e}", job.method, job.preference_index, job.seed);
            (Err(e.to_string()), None, None)
        }
    };
    RunResult {
        label_set: job.label_set,
        method: job.method,
        preference_index: job.preference_index,
        seed: job.seed,
        preference: job.preference.clone(),
        outcome,
        trace,
        model,
    }
}

/// Run the full grid described by `cfg`. Individual run failures are
/// recorded in the report; configuration and data errors abort.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridReport> {
    cfg.validate()?;
    let data = load_data(&cfg.data)?;
    run_grid_on(cfg, &data)
}

/// [`run_grid`] on already loaded data.
pub fn run_grid_on(cfg: &ExperimentConfig, data: &DataBundle) -> Result<GridReport> {
    cfg.validate()?;
    let pool = thread_pool(cfg.workers)?;
    pool.install(|| {
        let prepared = prepare_label_sets(cfg, data)?;
        let mut jobs = Vec::new();
        for (ctx, _) in &prepared {
            for &method in &cfg.methods {
                let prefs = ctx.preferences(method.kind, cfg);
                if prefs.is_empty() {
                    warn!("no preferences for {method} on label set {}; skipped", ctx.name);
                }
                for (preference_index, preference) in prefs.into_iter().enumerate() {
                    for &seed in &cfg.seeds {
                        jobs.push(Job {
                            label_set: ctx.index,
                            method,
                            preference_index,
                            seed,
                            preference: preference.clone(),
                        });
                    }
                }
            }
        }
        info!("running {} training jobs", jobs.len());
        let runs: Vec<RunResult> = jobs.par_iter().map(|job| run_job(job, &prepared[job.label_set].1, cfg)).collect();
        let label_sets: Vec<LabelSetContext> = prepared.into_iter().map(|(ctx, _)| ctx).collect();
        let hvi = hvi_rows(cfg, &label_sets, &runs)?;
        let comparisons = comparisons(cfg, &label_sets, &runs, &hvi)?;
        let summaries = summaries(cfg, &label_sets, &runs, &hvi);
        Ok(GridReport { config: cfg.clone(), label_sets, runs, hvi, comparisons, summaries })
    })
}

fn column_max(points: &[Vec<f64>]) -> Vec<f64> {
    let k = points[0].len();
    (0..k).map(|i| points.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max)).collect()
}

fn hvi_rows(cfg: &ExperimentConfig, label_sets: &[LabelSetContext], runs: &[RunResult]) -> Result<Vec<HviRow>> {
    let mut rows = Vec::new();
    for ctx in label_sets {
        let ok: Vec<&RunMetrics> =
            runs.iter().filter(|r| r.label_set == ctx.index).filter_map(|r| r.metrics()).collect();
        if ok.is_empty() {
            continue;
        }
        // Shared reference over every model of the label set, baselines included.
        let mut costs: Vec<Vec<f64>> = ok.iter().map(|m| m.train_costs.clone()).collect();
        costs.extend(ctx.baselines.iter().map(|b| b.train_costs.clone()));
        let mut ndcgs: Vec<Vec<f64>> = ok.iter().map(|m| m.test.ndcg.clone()).collect();
        ndcgs.extend(ctx.baselines.iter().map(|b| b.test.ndcg.clone()));
        let scaling: Vec<f64> =
            column_max(&ctx.baseline_costs()).into_iter().map(|v| if v > 0.0 { v } else { 1.0 }).collect();
        let cost_cfg = HVIConfig::new(default_reference(&costs, Orientation::Cost)?).with_scaling(scaling);
        let ndcg_cfg =
            HVIConfig::new(default_reference(&ndcgs, Orientation::Gain)?).with_orientation(Orientation::Gain);

        for &method in &cfg.methods {
            for &seed in &cfg.seeds {
                let group: Vec<&RunMetrics> = runs
                    .iter()
                    .filter(|r| r.label_set == ctx.index && r.method == method && r.seed == seed)
                    .filter_map(|r| r.metrics())
                    .collect();
                if group.is_empty() {
                    continue;
                }
                let pc: Vec<Vec<f64>> = group.iter().map(|m| m.train_costs.clone()).collect();
                let pn: Vec<Vec<f64>> = group.iter().map(|m| m.test.ndcg.clone()).collect();
                rows.push(HviRow {
                    label_set: ctx.index,
                    method,
                    seed,
                    points: group.len(),
                    hvi_cost: hypervolume(&pc, &cost_cfg)?,
                    hvi_ndcg: hypervolume(&pn, &ndcg_cfg)?,
                });
            }
        }
    }
    Ok(rows)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn compare(label_set: usize, family: &str, metric: &str, orig: &[f64], ma: &[f64]) -> Result<Option<Comparison>> {
    if orig.is_empty() {
        return Ok(None);
    }
    let (o, m) = (mean(orig), mean(ma));
    let p_value = if orig.len() >= 2 { Some(paired_t_test(orig, ma)?.p_value) } else { None };
    let gain_pct = if o != 0.0 { (m - o) / o.abs() * 100.0 } else { 0.0 };
    Ok(Some(Comparison {
        label_set,
        family: family.to_string(),
        metric: metric.to_string(),
        orig: o,
        ma: m,
        gain_pct,
        p_value,
        pairs: orig.len(),
    }))
}

/// Rule pairs compared in the aggregate table: each rule against its
/// smoothed variant, and SLA against LS.
pub fn comparison_pairs(methods: &[MethodSpec]) -> Vec<(String, MethodSpec, MethodSpec)> {
    let mut pairs = Vec::new();
    let has = |m: MethodSpec| methods.contains(&m);
    let sla = MethodSpec::new(CombinatorKind::Sla, false);
    let ls = MethodSpec::new(CombinatorKind::Ls, false);
    if has(sla) && has(ls) {
        pairs.push(("sla/ls".to_string(), sla, ls));
    }
    for kind in CombinatorKind::ALL {
        let (o, m) = (MethodSpec::new(kind, false), MethodSpec::new(kind, true));
        if has(o) && has(m) {
            pairs.push((kind.to_string(), o, m));
        }
    }
    pairs
}

fn comparisons(
    cfg: &ExperimentConfig,
    label_sets: &[LabelSetContext],
    runs: &[RunResult],
    hvi: &[HviRow],
) -> Result<Vec<Comparison>> {
    let mut out = Vec::new();
    for ctx in label_sets {
        for (family, orig, ma) in comparison_pairs(&cfg.methods) {
            // Pairs matched on (preference, seed).
            let (mut mo, mut mm) = (Vec::new(), Vec::new());
            for a in runs.iter().filter(|r| r.label_set == ctx.index && r.method == orig) {
                let partner = runs.iter().find(|b| {
                    b.label_set == ctx.index
                        && b.method == ma
                        && b.preference_index == a.preference_index
                        && b.seed == a.seed
                });
                if let (Some(x), Some(y)) =
                    (a.metrics().and_then(|m| m.mwl_test), partner.and_then(|b| b.metrics()).and_then(|m| m.mwl_test))
                {
                    mo.push(x);
                    mm.push(y);
                }
            }
            out.extend(compare(ctx.index, &family, "mwl_test", &mo, &mm)?);

            let (mut co, mut cm, mut no, mut nm) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for a in hvi.iter().filter(|h| h.label_set == ctx.index && h.method == orig) {
                if let Some(b) = hvi.iter().find(|h| h.label_set == ctx.index && h.method == ma && h.seed == a.seed) {
                    co.push(a.hvi_cost);
                    cm.push(b.hvi_cost);
                    no.push(a.hvi_ndcg);
                    nm.push(b.hvi_ndcg);
                }
            }
            out.extend(compare(ctx.index, &family, "hvi_cost", &co, &cm)?);
            out.extend(compare(ctx.index, &family, "hvi_ndcg", &no, &nm)?);
        }
    }
    Ok(out)
}

fn rank_order(a: &MethodSummary, b: &MethodSummary, tol: f64, order: VnoOrder) -> Ordering {
    let (x, y) = (a.mean_mwl_test.unwrap_or(f64::INFINITY), b.mean_mwl_test.unwrap_or(f64::INFINITY));
    let scale = x.abs().max(y.abs());
    if (x - y).abs() > tol * scale {
        return x.total_cmp(&y);
    }
    let v = a.mean_vno_test.total_cmp(&b.mean_vno_test);
    let v = match order {
        VnoOrder::LowerWins => v,
        VnoOrder::HigherWins => v.reverse(),
    };
    v.then(a.method.cmp(&b.method))
}

fn summaries(
    cfg: &ExperimentConfig,
    label_sets: &[LabelSetContext],
    runs: &[RunResult],
    hvi: &[HviRow],
) -> Vec<MethodSummary> {
    let mut out = Vec::new();
    for ctx in label_sets {
        let mut rows: Vec<MethodSummary> = Vec::new();
        for &method in &cfg.methods {
            let all: Vec<&RunResult> = runs.iter().filter(|r| r.label_set == ctx.index && r.method == method).collect();
            if all.is_empty() {
                continue;
            }
            let ok: Vec<&RunMetrics> = all.iter().filter_map(|r| r.metrics()).collect();
            let mwls: Vec<f64> = ok.iter().filter_map(|m| m.mwl_test).collect();
            let hv: Vec<&HviRow> = hvi.iter().filter(|h| h.label_set == ctx.index && h.method == method).collect();
            let k = ctx.labels.len();
            let mean_test_ndcg = if ok.is_empty() {
                vec![f64::NAN; k]
            } else {
                (0..k).map(|i| mean(&ok.iter().map(|m| m.test.ndcg[i]).collect::<Vec<_>>())).collect()
            };
            let vnos: Vec<f64> = ok.iter().map(|m| m.vno_test).collect();
            rows.push(MethodSummary {
                label_set: ctx.index,
                method,
                runs: all.len(),
                failed: all.len() - ok.len(),
                mean_mwl_test: (!mwls.is_empty()).then(|| mean(&mwls)),
                mean_vno_test: if vnos.is_empty() { f64::NAN } else { mean(&vnos) },
                mean_hvi_cost: if hv.is_empty() {
                    f64::NAN
                } else {
                    mean(&hv.iter().map(|h| h.hvi_cost).collect::<Vec<_>>())
                },
                mean_hvi_ndcg: if hv.is_empty() {
                    f64::NAN
                } else {
                    mean(&hv.iter().map(|h| h.hvi_ndcg).collect::<Vec<_>>())
                },
                mean_test_ndcg,
                rank: None,
            });
        }
        let mut ranked: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].mean_mwl_test.is_some()).collect();
        ranked.sort_by(|&a, &b| rank_order(&rows[a], &rows[b], cfg.metrics.mwl_tie_tolerance, cfg.metrics.vno_order));
        for (pos, i) in ranked.into_iter().enumerate() {
            rows[i].rank = Some(pos + 1);
        }
        out.extend(rows);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_follow_available_methods() {
        let methods: Vec<MethodSpec> = ["sla", "ls", "wc", "wc+ma", "epo"].iter().map(|s| s.parse().unwrap()).collect();
        let pairs = comparison_pairs(&methods);
        let names: Vec<&str> = pairs.iter().map(|p| p.0.as_str()).collect();
        assert_eq!(names, vec!["sla/ls", "wc"]);
    }

    #[test]
    fn comparison_gain_and_p_value() {
        let c = compare(0, "wc", "mwl_test", &[2.0, 4.0, 6.0], &[1.0, 2.5, 4.0]).unwrap().unwrap();
        assert_eq!(c.orig, 4.0);
        assert_eq!(c.ma, 2.5);
        assert!((c.gain_pct + 37.5).abs() < 1e-12);
        // Differences 1, 1.5, 2: t = 1.5 / (0.5/√3) = 3√3 on 2 dof.
        let t = 3.0 * 3f64.sqrt();
        let expected = 1.0 - t / (2.0 + t * t).sqrt();
        assert!((c.p_value.unwrap() - expected).abs() < 1e-12);
        assert!(compare(0, "wc", "mwl_test", &[], &[]).unwrap().is_none());
    }
}
