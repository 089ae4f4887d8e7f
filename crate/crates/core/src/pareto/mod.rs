//! Trade-off metrics over cost (or gain) vectors: dominance, maximum
//! weighted loss, the origin-box volume tie-breaker, hypervolume and paired
//! t-tests.

mod hypervolume;
mod ttest;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use hypervolume::{
    default_reference, hypervolume, hypervolume_2d, hypervolume_3d, hypervolume_monte_carlo, HVIConfig,
    MonteCarloEstimate,
};
pub use ttest::{paired_t_test, two_sided_p_value, TTest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Smaller is better.
    #[default]
    Cost,
    /// Larger is better.
    Gain,
}

/// Whether `p` is at least as good as `q` everywhere and strictly better
/// somewhere.
pub fn dominates(p: &[f64], q: &[f64], orientation: Orientation) -> bool {
    debug_assert_eq!(p.len(), q.len());
    let mut strict = false;
    for (&a, &b) in p.iter().zip(q) {
        let (a, b) = match orientation {
            Orientation::Cost => (a, b),
            Orientation::Gain => (b, a),
        };
        if a > b {
            return false;
        }
        strict |= a < b;
    }
    strict
}

/// Indices of the points no other point dominates, in input order.
pub fn pareto_filter_indices(points: &[Vec<f64>], orientation: Orientation) -> Vec<usize> {
    (0..points.len()).filter(|&i| !points.iter().any(|q| dominates(q, &points[i], orientation))).collect()
}

/// The non-dominated points, in input order.
pub fn pareto_filter(points: &[Vec<f64>], orientation: Orientation) -> Vec<Vec<f64>> {
    pareto_filter_indices(points, orientation).into_iter().map(|i| points[i].clone()).collect()
}

/// Maximum weighted loss `max_k r_k c_k`.
pub fn mwl(c: &[f64], r: &[f64]) -> f64 {
    c.iter().zip(r).map(|(c, r)| c * r).fold(f64::NEG_INFINITY, f64::max)
}

/// Volume of the box between the origin and `c`, negatives clamped to zero.
pub fn vno(c: &[f64]) -> f64 {
    c.iter().map(|v| v.max(0.0)).product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VnoOrder {
    #[default]
    LowerWins,
    HigherWins,
}

/// Ranks two cost vectors under priority `r`: lower MWL first; when the MWL
/// values agree within `rel_tol` (relative), the box volume decides.
/// `Ordering::Less` means `a` is better.
pub fn compare_models(a: &[f64], b: &[f64], r: &[f64], rel_tol: f64, order: VnoOrder) -> Ordering {
    let (ma, mb) = (mwl(a, r), mwl(b, r));
    let scale = ma.abs().max(mb.abs());
    if (ma - mb).abs() > rel_tol * scale {
        return ma.total_cmp(&mb);
    }
    let cmp = vno(a).total_cmp(&vno(b));
    match order {
        VnoOrder::LowerWins => cmp,
        VnoOrder::HigherWins => cmp.reverse(),
    }
}
