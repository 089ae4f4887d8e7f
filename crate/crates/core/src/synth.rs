//! Synthetic multi-label ranking data with controllable label conflict.
//!
//! Each label orders items by its own linear utility `⟨w_k, x⟩ + noise`,
//! and the directions `w_k` share a prescribed pairwise cosine. Utilities
//! are binned per query into equal-frequency relevance levels, which serve
//! as both the ordinal and the raw label values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{quantize_label, Item, LabelPromotionSpec, MultiLabelDataset, QueryGroup, RawDataset, RawGroup};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub queries: usize,
    pub items_per_query: usize,
    pub test_queries: usize,
    pub features: usize,
    pub labels: usize,
    pub levels: usize,
    /// Pairwise cosine between label directions; at least `−1/(labels − 1)`.
    pub correlation: f64,
    /// Standard deviation of the per-label utility noise.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            queries: 200,
            items_per_query: 20,
            test_queries: 100,
            features: 10,
            labels: 2,
            levels: 5,
            correlation: -0.5,
            noise: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.queries == 0 || self.items_per_query < 2 {
            return Err(Error::config("need at least one query with two items"));
        }
        if self.labels == 0 || self.features < self.labels {
            return Err(Error::config("need at least one label and no more labels than features"));
        }
        if self.levels < 2 {
            return Err(Error::config("need at least two relevance levels"));
        }
        let floor = if self.labels > 1 { -1.0 / (self.labels - 1) as f64 } else { -1.0 };
        if !(self.correlation >= floor && self.correlation < 1.0) {
            return Err(Error::config(format!("correlation must lie in [{floor}, 1)")));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::config("noise must be nonnegative"));
        }
        Ok(())
    }
}

/// Training split only.
pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<MultiLabelDataset> {
    Ok(generate_split(cfg, seed)?.0)
}

/// Training and test splits sharing label directions. The training split
/// does not depend on `test_queries`.
pub fn generate_split(cfg: &SynthConfig, seed: u64) -> Result<(MultiLabelDataset, MultiLabelDataset)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = label_directions(cfg, &mut rng);
    let train = sample_queries(cfg, &dirs, cfg.queries, "q", &mut rng)?;
    let test = sample_queries(cfg, &dirs, cfg.test_queries.max(1), "t", &mut rng)?;
    Ok((train, test))
}

/// Unit directions with pairwise cosine `cfg.correlation`: orthonormal
/// vectors shifted toward their mean.
fn label_directions(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let (k, p) = (cfg.labels, cfg.features);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    if k == 1 {
        return basis;
    }
    // With w_k = e_k − t·mean(e), cos(w_i, w_j) = a / (K + a), a = t² − 2t.
    let rho = cfg.correlation;
    let a = rho * k as f64 / (1.0 - rho);
    let t = 1.0 - (1.0 + a).max(0.0).sqrt();
    let mean: Vec<f64> = (0..p).map(|j| basis.iter().map(|b| b[j]).sum::<f64>() / k as f64).collect();
    basis
        .iter()
        .map(|b| {
            let w: Vec<f64> = b.iter().zip(&mean).map(|(x, m)| x - t * m).collect();
            let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            w.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

fn sample_queries(
    cfg: &SynthConfig,
    dirs: &[Vec<f64>],
    queries: usize,
    prefix: &str,
    rng: &mut ChaCha8Rng,
) -> Result<MultiLabelDataset> {
    let (k, n) = (cfg.labels, cfg.items_per_query);
    let mut groups = Vec::with_capacity(queries);
    for q in 0..queries {
        let features: Vec<Vec<f64>> =
            (0..n).map(|_| (0..cfg.features).map(|_| StandardNormal.sample(rng)).collect()).collect();
        let mut utilities = vec![vec![0.0; n]; k];
        for (i, x) in features.iter().enumerate() {
            for (label, w) in dirs.iter().enumerate() {
                let noise: f64 = StandardNormal.sample(rng);
                utilities[label][i] = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + cfg.noise * noise;
            }
        }
        let levels: Vec<Vec<u32>> = utilities.iter().map(|u| quantize_label(u, cfg.levels)).collect::<Result<_>>()?;
        let items = features
            .into_iter()
            .enumerate()
            .map(|(i, features)| Item {
                features,
                labels: levels.iter().map(|l| f64::from(l[i])).collect(),
                raw_labels: levels.iter().map(|l| f64::from(l[i])).collect(),
            })
            .collect();
        groups.push(QueryGroup { query_id: format!("{prefix}{q}"), items });
    }
    let names = (1..=k).map(|i| format!("y{i}")).collect();
    MultiLabelDataset::new(groups, cfg.features, names)
}

/// LETOR layout of a multi-label dataset: the first label is the line
/// label and the remaining labels are appended as extra feature columns.
/// The returned promotion spec recovers the labels (ordinal values only).
pub fn to_letor(data: &MultiLabelDataset) -> (RawDataset, LabelPromotionSpec) {
    let p = data.feature_dim();
    let k = data.label_count();
    let groups = data
        .groups()
        .iter()
        .map(|g| RawGroup {
            query_id: g.query_id.clone(),
            labels: g.items.iter().map(|it| it.labels[0]).collect(),
            features: g.items.iter().map(|it| it.features.iter().chain(&it.labels[1..]).copied().collect()).collect(),
        })
        .collect();
    let spec = LabelPromotionSpec {
        promoted_feature_indices: (p..p + k - 1).collect(),
        keep_original_label: true,
        quantize_levels: None,
    };
    (RawDataset { groups, feature_dim: p + k - 1 }, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::promote_labels;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        d / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    #[test]
    fn directions_have_requested_cosine() {
        for (labels, rho) in [(2, -0.5), (3, -0.4), (3, -0.5), (4, 0.2)] {
            let cfg = SynthConfig { labels, correlation: rho, ..SynthConfig::default() };
            let dirs = label_directions(&cfg, &mut ChaCha8Rng::seed_from_u64(1));
            for i in 0..labels {
                assert!((dirs[i].iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
                for j in 0..i {
                    assert!((cosine(&dirs[i], &dirs[j]) - rho).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn shape_and_levels() {
        let cfg = SynthConfig { queries: 7, items_per_query: 20, test_queries: 3, ..SynthConfig::default() };
        let (train, test) = generate_split(&cfg, 3).unwrap();
        assert_eq!((train.num_queries(), train.num_items(), train.feature_dim()), (7, 140, 10));
        assert_eq!(test.num_queries(), 3);
        for g in train.groups() {
            for k in 0..2 {
                let mut counts = [0; 5];
                for it in &g.items {
                    counts[it.labels[k] as usize] += 1;
                }
                assert_eq!(counts, [4; 5]);
            }
        }
    }

    #[test]
    fn train_split_independent_of_test_size() {
        let a = SynthConfig { queries: 5, test_queries: 1, ..SynthConfig::default() };
        let b = SynthConfig { test_queries: 50, ..a.clone() };
        assert_eq!(generate(&a, 9).unwrap(), generate(&b, 9).unwrap());
        assert_ne!(generate(&a, 9).unwrap(), generate(&a, 10).unwrap());
    }

    #[test]
    fn labels_conflict() {
        let data = generate(&SynthConfig::default(), 0).unwrap();
        let (y1, y2) = (data.label_column(0), data.label_column(1));
        let mean = 2.0;
        let (y1, y2): (Vec<f64>, Vec<f64>) =
            (y1.iter().map(|v| v - mean).collect(), y2.iter().map(|v| v - mean).collect());
        assert!(cosine(&y1, &y2) < -0.2);
    }

    #[test]
    fn letor_layout_round_trips_labels() {
        let cfg = SynthConfig { queries: 4, labels: 3, correlation: -0.3, ..SynthConfig::default() };
        let data = generate(&cfg, 2).unwrap();
        let (raw, spec) = to_letor(&data);
        let back = promote_labels(&raw, &spec).unwrap();
        assert_eq!(back.feature_dim(), data.feature_dim());
        for k in 0..3 {
            assert_eq!(back.label_column(k), data.label_column(k));
        }
        assert_eq!(back.feature_matrix(), data.feature_matrix());
    }
}
