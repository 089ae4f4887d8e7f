//! Promotion of feature columns to relevance labels.

use log::warn;
use serde::{Deserialize, Serialize};

use super::letor::RawDataset;
use super::{Item, MultiLabelDataset, QueryGroup};
use crate::{Error, Result};

pub const DEFAULT_LEVELS: usize = 5;

/// Which feature columns (0-based) become labels. Promoted columns are removed
/// from the feature vectors so the model cannot read its own targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPromotionSpec {
    pub promoted_feature_indices: Vec<usize>,
    #[serde(default = "default_true")]
    pub keep_original_label: bool,
    /// Equal-frequency levels for promoted columns; `None` keeps raw values.
    #[serde(default = "default_levels")]
    pub quantize_levels: Option<usize>,
}

fn default_true() -> bool {
    true
}

fn default_levels() -> Option<usize> {
    Some(DEFAULT_LEVELS)
}

impl Default for LabelPromotionSpec {
    fn default() -> Self {
        Self { promoted_feature_indices: Vec::new(), keep_original_label: true, quantize_levels: default_levels() }
    }
}

impl LabelPromotionSpec {
    pub fn new(indices: impl Into<Vec<usize>>) -> Self {
        Self { promoted_feature_indices: indices.into(), ..Self::default() }
    }

    fn validate(&self, feature_dim: usize) -> Result<()> {
        let idx = &self.promoted_feature_indices;
        for (pos, &i) in idx.iter().enumerate() {
            if i >= feature_dim {
                return Err(Error::IndexOutOfRange { index: i, limit: feature_dim });
            }
            if idx[..pos].contains(&i) {
                return Err(Error::config(format!("feature {i} promoted twice")));
            }
        }
        if !self.keep_original_label && idx.is_empty() {
            return Err(Error::config("promotion would leave no labels"));
        }
        if let Some(levels) = self.quantize_levels {
            if levels < 2 {
                return Err(Error::config("quantization needs at least 2 levels"));
            }
        }
        Ok(())
    }
}

/// Build a multi-label dataset: the original label (if kept) comes first,
/// then promoted columns in spec order. Promoted columns are deleted from
/// every feature vector, so `feature_dim` shrinks by the number promoted.
pub fn promote_labels(raw: &RawDataset, spec: &LabelPromotionSpec) -> Result<MultiLabelDataset> {
    spec.validate(raw.feature_dim)?;
    let promoted = &spec.promoted_feature_indices;

    // Quantization is global per promoted column, not per query.
    let levels: Vec<Option<Vec<u32>>> = promoted
        .iter()
        .map(|&col| {
            spec.quantize_levels
                .map(|n| {
                    let values: Vec<f64> =
                        raw.groups.iter().flat_map(|g| g.features.iter().map(move |f| f[col])).collect();
                    quantize_label(&values, n)
                })
                .transpose()
        })
        .collect::<Result<_>>()?;

    let kept: Vec<usize> = (0..raw.feature_dim).filter(|c| !promoted.contains(c)).collect();
    let mut flat = 0usize;
    let groups = raw
        .groups
        .iter()
        .map(|g| {
            let items = g
                .labels
                .iter()
                .zip(&g.features)
                .map(|(&label, features)| {
                    let mut labels = Vec::with_capacity(promoted.len() + 1);
                    let mut raw_labels = Vec::with_capacity(promoted.len() + 1);
                    if spec.keep_original_label {
                        labels.push(label);
                        raw_labels.push(label);
                    }
                    for (j, &col) in promoted.iter().enumerate() {
                        raw_labels.push(features[col]);
                        labels.push(match &levels[j] {
                            Some(lv) => f64::from(lv[flat]),
                            None => features[col],
                        });
                    }
                    flat += 1;
                    Item { features: kept.iter().map(|&c| features[c]).collect(), labels, raw_labels }
                })
                .collect();
            QueryGroup { query_id: g.query_id.clone(), items }
        })
        .collect();

    let mut names = Vec::new();
    if spec.keep_original_label {
        names.push("label".to_string());
    }
    names.extend(promoted.iter().map(|c| format!("f{}", c + 1)));
    MultiLabelDataset::new(groups, kept.len(), names)
}

/// Equal-frequency binning into `n_levels` ordinal levels.
///
/// A value's level is `floor(n_levels · #{values < v} / n)`, so equal values
/// share a level and the map is monotone. A constant column maps to level 0.
pub fn quantize_label(values: &[f64], n_levels: usize) -> Result<Vec<u32>> {
    if n_levels < 2 {
        return Err(Error::config("quantization needs at least 2 levels"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("label column"));
    }
    let n = values.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    if values[order[0]] == values[order[n - 1]] {
        warn!("constant label column quantized to a single level");
        return Ok(vec![0; n]);
    }
    let mut out = vec![0u32; n];
    let mut start = 0;
    while start < n {
        let v = values[order[start]];
        let mut end = start;
        while end < n && values[order[end]] == v {
            end += 1;
        }
        let level = (n_levels * start / n) as u32;
        for &i in &order[start..end] {
            out[i] = level;
        }
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::letor::RawGroup;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn raw(p: usize, rows: usize) -> RawDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let groups = (0..3)
            .map(|q| RawGroup {
                query_id: q.to_string(),
                labels: (0..rows).map(|i| (i % 3) as f64).collect(),
                features: (0..rows).map(|_| (0..p).map(|c| c as f64 * 100.0 + rng.random::<f64>()).collect()).collect(),
            })
            .collect();
        RawDataset { groups, feature_dim: p }
    }

    #[test]
    fn promote_one_column_keeping_original() {
        let r = raw(5, 4);
        let spec = LabelPromotionSpec { quantize_levels: None, ..LabelPromotionSpec::new(vec![2]) };
        let d = promote_labels(&r, &spec).unwrap();
        assert_eq!(d.label_count(), 2);
        assert_eq!(d.feature_dim(), 4);
        for (item, (g, i)) in d.items().zip(r.groups.iter().flat_map(|g| (0..g.labels.len()).map(move |i| (g, i)))) {
            assert_eq!(item.labels[0], g.labels[i]);
            assert_eq!(item.labels[1], g.features[i][2]);
            assert_eq!(item.features, vec![g.features[i][0], g.features[i][1], g.features[i][3], g.features[i][4]]);
        }
    }

    #[test]
    fn empty_promotion_is_identity() {
        let r = raw(3, 2);
        let d = promote_labels(&r, &LabelPromotionSpec::new(vec![])).unwrap();
        assert_eq!(d.label_count(), 1);
        assert_eq!(d.feature_dim(), 3);
        assert_eq!(d.num_items(), r.num_items());
    }

    #[test]
    fn promoted_values_never_remain_in_features() {
        let r = raw(5, 6);
        let d = promote_labels(&r, &LabelPromotionSpec::new(vec![0, 4])).unwrap();
        assert_eq!(d.feature_dim(), 3);
        // Column c holds values in [100c, 100c + 1): scan every vector.
        for item in d.items() {
            for &v in &item.features {
                assert!(!(0.0..1.0).contains(&v) && !(400.0..401.0).contains(&v));
            }
        }
        // Group structure is preserved.
        assert_eq!(d.num_queries(), r.groups.len());
        for (a, b) in d.groups().iter().zip(&r.groups) {
            assert_eq!(a.len(), b.labels.len());
        }
    }

    #[test]
    fn promotion_rejects_bad_indices() {
        let r = raw(3, 2);
        assert!(matches!(
            promote_labels(&r, &LabelPromotionSpec::new(vec![3])),
            Err(Error::IndexOutOfRange { index: 3, limit: 3 })
        ));
        assert!(promote_labels(&r, &LabelPromotionSpec::new(vec![1, 1])).is_err());
    }

    #[test]
    fn reinserting_promoted_columns_restores_raw_matrix() {
        let r = raw(4, 5);
        let spec = LabelPromotionSpec { quantize_levels: None, ..LabelPromotionSpec::new(vec![3, 1]) };
        let d = promote_labels(&r, &spec).unwrap();
        let raw_rows = r.groups.iter().flat_map(|g| g.features.iter());
        for (item, row) in d.items().zip(raw_rows) {
            let mut rebuilt = item.features.clone();
            rebuilt.push(item.raw_labels[1]);
            rebuilt.push(item.raw_labels[2]);
            let mut expected = vec![row[0], row[2], row[3], row[1]];
            rebuilt.sort_by(f64::total_cmp);
            expected.sort_by(f64::total_cmp);
            assert_eq!(rebuilt, expected);
        }
    }

    #[test]
    fn quantize_equal_frequency() {
        assert_eq!(quantize_label(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), vec![0, 0, 1, 1]);
        assert_eq!(quantize_label(&[4.0, 3.0, 2.0, 1.0], 2).unwrap(), vec![1, 1, 0, 0]);
    }

    #[test]
    fn quantize_integral_levels_preserves_order() {
        let v: Vec<f64> = (0..50).map(|i| (i % 5) as f64).collect();
        let q = quantize_label(&v, 5).unwrap();
        for (a, b) in v.iter().zip(&q) {
            assert_eq!(*a as u32, *b);
        }
    }

    #[test]
    fn quantize_constant_column_is_level_zero() {
        assert_eq!(quantize_label(&[2.5; 6], 5).unwrap(), vec![0; 6]);
    }

    #[test]
    fn quantize_is_monotone_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..1000).map(|_| (rng.random::<f64>() * 20.0).round()).collect();
        let q = quantize_label(&v, 5).unwrap();
        for i in 0..v.len() {
            assert!(q[i] < 5);
            for j in 0..v.len() {
                if v[i] <= v[j] {
                    assert!(q[i] <= q[j]);
                }
            }
        }
    }

    fn ranks(v: &[f64]) -> Vec<f64> {
        // Average ranks for ties.
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn quantize_with_enough_levels_has_unit_spearman() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let q: Vec<f64> = quantize_label(&v, 1000).unwrap().into_iter().map(f64::from).collect();
        let rho = pearson(&ranks(&v), &ranks(&q));
        assert!((rho - 1.0).abs() < 1e-12, "spearman {rho}");
    }
}
