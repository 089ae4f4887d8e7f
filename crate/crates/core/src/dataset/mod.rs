//! Query-grouped multi-label ranking data.
//!
//! Text input is LETOR/SVMlight (`label qid:<id> idx:val ...`); see [`letor`].
//! [`promote`] turns selected feature columns into additional relevance labels
//! and [`cache`] stores parsed datasets in a compact binary form.

pub mod cache;
pub mod letor;
pub mod promote;

pub use letor::{parse_letor, parse_letor_file, write_letor, RawDataset, RawGroup};
pub use promote::{promote_labels, quantize_label, LabelPromotionSpec};

use crate::{Error, Result};

/// One query-item pair: its feature vector and `K` relevance labels.
///
/// `labels` are the ordinal levels used for gains and |ΔNDCG| weights.
/// `raw_labels` keep the unquantized values, which only differ from `labels`
/// for promoted continuous columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub features: Vec<f64>,
    pub labels: Vec<f64>,
    pub raw_labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub query_id: String,
    pub items: Vec<Item>,
}

impl QueryGroup {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// A validated multi-label dataset: `m ≥ 1` non-empty groups sharing the
/// feature dimension `p` and label count `K ≥ 1`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLabelDataset {
    groups: Vec<QueryGroup>,
    feature_dim: usize,
    label_names: Vec<String>,
}

impl MultiLabelDataset {
    pub fn new(groups: Vec<QueryGroup>, feature_dim: usize, label_names: Vec<String>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::EmptyInput);
        }
        let k = label_names.len();
        if k == 0 {
            return Err(Error::config("a dataset needs at least one label"));
        }
        for group in &groups {
            if group.items.is_empty() {
                return Err(Error::config(format!("query {} has no items", group.query_id)));
            }
            for item in &group.items {
                if item.features.len() != feature_dim {
                    return Err(Error::DimensionMismatch { expected: feature_dim, found: item.features.len() });
                }
                if item.labels.len() != k || item.raw_labels.len() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        found: item.labels.len().min(item.raw_labels.len()),
                    });
                }
                let finite = item.features.iter().chain(&item.labels).chain(&item.raw_labels).all(|v| v.is_finite());
                if !finite {
                    return Err(Error::NonFinite("dataset"));
                }
            }
        }
        Ok(Self { groups, feature_dim, label_names })
    }

    pub fn groups(&self) -> &[QueryGroup] {
        &self.groups
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn label_count(&self) -> usize {
        self.label_names.len()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn num_queries(&self) -> usize {
        self.groups.len()
    }

    pub fn num_items(&self) -> usize {
        self.groups.iter().map(QueryGroup::len).sum()
    }

    /// Start offsets of each query in the flattened item order, plus the
    /// total item count as a final sentinel.
    pub fn query_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.groups.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for g in &self.groups {
            acc += g.len();
            offsets.push(acc);
        }
        offsets
    }

    /// Row-major `M × p` feature matrix in flattened item order.
    pub fn feature_matrix(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_items() * self.feature_dim);
        for item in self.items() {
            out.extend_from_slice(&item.features);
        }
        out
    }

    pub fn items(&self) -> impl Iterator<Item = &Item> {
        self.groups.iter().flat_map(|g| g.items.iter())
    }

    /// Ordinal labels of objective `k`, flattened.
    pub fn label_column(&self, k: usize) -> Vec<f64> {
        self.items().map(|it| it.labels[k]).collect()
    }

    pub fn raw_label_column(&self, k: usize) -> Vec<f64> {
        self.items().map(|it| it.raw_labels[k]).collect()
    }

    /// A dataset restricted to the given labels, in the given order.
    pub fn select_labels(&self, selection: &[usize]) -> Result<Self> {
        let k = self.label_count();
        if selection.is_empty() {
            return Err(Error::config("label selection is empty"));
        }
        for (pos, &idx) in selection.iter().enumerate() {
            if idx >= k {
                return Err(Error::IndexOutOfRange { index: idx, limit: k });
            }
            if selection[..pos].contains(&idx) {
                return Err(Error::config(format!("label {idx} selected twice")));
            }
        }
        let groups = self
            .groups
            .iter()
            .map(|g| QueryGroup {
                query_id: g.query_id.clone(),
                items: g
                    .items
                    .iter()
                    .map(|it| Item {
                        features: it.features.clone(),
                        labels: selection.iter().map(|&s| it.labels[s]).collect(),
                        raw_labels: selection.iter().map(|&s| it.raw_labels[s]).collect(),
                    })
                    .collect(),
            })
            .collect();
        let names = selection.iter().map(|&s| self.label_names[s].clone()).collect();
        Self::new(groups, self.feature_dim, names)
    }

    /// Keep only the queries at the given positions (in that order).
    pub fn subset_queries(&self, positions: &[usize]) -> Result<Self> {
        let groups = positions
            .iter()
            .map(|&p| self.groups.get(p).cloned().ok_or(Error::IndexOutOfRange { index: p, limit: self.groups.len() }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(groups, self.feature_dim, self.label_names.clone())
    }
}
