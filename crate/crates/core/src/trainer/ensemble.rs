//! Boosted tree ensembles and their JSON model format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::MultiLabelDataset;
use crate::tree::{Node, RegressionTree};
use crate::{Error, Result};

pub const MODEL_FORMAT: &str = "mlltr-ensemble";
pub const MODEL_VERSION: u32 = 1;

/// `f(x) = init_score − Σ_t η_t · tree_t(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub init_score: f64,
    pub trees: Vec<RegressionTree>,
    pub learning_rates: Vec<f64>,
    pub feature_dim: usize,
}

impl TreeEnsemble {
    pub fn new(feature_dim: usize, init_score: f64) -> Self {
        Self { init_score, trees: Vec::new(), learning_rates: Vec::new(), feature_dim }
    }

    pub fn push(&mut self, tree: RegressionTree, learning_rate: f64) {
        self.trees.push(tree);
        self.learning_rates.push(learning_rate);
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Keep only the first `n` trees.
    pub fn truncate(&mut self, n: usize) {
        self.trees.truncate(n);
        self.learning_rates.truncate(n);
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch { expected: self.feature_dim, found: x.len() });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut s = self.init_score;
        for (tree, eta) in self.trees.iter().zip(&self.learning_rates) {
            s -= eta * tree.predict(x);
        }
        s
    }

    /// Scores for every item, in dataset order.
    pub fn predict_dataset(&self, data: &MultiLabelDataset) -> Result<Vec<f64>> {
        if data.feature_dim() != self.feature_dim {
            return Err(Error::DimensionMismatch { expected: self.feature_dim, found: data.feature_dim() });
        }
        let rows: Vec<&[f64]> = data.items().map(|it| it.features.as_slice()).collect();
        Ok(rows.par_iter().map(|x| self.predict_unchecked(x)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let repr = ModelRepr {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            feature_dim: self.feature_dim,
            init_score: self.init_score,
            learning_rates: self.learning_rates.clone(),
            trees: self.trees.iter().map(|t| nest(t.nodes(), 0)).collect(),
        };
        Ok(serde_json::to_string_pretty(&repr)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: ModelRepr = serde_json::from_str(text)?;
        if repr.format != MODEL_FORMAT {
            return Err(Error::Format(format!("expected format '{MODEL_FORMAT}', found '{}'", repr.format)));
        }
        if repr.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {}", repr.version)));
        }
        if repr.learning_rates.len() != repr.trees.len() {
            return Err(Error::DimensionMismatch { expected: repr.trees.len(), found: repr.learning_rates.len() });
        }
        if !repr.init_score.is_finite() || repr.learning_rates.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        let trees = repr
            .trees
            .iter()
            .map(|root| {
                let mut nodes = Vec::new();
                flatten(root, &mut nodes);
                let tree = RegressionTree::from_nodes(nodes)?;
                if tree.max_feature().is_some_and(|f| f >= repr.feature_dim) {
                    return Err(Error::Format("split on a feature beyond feature_dim".into()));
                }
                Ok(tree)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            init_score: repr.init_score,
            trees,
            learning_rates: repr.learning_rates,
            feature_dim: repr.feature_dim,
        })
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_json()?.as_bytes())?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::file(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read(BufReader::new(file))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    format: String,
    version: u32,
    feature_dim: usize,
    init_score: f64,
    learning_rates: Vec<f64>,
    trees: Vec<NodeRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NodeRepr {
    Leaf { leaf: f64 },
    Split { feature: usize, threshold: f64, left: Box<NodeRepr>, right: Box<NodeRepr> },
}

fn nest(nodes: &[Node], i: usize) -> NodeRepr {
    match nodes[i] {
        Node::Leaf { value } => NodeRepr::Leaf { leaf: value },
        Node::Split { feature, threshold, left, right } => NodeRepr::Split {
            feature,
            threshold,
            left: Box::new(nest(nodes, left)),
            right: Box::new(nest(nodes, right)),
        },
    }
}

/// Pre-order layout: a split's children follow it, left subtree first.
fn flatten(repr: &NodeRepr, out: &mut Vec<Node>) -> usize {
    let id = out.len();
    match repr {
        NodeRepr::Leaf { leaf } => out.push(Node::Leaf { value: *leaf }),
        NodeRepr::Split { feature, threshold, left, right } => {
            out.push(Node::Leaf { value: 0.0 });
            let l = flatten(left, out);
            let r = flatten(right, out);
            out[id] = Node::Split { feature: *feature, threshold: *threshold, left: l, right: r };
        }
    }
    id
}
