//! Experiment configuration (TOML).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::combinators::{CombinatorKind, CombinatorParams};
use crate::dataset::LabelPromotionSpec;
use crate::pareto::VnoOrder;
use crate::ranking::LossConfig;
use crate::synth::SynthConfig;
use crate::trainer::GBMConfig;
use crate::{Error, Result};

/// A combination rule with or without moving-average smoothing; written
/// `kind` or `kind+ma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MethodSpec {
    pub kind: CombinatorKind,
    pub smoothing: bool,
}

impl MethodSpec {
    pub fn new(kind: CombinatorKind, smoothing: bool) -> Self {
        Self { kind, smoothing }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.smoothing {
            write!(f, "{}+ma", self.kind)
        } else {
            write!(f, "{}", self.kind)
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.strip_suffix("+ma") {
            Some(kind) => Ok(Self::new(kind.parse()?, true)),
            None => Ok(Self::new(s.parse()?, false)),
        }
    }
}

impl TryFrom<String> for MethodSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MethodSpec> for String {
    fn from(m: MethodSpec) -> Self {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// LETOR/SVMlight file or binary cache (`.bin`).
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Feature columns to turn into extra labels.
    pub promote: Option<LabelPromotionSpec>,
    /// Fraction of training queries to keep (first queries in file order).
    pub query_fraction: f64,
    /// Used when `train` is unset.
    pub synthetic: SynthConfig,
    pub synthetic_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            train: None,
            valid: None,
            test: None,
            promote: None,
            query_fraction: 1.0,
            synthetic: SynthConfig::default(),
            synthetic_seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonConfig {
    /// Objective minimized by the bound-based rules (index within a label set).
    pub primary: usize,
    /// Multiplier growth rate of EC-AL.
    pub mu: f64,
}

impl Default for EpsilonConfig {
    fn default() -> Self {
        Self { primary: 0, mu: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceConfig {
    /// Trees of the under-trained reference model built when none is given.
    pub trees: usize,
    /// Priority weights of that reference model (uniform when unset).
    pub weights: Option<Vec<f64>>,
    pub methods: Vec<MethodSpec>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            trees: 50,
            weights: None,
            methods: vec![MethodSpec::new(CombinatorKind::Wc, true), MethodSpec::new(CombinatorKind::WcMgda, true)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// NDCG truncation for reported test metrics.
    pub ndcg_k: usize,
    /// Relative MWL difference below which the box-volume tie-breaker applies.
    pub mwl_tie_tolerance: f64,
    pub vno_order: VnoOrder,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self { ndcg_k: 5, mwl_tie_tolerance: 1e-3, vno_order: VnoOrder::LowerWins }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    /// Label subsets (indices into the dataset's labels) to study.
    pub label_sets: Vec<Vec<usize>>,
    pub methods: Vec<MethodSpec>,
    pub n_preferences: usize,
    pub seeds: Vec<u64>,
    pub gbm: GBMConfig,
    pub loss: LossConfig,
    pub combinator: CombinatorParams,
    pub epsilon: EpsilonConfig,
    pub reference: ReferenceConfig,
    pub metrics: MetricConfig,
    /// Concurrent training runs; 0 uses every core.
    pub workers: usize,
    pub output_dir: PathBuf,
    pub write_traces: bool,
    pub write_models: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        use CombinatorKind::*;
        let methods = [Sla, Ls, Wc, Epo, WcMgda, EcAl, EcDbgd]
            .into_iter()
            .flat_map(|k| match k {
                Ls => vec![MethodSpec::new(k, false)],
                Sla => vec![MethodSpec::new(k, false)],
                _ => vec![MethodSpec::new(k, false), MethodSpec::new(k, true)],
            })
            .collect();
        Self {
            data: DataConfig::default(),
            label_sets: vec![vec![0, 1]],
            methods,
            n_preferences: 5,
            seeds: vec![0, 1, 2],
            gbm: GBMConfig { n_trees: 300, learning_rate: 0.25, subsample: 0.8, ..GBMConfig::default() },
            loss: LossConfig::ranknet(),
            combinator: CombinatorParams::default(),
            epsilon: EpsilonConfig::default(),
            reference: ReferenceConfig::default(),
            metrics: MetricConfig::default(),
            workers: 0,
            output_dir: PathBuf::from("results"),
            write_traces: true,
            write_models: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Data paths are relative to the config file.
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.data.train, &mut cfg.data.valid, &mut cfg.data.test].into_iter().flatten() {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Checks that do not need the data; label indices are checked once
    /// the dataset is loaded.
    pub fn validate(&self) -> Result<()> {
        if self.n_preferences == 0 {
            return Err(Error::config("n_preferences must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods must not be empty"));
        }
        if self.label_sets.is_empty() || self.label_sets.iter().any(|s| s.is_empty()) {
            return Err(Error::config("label_sets must list at least one non-empty set"));
        }
        for set in &self.label_sets {
            let mut sorted = set.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != set.len() {
                return Err(Error::config(format!("label set {set:?} repeats a label")));
            }
            if set.len() > 3 && self.methods.iter().any(|m| !m.kind.uses_bounds()) {
                return Err(Error::config("preference rays are generated for two or three labels only"));
            }
            if self.epsilon.primary >= set.len() {
                return Err(Error::config(format!("epsilon.primary is out of range for label set {set:?}")));
            }
        }
        if !(self.data.query_fraction > 0.0 && self.data.query_fraction <= 1.0) {
            return Err(Error::config("data.query_fraction must lie in (0, 1]"));
        }
        if !(self.epsilon.mu.is_finite() && self.epsilon.mu > 0.0) {
            return Err(Error::config("epsilon.mu must be positive"));
        }
        if self.metrics.ndcg_k == 0 {
            return Err(Error::config("metrics.ndcg_k must be positive"));
        }
        if self.reference.trees == 0 {
            return Err(Error::config("reference.trees must be positive"));
        }
        self.gbm.validate()?;
        self.loss.validate()?;
        self.combinator.validate()?;
        if self.data.train.is_none() {
            self.data.synthetic.validate()?;
        }
        Ok(())
    }
}
