//! Multi-label learning to rank.
//!
//! A gradient-boosted-tree scoring function is trained on several relevance
//! labels at once. Every boosting iteration evaluates one pairwise ranking
//! cost per label, combines the per-label score-gradients with coefficients
//! chosen by a multi-objective rule ([`combinators`]), and fits the next tree
//! to the combined gradient.
//!
//! Module map:
//!
//! * [`dataset`]: LETOR/SVMlight parsing, label promotion, quantization, binary cache.
//! * [`ranking`]: pairwise losses, score-gradients, NDCG and per-label cost state.
//! * [`tree`] and [`trainer`]: regression trees and the boosting loop.
//! * [`combinators`]: the coefficient rules, moving-average smoothing and the
//!   small simplex QP they share.
//! * [`pareto`]: dominance, MWL, VNO, hypervolume and paired t-tests.
//! * [`experiment`]: preference generation, grid runs, reference exploration, reports.
//! * [`synth`]: the in-tree synthetic two-label conflict workload.

pub mod combinators;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod pareto;
pub mod ranking;
pub mod synth;
pub mod trainer;
pub mod tree;

pub use error::{Error, Result};
