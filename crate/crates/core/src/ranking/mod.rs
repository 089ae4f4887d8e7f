//! Pairwise ranking costs, score-gradients and NDCG.

pub mod cost;
pub mod loss;
pub mod ndcg;

pub use cost::{CostEvaluator, CostState};
pub use loss::{per_query_gradient, per_query_loss, per_query_loss_and_gradient, LossConfig, PairSet};
pub use ndcg::{delta_ndcg, ideal_dcg, mean_ndcg, ndcg_at_k, rank_positions};
