use crate::{Error, Result};

#[inline]
pub fn gain(label: f64) -> f64 {
    label.exp2() - 1.0
}

/// Discount for a 1-based rank position.
#[inline]
pub fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// 1-based rank of every item when sorted by descending score. Equal scores
/// keep their original item order.
pub fn rank_positions(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0; scores.len()];
    for (pos, &item) in order.iter().enumerate() {
        ranks[item] = pos + 1;
    }
    ranks
}

/// DCG of the label-sorted list, truncated at `k` when given.
pub fn ideal_dcg(labels: &[f64], k: Option<usize>) -> f64 {
    let mut sorted: Vec<f64> = labels.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let cut = k.unwrap_or(sorted.len()).min(sorted.len());
    sorted[..cut].iter().enumerate().map(|(pos, &y)| gain(y) * discount(pos + 1)).sum()
}

/// |ΔNDCG| from swapping the rank positions of items `i` and `j`, with
/// positions taken from `ranks` (as produced by [`rank_positions`]).
/// Zero when the query's ideal DCG is zero.
pub fn delta_ndcg(labels: &[f64], ranks: &[usize], i: usize, j: usize) -> f64 {
    debug_assert_ne!(i, j);
    let idcg = ideal_dcg(labels, None);
    delta_ndcg_with_idcg(labels, ranks, i, j, idcg)
}

#[inline]
pub(crate) fn delta_ndcg_with_idcg(labels: &[f64], ranks: &[usize], i: usize, j: usize, idcg: f64) -> f64 {
    if idcg <= 0.0 {
        return 0.0;
    }
    ((gain(labels[i]) - gain(labels[j])) * (discount(ranks[i]) - discount(ranks[j]))).abs() / idcg
}

/// NDCG@k of a score vector. Ties in scores are broken by item order.
/// A query whose ideal DCG is zero (no positive gain) scores 1.0.
pub fn ndcg_at_k(scores: &[f64], labels: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::config("NDCG truncation must be at least 1"));
    }
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), found: scores.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    let idcg = ideal_dcg(labels, Some(k));
    if idcg <= 0.0 {
        return Ok(1.0);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let dcg: f64 = order.iter().take(k).enumerate().map(|(pos, &item)| gain(labels[item]) * discount(pos + 1)).sum();
    Ok(dcg / idcg)
}

/// Mean NDCG@k over query segments `offsets[q]..offsets[q + 1]`. With
/// `skip_zero_ideal`, queries without any positive gain are left out of the
/// average instead of counting as 1.0.
pub fn mean_ndcg(scores: &[f64], labels: &[f64], offsets: &[usize], k: usize, skip_zero_ideal: bool) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for w in offsets.windows(2) {
        let (s, l) = (&scores[w[0]..w[1]], &labels[w[0]..w[1]]);
        if skip_zero_ideal && ideal_dcg(l, Some(k)) <= 0.0 {
            continue;
        }
        total += ndcg_at_k(s, l, k)?;
        count += 1;
    }
    Ok(if count == 0 { 1.0 } else { total / count as f64 })
}
