//! The individual coefficient rules. Each returns a point on the simplex;
//! stateful bookkeeping lives in [`super::get_coefficients`].

use nalgebra::DMatrix;
use rand::Rng;

use super::qp::{simplex_qp, QpConstraint};
use super::CoefficientVector;
use crate::ranking::CostState;
use crate::{Error, Result};

fn check_len(found: usize, expected: usize) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn check_weights(r: &[f64]) -> Result<()> {
    if r.is_empty() {
        return Err(Error::EmptyInput);
    }
    if r.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidPreference("weights must be finite and strictly positive".into()));
    }
    Ok(())
}

/// Weighting rules also accept zero weights (a one-hot `r` selects a single
/// objective).
fn check_nonneg_weights(r: &[f64]) -> Result<()> {
    if r.is_empty() {
        return Err(Error::EmptyInput);
    }
    if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || r.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidPreference("weights must be nonnegative with a positive sum".into()));
    }
    Ok(())
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn is_degenerate(m: &DMatrix<f64>) -> bool {
    m.iter().any(|v| !v.is_finite()) || m.iter().all(|&v| v == 0.0)
}

/// `r / ‖r‖₁`.
pub fn ls_coefficients(r: &[f64]) -> Result<CoefficientVector> {
    check_nonneg_weights(r)?;
    CoefficientVector::new(r.to_vec())
}

/// One-hot at an index drawn with probability `r_k / ‖r‖₁`.
pub fn sla_coefficients<R: Rng + ?Sized>(r: &[f64], rng: &mut R) -> Result<CoefficientVector> {
    check_nonneg_weights(r)?;
    let total: f64 = r.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut pick = r.iter().rposition(|&w| w > 0.0).unwrap_or(0);
    for (i, w) in r.iter().enumerate() {
        cum += w;
        if u < cum {
            pick = i;
            break;
        }
    }
    Ok(CoefficientVector::one_hot(r.len(), pick))
}

/// One-hot at `argmax r_k c_k`; ties go to the lowest index.
pub fn wc_coefficients(c: &[f64], r: &[f64]) -> Result<CoefficientVector> {
    check_weights(r)?;
    check_len(c.len(), r.len())?;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("costs"));
    }
    let weighted: Vec<f64> = c.iter().zip(r).map(|(c, r)| c * r).collect();
    Ok(CoefficientVector::one_hot(r.len(), argmax_lowest(&weighted)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorMode {
    /// Steer the cost vector back toward the preference ray.
    PullToRay,
    /// Descend along the preference ray.
    AlongRay,
}

/// Target direction for the first-order cost change in EPO.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorDirection {
    pub a: Vec<f64>,
    pub mode: AnchorMode,
}

/// Along the ray `1/r` when `c` is within `far_threshold` cosine distance of
/// it, otherwise the component of `c` orthogonal to the ray.
pub fn epo_anchor(c: &[f64], r: &[f64], far_threshold: f64) -> Result<AnchorDirection> {
    check_weights(r)?;
    check_len(c.len(), r.len())?;
    let ray: Vec<f64> = r.iter().map(|v| 1.0 / v).collect();
    let along = AnchorDirection { a: ray.clone(), mode: AnchorMode::AlongRay };
    let c_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r.len() == 1 || c_norm == 0.0 {
        return Ok(along);
    }
    let ray_sq: f64 = ray.iter().map(|v| v * v).sum();
    let dot: f64 = c.iter().zip(&ray).map(|(a, b)| a * b).sum();
    let cosine = dot / (c_norm * ray_sq.sqrt());
    if 1.0 - cosine <= far_threshold {
        return Ok(along);
    }
    let scale = dot / ray_sq;
    let a = c.iter().zip(&ray).map(|(c, d)| c - scale * d).collect();
    Ok(AnchorDirection { a, mode: AnchorMode::PullToRay })
}

/// `‖Gα − a‖²` with `G` the gradient Gram matrix.
pub fn epo_objective(gram: &DMatrix<f64>, a: &[f64], alpha: &[f64]) -> f64 {
    (0..a.len())
        .map(|i| {
            let gi: f64 = (0..alpha.len()).map(|j| gram[(i, j)] * alpha[j]).sum();
            (gi - a[i]).powi(2)
        })
        .sum()
}

/// Simplex weights whose induced first-order cost change `Gα` is closest to
/// the anchor.
pub fn epo_coefficients(cost_state: &CostState, anchor: &AnchorDirection) -> Result<CoefficientVector> {
    let k = cost_state.num_objectives();
    check_len(anchor.a.len(), k)?;
    if k == 1 {
        return Ok(CoefficientVector::one_hot(1, 0));
    }
    let g = &cost_state.gram;
    if is_degenerate(g) {
        return Err(Error::Solver("gradient Gram matrix is degenerate".into()));
    }
    let gg = g * g;
    let h = &gg + gg.transpose();
    let ga = g * nalgebra::DVector::from_column_slice(&anchor.a);
    let linear: Vec<f64> = ga.iter().map(|v| -2.0 * v).collect();
    CoefficientVector::new(simplex_qp(&h, &linear, QpConstraint::Simplex)?)
}

/// `M = diag(√r) · G · diag(√r)` with `G` the Gram square root.
fn weighted_root(gram_sqrt: &DMatrix<f64>, r: &[f64]) -> DMatrix<f64> {
    let k = r.len();
    DMatrix::from_fn(k, k, |i, j| r[i].sqrt() * gram_sqrt[(i, j)] * r[j].sqrt())
}

/// `αᵀ(r ⊙ (c − b)) − u‖Mα‖₂`.
pub fn wcmgda_objective(cost_state: &CostState, r: &[f64], b: &[f64], u: f64, alpha: &[f64]) -> f64 {
    let m = weighted_root(&cost_state.gram_sqrt, r);
    let linear: f64 = (0..r.len()).map(|k| alpha[k] * r[k] * (cost_state.costs[k] - b[k])).sum();
    let ma = &m * nalgebra::DVector::from_column_slice(alpha);
    linear - u * ma.norm()
}

/// Maximize [`wcmgda_objective`] over the simplex.
///
/// Uses `‖v‖ = min_τ (‖v‖²/2τ + τ/2)`: for fixed `τ` the problem is a
/// simplex QP, and its optimal value is concave in `τ`, so a golden-section
/// search over `τ` followed by fixed-point refinement `τ ← ‖Mα‖` reaches the
/// optimum. The best iterate (including vertices) by the true objective is
/// returned.
pub fn wcmgda_coefficients(
    cost_state: &CostState,
    r: &[f64],
    b: &[f64],
    u: f64,
    iterations: usize,
) -> Result<CoefficientVector> {
    check_weights(r)?;
    let k = r.len();
    check_len(cost_state.num_objectives(), k)?;
    check_len(b.len(), k)?;
    if !(u.is_finite() && u >= 0.0) {
        return Err(Error::InvalidPreference("slack must be finite and nonnegative".into()));
    }
    if k == 1 {
        return Ok(CoefficientVector::one_hot(1, 0));
    }
    let w: Vec<f64> = (0..k).map(|i| r[i] * (cost_state.costs[i] - b[i])).collect();
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("costs"));
    }
    let m = weighted_root(&cost_state.gram_sqrt, r);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient Gram matrix"));
    }
    let q = m.transpose() * &m;
    let q = (&q + q.transpose()) * 0.5;
    if u == 0.0 || q.iter().all(|&v| v == 0.0) {
        return Ok(CoefficientVector::one_hot(k, argmax_lowest(&w)));
    }

    let objective = |alpha: &[f64]| {
        let quad: f64 =
            (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| alpha[i] * q[(i, j)] * alpha[j]).sum();
        w.iter().zip(alpha).map(|(w, a)| w * a).sum::<f64>() - u * quad.max(0.0).sqrt()
    };
    let neg_w: Vec<f64> = w.iter().map(|v| -v).collect();
    let inner = |tau: f64| -> Result<(f64, Vec<f64>)> {
        let h = &q * (u / tau);
        let alpha = simplex_qp(&h, &neg_w, QpConstraint::Simplex)?;
        let quad: f64 =
            (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| alpha[i] * q[(i, j)] * alpha[j]).sum();
        let psi = w.iter().zip(&alpha).map(|(w, a)| w * a).sum::<f64>() - u * quad / (2.0 * tau) - u * tau / 2.0;
        Ok((psi, alpha))
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let consider = |best: &mut Option<(f64, Vec<f64>)>, alpha: Vec<f64>| {
        let v = objective(&alpha);
        if v.is_finite() && best.as_ref().is_none_or(|(b, _)| v > *b) {
            *best = Some((v, alpha));
        }
    };
    for i in 0..k {
        consider(&mut best, CoefficientVector::one_hot(k, i).as_slice().to_vec());
    }

    let tau_hi = (0..k).map(|i| q[(i, i)].max(0.0).sqrt()).fold(0.0, f64::max);
    let tau_lo = tau_hi * 1e-9;
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (tau_lo, tau_hi);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, a1) = inner(x1)?;
    let (mut f2, a2) = inner(x2)?;
    consider(&mut best, a1);
    consider(&mut best, a2);
    for _ in 0..iterations {
        if !(f1.is_finite() && f2.is_finite()) {
            return Err(Error::Solver("wc-mgda line search produced non-finite values".into()));
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            let (f, a) = inner(x1)?;
            f1 = f;
            consider(&mut best, a);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            let (f, a) = inner(x2)?;
            f2 = f;
            consider(&mut best, a);
        }
        if hi - lo <= tau_hi * 1e-15 {
            break;
        }
    }

    for _ in 0..50 {
        let Some((before, alpha)) = best.clone() else { break };
        let tau = (&m * nalgebra::DVector::from_column_slice(&alpha)).norm();
        if tau.is_nan() || tau <= tau_lo {
            break;
        }
        let (_, a) = inner(tau)?;
        consider(&mut best, a);
        if best.as_ref().is_none_or(|(v, _)| *v <= before) {
            break;
        }
    }

    match best {
        Some((_, alpha)) => CoefficientVector::new(alpha),
        None => Err(Error::Solver("wc-mgda found no finite candidate".into())),
    }
}

fn secondary_indices(k: usize, primary: usize) -> Vec<usize> {
    (0..k).filter(|&i| i != primary).collect()
}

/// `[1 at primary, multipliers at the others] / (1 + Σ multipliers)`.
fn ec_alpha(k: usize, primary: usize, multipliers: &[f64]) -> Result<CoefficientVector> {
    let mut alpha = vec![0.0; k];
    alpha[primary] = 1.0;
    for (j, &i) in secondary_indices(k, primary).iter().enumerate() {
        alpha[i] = multipliers[j];
    }
    CoefficientVector::new(alpha)
}

fn check_ec(k: usize, primary: usize, bounds: &[f64]) -> Result<()> {
    if primary >= k {
        return Err(Error::IndexOutOfRange { index: primary, limit: k });
    }
    check_len(bounds.len() + 1, k)
}

/// Proximal multiplier update: a violated constraint's multiplier grows by
/// `μ·(c_k − ε_k)`, a satisfied one resets to zero. `multipliers` holds the
/// previous values and is updated in place.
pub fn ecal_coefficients(
    c: &[f64],
    primary: usize,
    bounds: &[f64],
    mu: f64,
    multipliers: &mut [f64],
) -> Result<CoefficientVector> {
    let k = c.len();
    check_ec(k, primary, bounds)?;
    check_len(multipliers.len() + 1, k)?;
    for (j, &i) in secondary_indices(k, primary).iter().enumerate() {
        let excess = c[i] - bounds[j];
        multipliers[j] = if excess >= 0.0 { mu * excess + multipliers[j] } else { 0.0 };
    }
    ec_alpha(k, primary, multipliers)
}

/// Control terms `φ_k = β·max(0, c_k − ε_k)` of the non-primary objectives.
pub fn ecdbgd_controls(c: &[f64], primary: usize, bounds: &[f64], beta: f64) -> Vec<f64> {
    secondary_indices(c.len(), primary).iter().zip(bounds).map(|(&i, e)| beta * (c[i] - e).max(0.0)).collect()
}

/// `½αᵀGα − Σ φ_k α_k` with the primary weight fixed at one; `secondary`
/// and `phi` are indexed over the non-primary objectives.
pub fn ecdbgd_objective(gram: &DMatrix<f64>, primary: usize, phi: &[f64], secondary: &[f64]) -> f64 {
    let k = gram.nrows();
    let mut alpha = vec![0.0; k];
    alpha[primary] = 1.0;
    for (j, &i) in secondary_indices(k, primary).iter().enumerate() {
        alpha[i] = secondary[j];
    }
    let mut quad = 0.0;
    for i in 0..k {
        for j in 0..k {
            quad += alpha[i] * gram[(i, j)] * alpha[j];
        }
    }
    0.5 * quad - phi.iter().zip(secondary).map(|(p, a)| p * a).sum::<f64>()
}

/// Nonnegative non-primary weights minimizing [`ecdbgd_objective`].
pub fn ecdbgd_multipliers(cost_state: &CostState, primary: usize, bounds: &[f64], beta: f64) -> Result<Vec<f64>> {
    let k = cost_state.num_objectives();
    check_ec(k, primary, bounds)?;
    if k == 1 {
        return Ok(Vec::new());
    }
    let g = &cost_state.gram;
    if is_degenerate(g) {
        return Err(Error::Solver("gradient Gram matrix is degenerate".into()));
    }
    let sec = secondary_indices(k, primary);
    let phi = ecdbgd_controls(&cost_state.costs, primary, bounds, beta);
    let h = DMatrix::from_fn(sec.len(), sec.len(), |a, b| 0.5 * (g[(sec[a], sec[b])] + g[(sec[b], sec[a])]));
    let linear: Vec<f64> = sec.iter().zip(&phi).map(|(&i, p)| g[(i, primary)] - p).collect();
    simplex_qp(&h, &linear, QpConstraint::Nonnegative)
}

/// EC-DBGD weights, rescaled onto the simplex.
pub fn ecdbgd_coefficients(
    cost_state: &CostState,
    primary: usize,
    bounds: &[f64],
    beta: f64,
) -> Result<CoefficientVector> {
    let beta_sec = ecdbgd_multipliers(cost_state, primary, bounds, beta)?;
    ec_alpha(cost_state.num_objectives(), primary, &beta_sec)
}

/// Exponential moving average `ν·raw + (1 − ν)·prev`; the first call
/// returns `raw` unchanged.
pub fn smooth_alpha(raw: &CoefficientVector, prev: Option<&CoefficientVector>, nu: f64) -> Result<CoefficientVector> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::config("nu must lie strictly between 0 and 1"));
    }
    let Some(prev) = prev else { return Ok(raw.clone()) };
    check_len(prev.len(), raw.len())?;
    let mixed = raw.as_slice().iter().zip(prev.as_slice()).map(|(r, p)| nu * r + (1.0 - nu) * p).collect();
    CoefficientVector::new(mixed)
}
