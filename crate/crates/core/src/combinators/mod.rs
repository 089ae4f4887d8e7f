//! Gradient combination rules: given the per-objective costs and gradient
//! Gram matrix of the current model, choose simplex weights `α` so that the
//! next tree is fit to `λ = Cα`.

pub mod qp;
mod rules;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ranking::CostState;
use crate::{Error, Result};

pub use qp::{qp_objective, simplex_qp, QpConstraint, MAX_DIM};
pub use rules::{
    ecal_coefficients, ecdbgd_coefficients, ecdbgd_controls, ecdbgd_multipliers, ecdbgd_objective, epo_anchor,
    epo_coefficients, epo_objective, ls_coefficients, sla_coefficients, smooth_alpha, wc_coefficients,
    wcmgda_coefficients, wcmgda_objective, AnchorDirection, AnchorMode,
};

/// Entries below this are treated as round-off and clamped to zero.
pub const NEGATIVE_TOL: f64 = 1e-12;

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CoefficientVector(Vec<f64>);

impl CoefficientVector {
    /// Clamp round-off negatives and rescale onto the simplex.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient vector"));
        }
        if let Some(v) = values.iter().find(|&&v| v < -NEGATIVE_TOL) {
            return Err(Error::Solver(format!("negative coefficient {v}")));
        }
        let mut values: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(Error::Solver("coefficients sum to zero".into()));
        }
        if total != 1.0 {
            values.iter_mut().for_each(|v| *v /= total);
        }
        Ok(Self(values))
    }

    pub fn one_hot(k: usize, index: usize) -> Self {
        let mut v = vec![0.0; k];
        v[index] = 1.0;
        Self(v)
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for CoefficientVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CoefficientVector> for Vec<f64> {
    fn from(v: CoefficientVector) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombinatorKind {
    Ls,
    Sla,
    Wc,
    Epo,
    WcMgda,
    EcAl,
    EcDbgd,
}

impl CombinatorKind {
    pub const ALL: [CombinatorKind; 7] = [
        CombinatorKind::Ls,
        CombinatorKind::Sla,
        CombinatorKind::Wc,
        CombinatorKind::Epo,
        CombinatorKind::WcMgda,
        CombinatorKind::EcAl,
        CombinatorKind::EcDbgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CombinatorKind::Ls => "ls",
            CombinatorKind::Sla => "sla",
            CombinatorKind::Wc => "wc",
            CombinatorKind::Epo => "epo",
            CombinatorKind::WcMgda => "wc-mgda",
            CombinatorKind::EcAl => "ec-al",
            CombinatorKind::EcDbgd => "ec-dbgd",
        }
    }

    /// Whether the rule takes bounds rather than priority weights.
    pub fn uses_bounds(self) -> bool {
        matches!(self, CombinatorKind::EcAl | CombinatorKind::EcDbgd)
    }
}

impl fmt::Display for CombinatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CombinatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        CombinatorKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum TradeOff {
    Priority { weights: Vec<f64> },
    EpsilonConstraint { primary: usize, bounds: Vec<f64>, mu: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preference {
    #[serde(flatten)]
    pub trade_off: TradeOff,
    /// Cost vector of a reference model to improve upon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
    /// Norm penalty weight for WC-MGDA; derived from the initial costs when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
}

impl Preference {
    pub fn priority(weights: impl Into<Vec<f64>>) -> Self {
        Self { trade_off: TradeOff::Priority { weights: weights.into() }, reference: None, slack: None }
    }

    /// `bounds` lists the upper bounds of the non-primary objectives in
    /// index order.
    pub fn epsilon_constraint(primary: usize, bounds: impl Into<Vec<f64>>, mu: f64) -> Self {
        Self {
            trade_off: TradeOff::EpsilonConstraint { primary, bounds: bounds.into(), mu },
            reference: None,
            slack: None,
        }
    }

    pub fn with_reference(mut self, reference: Vec<f64>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_slack(mut self, slack: f64) -> Self {
        self.slack = Some(slack);
        self
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match &self.trade_off {
            TradeOff::Priority { weights } => Some(weights),
            TradeOff::EpsilonConstraint { .. } => None,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPreference(m));
        match &self.trade_off {
            TradeOff::Priority { weights } => {
                if weights.len() != k {
                    return bad(format!("{} weights for {k} objectives", weights.len()));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                    return bad("weights must be nonnegative with a positive sum".into());
                }
            }
            TradeOff::EpsilonConstraint { primary, bounds, mu } => {
                if *primary >= k {
                    return bad(format!("primary objective {primary} out of range for {k} objectives"));
                }
                if bounds.len() + 1 != k {
                    return bad(format!("{} bounds for {k} objectives", bounds.len()));
                }
                if bounds.iter().any(|b| !b.is_finite()) {
                    return bad("bounds must be finite".into());
                }
                if !(mu.is_finite() && *mu > 0.0) {
                    return bad("multiplier growth rate must be positive".into());
                }
            }
        }
        if let Some(b) = &self.reference {
            if b.len() != k || b.iter().any(|v| !v.is_finite()) {
                return bad("reference costs must be finite with one entry per objective".into());
            }
        }
        if let Some(u) = self.slack {
            if !(u.is_finite() && u >= 0.0) {
                return bad("slack must be finite and nonnegative".into());
            }
        }
        Ok(())
    }

    /// Check that the trade-off form matches what `kind` consumes.
    pub fn validate_for(&self, kind: CombinatorKind, k: usize) -> Result<()> {
        self.validate(k)?;
        let is_bounds = matches!(self.trade_off, TradeOff::EpsilonConstraint { .. });
        if is_bounds != kind.uses_bounds() {
            return Err(Error::InvalidPreference(format!(
                "{kind} needs a {} preference",
                if kind.uses_bounds() { "bound" } else { "priority" }
            )));
        }
        let needs_positive = matches!(kind, CombinatorKind::Wc | CombinatorKind::Epo | CombinatorKind::WcMgda);
        if needs_positive && self.weights().is_some_and(|w| w.iter().any(|&v| v <= 0.0)) {
            return Err(Error::InvalidPreference(format!("{kind} needs strictly positive weights")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CombinatorParams {
    /// Moving-average weight on the newest raw coefficients.
    pub nu: f64,
    /// Cosine distance beyond which EPO pulls toward the preference ray.
    pub far_threshold: f64,
    /// Gain of the constraint-violation control term in EC-DBGD.
    pub dbgd_beta: f64,
    /// Default WC-MGDA slack as a fraction of the initial weighted cost norm.
    pub slack_fraction: f64,
    /// Outer iterations of the WC-MGDA line search.
    pub wcmgda_iterations: usize,
}

impl Default for CombinatorParams {
    fn default() -> Self {
        Self { nu: 0.1, far_threshold: 0.01, dbgd_beta: 1.0, slack_fraction: 0.1, wcmgda_iterations: 100 }
    }
}

impl CombinatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::config("nu must lie strictly between 0 and 1"));
        }
        if !(self.far_threshold.is_finite() && self.far_threshold >= 0.0) {
            return Err(Error::config("far_threshold must be nonnegative"));
        }
        if !(self.dbgd_beta.is_finite() && self.dbgd_beta >= 0.0) {
            return Err(Error::config("dbgd_beta must be nonnegative"));
        }
        if !(self.slack_fraction.is_finite() && self.slack_fraction >= 0.0) {
            return Err(Error::config("slack_fraction must be nonnegative"));
        }
        if self.wcmgda_iterations == 0 {
            return Err(Error::config("wcmgda_iterations must be positive"));
        }
        Ok(())
    }
}

/// Per-run mutable state of a combination rule. One state per training run;
/// calls must be sequential.
#[derive(Debug, Clone)]
pub struct CombinatorState {
    pub smoothing: bool,
    pub params: CombinatorParams,
    pub prev_alpha: Option<CoefficientVector>,
    pub smoothed_alpha: Option<CoefficientVector>,
    /// Lagrange multipliers of the non-primary objectives (EC rules).
    pub ec_multipliers: Vec<f64>,
    pub initial_costs: Option<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl CombinatorState {
    pub fn new(k: usize, smoothing: bool, params: CombinatorParams, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            smoothing,
            params,
            prev_alpha: None,
            smoothed_alpha: None,
            ec_multipliers: vec![0.0; k.saturating_sub(1)],
            initial_costs: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn nu(&self) -> f64 {
        self.params.nu
    }

    /// Coefficients handed to the trainer on the previous call.
    pub fn last_output(&self) -> Option<&CoefficientVector> {
        if self.smoothing {
            self.smoothed_alpha.as_ref()
        } else {
            self.prev_alpha.as_ref()
        }
    }
}

/// Result of one coefficient query.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    /// Output of the rule before smoothing.
    pub raw: CoefficientVector,
    /// Coefficients to combine gradients with.
    pub alpha: CoefficientVector,
    /// Set when the rule fell back to a simpler one.
    pub note: Option<String>,
}

/// Run one combination rule, then the moving average when enabled.
pub fn get_coefficients(
    kind: CombinatorKind,
    cost_state: &CostState,
    preference: &Preference,
    state: &mut CombinatorState,
) -> Result<Coefficients> {
    let k = cost_state.num_objectives();
    preference.validate_for(kind, k)?;
    if state.ec_multipliers.len() + 1 != k {
        return Err(Error::DimensionMismatch { expected: k - 1, found: state.ec_multipliers.len() });
    }
    let c = &cost_state.costs;
    if state.initial_costs.is_none() {
        state.initial_costs = Some(c.clone());
    }
    let zeros = vec![0.0; k];
    let reference = preference.reference.as_deref().unwrap_or(&zeros);
    let mut note = None;

    let raw = match (&preference.trade_off, kind) {
        (TradeOff::Priority { weights }, CombinatorKind::Ls) => ls_coefficients(weights)?,
        (TradeOff::Priority { weights }, CombinatorKind::Sla) => sla_coefficients(weights, &mut state.rng)?,
        (TradeOff::Priority { weights }, CombinatorKind::Wc) => wc_coefficients(&shifted(c, reference), weights)?,
        (TradeOff::Priority { weights }, CombinatorKind::Epo) => {
            let anchor = epo_anchor(c, weights, state.params.far_threshold)?;
            match epo_coefficients(cost_state, &anchor) {
                Ok(a) => a,
                Err(e) => {
                    note = Some(format!("epo: {e}; kept previous coefficients"));
                    match state.last_output() {
                        Some(prev) => prev.clone(),
                        None => ls_coefficients(weights)?,
                    }
                }
            }
        }
        (TradeOff::Priority { weights }, CombinatorKind::WcMgda) => {
            let slack = match preference.slack {
                Some(u) => u,
                None => {
                    let c0 = state.initial_costs.as_deref().unwrap_or(c);
                    let norm = weights.iter().zip(c0).map(|(r, c)| (r * c).powi(2)).sum::<f64>().sqrt();
                    state.params.slack_fraction * norm
                }
            };
            match wcmgda_coefficients(cost_state, weights, reference, slack, state.params.wcmgda_iterations) {
                // Subgradient of max_k r_k (c_k − b_k): Σ α_k r_k ∇c_k.
                Ok(a) => CoefficientVector::new(a.as_slice().iter().zip(weights).map(|(a, r)| a * r).collect())?,
                Err(e) => {
                    note = Some(format!("wc-mgda: {e}; fell back to wc"));
                    wc_coefficients(&shifted(c, reference), weights)?
                }
            }
        }
        (TradeOff::EpsilonConstraint { primary, bounds, mu }, CombinatorKind::EcAl) => {
            ecal_coefficients(c, *primary, bounds, *mu, &mut state.ec_multipliers)?
        }
        (TradeOff::EpsilonConstraint { primary, bounds, mu }, CombinatorKind::EcDbgd) => {
            match ecdbgd_coefficients(cost_state, *primary, bounds, state.params.dbgd_beta) {
                Ok(a) => a,
                Err(e) => {
                    note = Some(format!("ec-dbgd: {e}; fell back to ec-al"));
                    ecal_coefficients(c, *primary, bounds, *mu, &mut state.ec_multipliers)?
                }
            }
        }
        _ => unreachable!("preference form checked by validate_for"),
    };

    let alpha = if state.smoothing {
        let s = smooth_alpha(&raw, state.smoothed_alpha.as_ref(), state.params.nu)?;
        state.smoothed_alpha = Some(s.clone());
        s
    } else {
        raw.clone()
    };
    state.prev_alpha = Some(raw.clone());
    Ok(Coefficients { raw, alpha, note })
}

/// `max(c − b, 0)`.
fn shifted(c: &[f64], b: &[f64]) -> Vec<f64> {
    c.iter().zip(b).map(|(c, b)| (c - b).max(0.0)).collect()
}
