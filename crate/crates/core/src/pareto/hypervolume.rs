//! Hypervolume of the region dominated by a point set and bounded by a
//! reference point. Exact for two and three objectives, Monte Carlo beyond.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Orientation;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HVIConfig {
    /// In the same units as the points; scaled together with them.
    pub reference_point: Vec<f64>,
    /// Per-objective divisors applied to points and reference.
    #[serde(default)]
    pub scaling: Option<Vec<f64>>,
    #[serde(default)]
    pub orientation: Orientation,
    #[serde(default = "default_samples")]
    pub monte_carlo_samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    1_000_000
}

impl HVIConfig {
    pub fn new(reference_point: Vec<f64>) -> Self {
        Self {
            reference_point,
            scaling: None,
            orientation: Orientation::Cost,
            monte_carlo_samples: default_samples(),
            seed: 0,
        }
    }

    pub fn with_scaling(mut self, scaling: Vec<f64>) -> Self {
        self.scaling = Some(scaling);
        self
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }
}

/// Componentwise worst value over `points`, moved 1% further away from the
/// points.
pub fn default_reference(points: &[Vec<f64>], orientation: Orientation) -> Result<Vec<f64>> {
    let k = points.first().ok_or(Error::EmptyInput)?.len();
    Ok((0..k)
        .map(|i| {
            let col = points.iter().map(|p| p[i]);
            match orientation {
                Orientation::Cost => {
                    let w = col.fold(f64::NEG_INFINITY, f64::max);
                    w + 0.01 * w.abs()
                }
                Orientation::Gain => {
                    let w = col.fold(f64::INFINITY, f64::min);
                    w - 0.01 * w.abs()
                }
            }
        })
        .collect())
}

/// Hypervolume under `cfg`.
pub fn hypervolume(points: &[Vec<f64>], cfg: &HVIConfig) -> Result<f64> {
    let k = cfg.reference_point.len();
    if k == 0 {
        return Err(Error::EmptyInput);
    }
    if let Some(s) = &cfg.scaling {
        if s.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: s.len() });
        }
        if s.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::config("hypervolume scaling divisors must be positive"));
        }
    }
    let sign = match cfg.orientation {
        Orientation::Cost => 1.0,
        Orientation::Gain => -1.0,
    };
    let transform = |v: f64, i: usize| sign * v / cfg.scaling.as_ref().map_or(1.0, |s| s[i]);
    let reference: Vec<f64> = cfg.reference_point.iter().enumerate().map(|(i, &v)| transform(v, i)).collect();
    let mut mapped = Vec::with_capacity(points.len());
    let mut clipped = 0usize;
    for p in points {
        if p.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hypervolume point"));
        }
        let q: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let t = transform(v, i);
                if t > reference[i] {
                    clipped += 1;
                    reference[i]
                } else {
                    t
                }
            })
            .collect();
        mapped.push(q);
    }
    if clipped > 0 {
        warn!("{clipped} coordinate(s) lie beyond the hypervolume reference point and were clipped");
    }
    Ok(match k {
        1 => mapped.iter().map(|p| reference[0] - p[0]).fold(0.0, f64::max),
        2 => hypervolume_2d(&mapped, &reference),
        3 => hypervolume_3d(&mapped, &reference),
        _ => hypervolume_monte_carlo(&mapped, &reference, cfg.monte_carlo_samples, cfg.seed).value,
    })
}

/// Exact two-objective hypervolume (minimization) by a sweep over the first
/// coordinate.
pub fn hypervolume_2d(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let mut pts: Vec<(f64, f64)> =
        points.iter().filter(|p| p[0] < reference[0] && p[1] < reference[1]).map(|p| (p[0], p[1])).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut floor = reference[1];
    for (x, y) in pts {
        if y < floor {
            area += (reference[0] - x) * (floor - y);
            floor = y;
        }
    }
    area
}

/// Exact three-objective hypervolume: slabs between consecutive third
/// coordinates, each measured with the two-objective sweep.
pub fn hypervolume_3d(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let mut pts: Vec<&Vec<f64>> = points.iter().filter(|p| (0..3).all(|i| p[i] < reference[i])).collect();
    pts.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let mut volume = 0.0;
    let mut active: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    let mut i = 0;
    while i < pts.len() {
        let z = pts[i][2];
        while i < pts.len() && pts[i][2] == z {
            active.push(vec![pts[i][0], pts[i][1]]);
            i += 1;
        }
        let top = if i < pts.len() { pts[i][2] } else { reference[2] };
        volume += (top - z) * hypervolume_2d(&active, reference);
    }
    volume
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub value: f64,
    /// Standard error of `value`.
    pub std_error: f64,
}

/// Uniform sampling over the box spanned by the best coordinates and the
/// reference point (minimization).
pub fn hypervolume_monte_carlo(
    points: &[Vec<f64>],
    reference: &[f64],
    samples: usize,
    seed: u64,
) -> MonteCarloEstimate {
    let k = reference.len();
    let inside: Vec<&Vec<f64>> = points.iter().filter(|p| (0..k).all(|i| p[i] < reference[i])).collect();
    if inside.is_empty() || samples == 0 {
        return MonteCarloEstimate { value: 0.0, std_error: 0.0 };
    }
    let lower: Vec<f64> = (0..k).map(|i| inside.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min)).collect();
    let box_volume: f64 = (0..k).map(|i| reference[i] - lower[i]).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; k];
    let mut hits = 0usize;
    for _ in 0..samples {
        for i in 0..k {
            u[i] = lower[i] + rng.random::<f64>() * (reference[i] - lower[i]);
        }
        if inside.iter().any(|p| (0..k).all(|i| p[i] <= u[i])) {
            hits += 1;
        }
    }
    let f = hits as f64 / samples as f64;
    MonteCarloEstimate { value: box_volume * f, std_error: box_volume * (f * (1.0 - f) / samples as f64).sqrt() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let cfg = HVIConfig::new(vec![3.0, 3.0]);
        assert_eq!(hypervolume(&[vec![1.0, 1.0]], &cfg).unwrap(), 4.0);
        assert_eq!(hypervolume(&[vec![1.0, 2.0], vec![2.0, 1.0]], &cfg).unwrap(), 3.0);
        assert_eq!(hypervolume(&[], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn three_objective_inclusion_exclusion() {
        // Boxes of volume 8 and 6 sharing a 1×2×2 block: 8 + 6 − 4.
        let pts = vec![vec![1.0, 1.0, 1.0], vec![2.0, 0.0, 1.0]];
        assert!((hypervolume_3d(&pts, &[3.0, 3.0, 3.0]) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn gain_orientation_reflects() {
        let cfg = HVIConfig::new(vec![0.0, 0.0]).with_orientation(Orientation::Gain);
        assert_eq!(hypervolume(&[vec![0.5, 0.5]], &cfg).unwrap(), 0.25);
    }

    #[test]
    fn points_beyond_reference_are_clipped() {
        let cfg = HVIConfig::new(vec![3.0, 3.0]);
        assert_eq!(hypervolume(&[vec![4.0, 1.0]], &cfg).unwrap(), 0.0);
    }

    #[test]
    fn default_reference_moves_outward() {
        let pts = vec![vec![1.0, 4.0], vec![2.0, 1.0]];
        assert_eq!(default_reference(&pts, Orientation::Cost).unwrap(), vec![2.02, 4.04]);
        assert_eq!(default_reference(&pts, Orientation::Gain).unwrap(), vec![0.99, 0.99]);
    }

    #[test]
    fn monte_carlo_agrees_with_exact() {
        let pts = vec![vec![0.2, 0.7, 0.4], vec![0.5, 0.1, 0.6], vec![0.8, 0.5, 0.1]];
        let reference = [1.0, 1.0, 1.0];
        let exact = hypervolume_3d(&pts, &reference);
        let mc = hypervolume_monte_carlo(&pts, &reference, 200_000, 3);
        assert!((mc.value - exact).abs() < 4.0 * mc.std_error);
    }

    fn point2() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, 2)
    }

    proptest! {
        #[test]
        fn scaling_divides_volume(pts in proptest::collection::vec(point2(), 1..10), d0 in 0.1f64..5.0, d1 in 0.1f64..5.0) {
            let plain = hypervolume(&pts, &HVIConfig::new(vec![1.0, 1.0])).unwrap();
            let scaled = hypervolume(&pts, &HVIConfig::new(vec![1.0, 1.0]).with_scaling(vec![d0, d1])).unwrap();
            prop_assert!((scaled - plain / (d0 * d1)).abs() <= 1e-12 * plain.max(1.0));
        }

        #[test]
        fn adding_points_never_decreases(pts in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 3), 1..12), extra in proptest::collection::vec(0.0f64..1.0, 3)) {
            let reference = [1.0, 1.0, 1.0];
            let before = hypervolume_3d(&pts, &reference);
            let mut more = pts.clone();
            more.push(extra);
            prop_assert!(hypervolume_3d(&more, &reference) >= before - 1e-15);
        }

        #[test]
        fn dominated_points_do_not_count(pts in proptest::collection::vec(point2(), 1..10)) {
            let reference = [1.0, 1.0];
            let before = hypervolume_2d(&pts, &reference);
            let mut more = pts.clone();
            more.push(vec![(pts[0][0] + 0.01).min(1.0), pts[0][1]]);
            prop_assert!((hypervolume_2d(&more, &reference) - before).abs() < 1e-15);
        }
    }
}
