use log::warn;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t_statistic: f64,
    pub p_value: f64,
}

/// Two-sided tail probability of Student's t with `dof` degrees of freedom.
pub fn two_sided_p_value(t: f64, dof: f64) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::config(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

/// Paired two-sided t-test on `a − b`. When the differences have no spread
/// the result is `p = 1` if they are all zero and `p = 0` otherwise.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::config("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test sample"));
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(TTest { t_statistic: 0.0, p_value: 1.0 });
        }
        warn!("paired differences are constant and nonzero; reporting p = 0");
        return Ok(TTest { t_statistic: mean.signum() * f64::INFINITY, p_value: 0.0 });
    }
    let t = mean / (var / n as f64).sqrt();
    Ok(TTest { t_statistic: t, p_value: two_sided_p_value(t, (n - 1) as f64)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [1.0, 2.0, 3.5];
        assert_eq!(paired_t_test(&a, &a).unwrap().p_value, 1.0);
    }

    #[test]
    fn constant_nonzero_differences() {
        let r = paired_t_test(&[2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(r.p_value, 0.0);
    }

    #[test]
    fn tabulated_quantiles_nine_dof() {
        // Upper quantiles of t(9): 0.95, 0.975, 0.995.
        for (t, p) in [(1.833112932653634, 0.10), (2.262157162798205, 0.05), (3.249835541592151, 0.01)] {
            assert!((two_sided_p_value(t, 9.0).unwrap() - p).abs() < 1e-6);
        }
    }

    #[test]
    fn hand_computed_statistic() {
        // Differences 1,2,3,4,5,6,7,8,9,10 shifted by −5: mean 0.5, sd √(55/6).
        let a: Vec<f64> = (1..=10).map(f64::from).collect();
        let b = vec![5.0; 10];
        let r = paired_t_test(&a, &b).unwrap();
        let t = 0.5 / ((55.0 / 6.0) / 10.0f64).sqrt();
        assert!((r.t_statistic - t).abs() < 1e-12);
        assert!(r.p_value > 0.6 && r.p_value < 0.62);
    }

    #[test]
    fn rejects_short_or_mismatched_samples() {
        assert!(paired_t_test(&[1.0], &[2.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[2.0]).is_err());
    }
}
