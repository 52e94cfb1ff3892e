//! Normal and chi-squared quantiles, and binomial proportion intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Standard normal quantile `z_q`.
pub fn normal_quantile(q: f64) -> f64 {
    Normal::standard().inverse_cdf(q)
}

/// Wilson–Hilferty approximation of the `q`-quantile of a chi-squared
/// distribution with `dof` degrees of freedom:
/// `dof (1 - 2/(9 dof) + z_q sqrt(2/(9 dof)))^3`, floored at zero.
///
/// Against the exact quantile the relative error over `q` in [0.01, 0.99] is
/// below 2.5e-3 for `dof >= 30` and below 1e-3 for `dof >= 100`.
pub fn chi_sq_quantile(q: f64, dof: usize) -> f64 {
    let k = dof as f64;
    let a = 2.0 / (9.0 * k);
    let base = 1.0 - a + normal_quantile(q) * a.sqrt();
    if base <= 0.0 {
        0.0
    } else {
        k * base.powi(3)
    }
}

/// A binomial proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// z-value of the reported Wilson intervals (two-sided 95%).
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

impl Proportion {
    pub fn new(successes: usize, trials: usize) -> Self {
        let (lower, upper) = wilson_interval(successes, trials, WILSON_Z);
        Self {
            successes,
            trials,
            rate: if trials == 0 {
                0.0
            } else {
                successes as f64 / trials as f64
            },
            lower,
            upper,
        }
    }
}

pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lower = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let upper = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    (lower, upper)
}

/// Nearest-rank quantile of an ascending slice: element `ceil(q N) - 1`.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::ChiSquared;

    #[test]
    fn wilson_hilferty_close_to_exact() {
        for &dof in &[30usize, 100, 200, 1000] {
            let exact = ChiSquared::new(dof as f64).unwrap();
            for &q in &[0.01, 0.05, 0.5, 0.9, 0.95, 0.99] {
                let a = chi_sq_quantile(q, dof);
                let b = exact.inverse_cdf(q);
                let tol = if dof >= 100 { 1e-3 } else { 2.5e-3 };
                assert!((a - b).abs() / b < tol, "dof {dof} q {q}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn wilson_interval_known_value() {
        // 8 of 10: center 0.7166, half-width 0.2271 with z = 1.96
        let (lo, hi) = wilson_interval(8, 10, WILSON_Z);
        assert!((lo - 0.4902).abs() < 1e-4, "{lo}");
        assert!((hi - 0.9433).abs() < 1e-4, "{hi}");
        let p = Proportion::new(0, 50);
        assert_eq!(p.lower, 0.0);
        assert!(p.upper > 0.0 && p.upper < 0.1);
    }

    #[test]
    fn nearest_rank_definition() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(nearest_rank(&v, 0.5), 3.0);
        assert_eq!(nearest_rank(&v, 0.9), 5.0);
        assert_eq!(nearest_rank(&v, 0.2), 1.0);
        assert_eq!(nearest_rank(&[7.0], 0.95), 7.0);
    }
}
