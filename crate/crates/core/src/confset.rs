//! Euclidean-ball confidence sets for `theta`.
//!
//! * [`sample_split_cs`] fits the estimator on one part of the rows and
//!   measures its accuracy on the other, through the unbiased risk estimate
//!   `||Y2 - X2 theta_tilde||^2 / n2 - 1`. Honest over all sparse vectors the
//!   estimator can handle, with a squared diameter that never drops below
//!   order `n^{-1/2}`.
//! * [`two_radius_cs`] centres a ball at the full-sample estimate and picks
//!   the `k0` or the `k1` estimation radius depending on a sparsity test.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dist::chi_sq_quantile;
use crate::error::{invalid, Error, Result};
use crate::estimate::{l0_pls, PenalizedFit, SolverConfig};
use crate::seed;
use crate::synth::LinearSample;
use crate::testing::{run_test, TestConfig, TestKind, TestOutcome};

/// Default radius constant `L'` of the two-radius set.
///
/// Calibrated at n = 300, p = 400, k0 = 2, k1 = 12 with the default
/// estimator and the residual test, 300 replications per corner. The
/// binding corner is a null signal whose two nonzeros are close to the
/// penalty level: at amplitude 0.3 coverage is 0.68 with `L' = 1.5` and
/// 0.98 with `L' = 2`.
pub const DEFAULT_L_PRIME: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    SampleSplit,
    TwoRadius,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `k0` radius, test did not reject.
    Small,
    /// `k1` radius, test rejected.
    Large,
}

/// `{theta : ||theta - center||^2 <= radius_sq}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallConfidenceSet {
    pub center: DVector<f64>,
    pub radius_sq: f64,
    /// Nominal coverage `1 - alpha`.
    pub level: f64,
    pub construction: Construction,
    pub branch: Option<Branch>,
}

#[derive(Serialize)]
struct CsJson {
    center: Vec<(usize, f64)>,
    radius_sq: f64,
    level: f64,
    construction: Construction,
    branch: Option<Branch>,
}

impl BallConfidenceSet {
    /// `{center: [[index, value], ...], radius_sq, level, construction, branch}`
    pub fn to_json(&self) -> serde_json::Value {
        let doc = CsJson {
            center: self
                .center
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j, *v))
                .collect(),
            radius_sq: self.radius_sq,
            level: self.level,
            construction: self.construction,
            branch: self.branch,
        };
        serde_json::to_value(doc).expect("confidence set serializes")
    }
}

/// Closed ball membership.
pub fn contains(cs: &BallConfidenceSet, theta: &DVector<f64>) -> Result<bool> {
    if theta.len() != cs.center.len() {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} entries, the set lives in dimension {}",
            theta.len(),
            cs.center.len()
        )));
    }
    Ok((theta - &cs.center).norm_squared() <= cs.radius_sq)
}

/// Squared Euclidean diameter, `4 radius_sq`.
pub fn diameter_sq(cs: &BallConfidenceSet) -> f64 {
    4.0 * cs.radius_sq
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// First `ceil(fraction n)` rows, then the rest.
    Deterministic,
    /// A uniformly random partition of the same sizes.
    Seeded(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsConfig {
    pub alpha: f64,
    pub lambda_min_sq: f64,
    pub l_prime: f64,
    pub test_strategy: TestKind,
    pub split_fraction: f64,
    pub split: SplitRule,
}

impl CsConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            lambda_min_sq: 1.0,
            l_prime: DEFAULT_L_PRIME,
            test_strategy: TestKind::ResidualChisq,
            split_fraction: 0.5,
            split: SplitRule::Deterministic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(invalid("split_fraction", "must lie in (0, 1)"));
        }
        if !(self.lambda_min_sq > 0.0) {
            return Err(invalid("lambda_min_sq", "must be positive"));
        }
        if !(self.l_prime > 0.0) {
            return Err(invalid("l_prime", "must be positive"));
        }
        Ok(())
    }
}

/// Lower-tail critical value `u_alpha = (n2 - q_{chi2(n2)}(alpha)) / sqrt(n2)`,
/// so that `P(sum(eps_i^2 - 1) / sqrt(n2) < -u_alpha) = alpha`.
pub fn risk_quantile(alpha: f64, n2: usize) -> f64 {
    let n = n2 as f64;
    (n - chi_sq_quantile(alpha, n2)) / n.sqrt()
}

/// `(estimation rows, risk rows)`.
pub fn split_rows(n: usize, cfg: &CsConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let n1 = (cfg.split_fraction * n as f64).ceil() as usize;
    if n < 4 || n1 < 2 || n1 >= n {
        return Err(invalid(
            "split_fraction",
            format!("split of n = {n} rows leaves an empty or singleton part"),
        ));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    if let SplitRule::Seeded(s) = cfg.split {
        rows.shuffle(&mut seed::rng(s));
    }
    let second = rows.split_off(n1);
    Ok((rows, second))
}

/// Risk-estimation ball: `radius_sq = max(0, 2 / Lambda^2 (R + u_alpha / sqrt(n2)))`
/// with `R = ||Y2 - X2 theta_tilde||^2 / n2 - 1`.
pub fn sample_split_cs(
    sample: &LinearSample,
    cfg: &CsConfig,
    solver: &SolverConfig,
) -> Result<BallConfidenceSet> {
    cfg.validate()?;
    let (first, second) = split_rows(sample.n(), cfg)?;
    let est = sample.select_rows(&first);
    let fit = l0_pls(&est, solver)?;
    let risk = sample.select_rows(&second);
    Ok(sample_split_from_fit(&fit, &risk, cfg))
}

/// The ball built from an estimate and an independent risk sample.
pub fn sample_split_from_fit(
    fit: &PenalizedFit,
    risk: &LinearSample,
    cfg: &CsConfig,
) -> BallConfidenceSet {
    let n2 = risk.n();
    let n2f = n2 as f64;
    let resid = &risk.y - &risk.x * &fit.theta_hat;
    let r_hat = resid.norm_squared() / n2f - 1.0;
    let u = risk_quantile(cfg.alpha, n2);
    let radius_sq = (2.0 / cfg.lambda_min_sq * (r_hat + u / n2f.sqrt())).max(0.0);
    BallConfidenceSet {
        center: fit.theta_hat.clone(),
        radius_sq,
        level: 1.0 - cfg.alpha,
        construction: Construction::SampleSplit,
        branch: None,
    }
}

/// `L'^2 log(p) k / n` with `k = k0` on the small branch and `k1` on the
/// large one.
pub fn two_radius_sq(l_prime: f64, k: usize, n: usize, p: usize) -> f64 {
    l_prime * l_prime * (p as f64).ln() * k as f64 / n as f64
}

/// The two-radius ball for a given test decision.
pub fn two_radius_from_decision(
    center: DVector<f64>,
    reject: bool,
    cfg: &CsConfig,
    test_cfg: &TestConfig,
    n: usize,
) -> BallConfidenceSet {
    let p = center.len();
    let (branch, k) = if reject {
        (Branch::Large, test_cfg.k1)
    } else {
        (Branch::Small, test_cfg.k0)
    };
    BallConfidenceSet {
        radius_sq: two_radius_sq(cfg.l_prime, k, n, p),
        center,
        level: 1.0 - cfg.alpha,
        construction: Construction::TwoRadius,
        branch: Some(branch),
    }
}

/// Two-radius ball plus the test outcome that chose the branch.
pub fn two_radius_cs_with_outcome(
    sample: &LinearSample,
    cfg: &CsConfig,
    solver: &SolverConfig,
    test_cfg: &TestConfig,
) -> Result<(BallConfidenceSet, TestOutcome)> {
    cfg.validate()?;
    test_cfg.validate()?;
    let fit = l0_pls(sample, solver)?;
    let outcome = run_test(cfg.test_strategy, sample, test_cfg, solver, Some(&fit))?;
    let cs = two_radius_from_decision(fit.theta_hat, outcome.reject, cfg, test_cfg, sample.n());
    Ok((cs, outcome))
}

pub fn two_radius_cs(
    sample: &LinearSample,
    cfg: &CsConfig,
    solver: &SolverConfig,
    test_cfg: &TestConfig,
) -> Result<BallConfidenceSet> {
    two_radius_cs_with_outcome(sample, cfg, solver, test_cfg).map(|(cs, _)| cs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn ball(radius_sq: f64) -> BallConfidenceSet {
        BallConfidenceSet {
            center: DVector::from_column_slice(&[1.0, 0.0, -2.0]),
            radius_sq,
            level: 0.95,
            construction: Construction::SampleSplit,
            branch: None,
        }
    }

    #[test]
    fn membership() {
        let cs = ball(1.0);
        assert!(contains(&cs, &cs.center.clone()).unwrap());
        let boundary = DVector::from_column_slice(&[1.0, 1.0, -2.0]);
        assert!(contains(&cs, &boundary).unwrap());
        let outside = DVector::from_column_slice(&[1.0, 1.0 + 1e-9, -2.0]);
        assert!(!contains(&cs, &outside).unwrap());
        let point = ball(0.0);
        assert!(!contains(&point, &boundary).unwrap());
        assert!(contains(&cs, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn diameters() {
        assert_eq!(diameter_sq(&ball(1.0)), 4.0);
        assert_eq!(diameter_sq(&ball(0.0)), 0.0);
    }

    #[test]
    fn split_sizes() {
        let cfg = CsConfig::new(0.05);
        let (a, b) = split_rows(11, &cfg).unwrap();
        assert_eq!(a, (0..6).collect::<Vec<_>>());
        assert_eq!(b, (6..11).collect::<Vec<_>>());
        assert!(split_rows(3, &cfg).is_err());
        let seeded = CsConfig {
            split: SplitRule::Seeded(4),
            ..cfg
        };
        let (c, d) = split_rows(11, &seeded).unwrap();
        assert_eq!((c.len(), d.len()), (6, 5));
        let mut all: Vec<usize> = c.into_iter().chain(d).collect();
        all.sort_unstable();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
    }

    #[test]
    fn noiseless_split_collapses_to_point() {
        let n = 200;
        let x = DMatrix::from_fn(n, 5, |i, j| ((i * 7 + j * 13) % 17) as f64 / 4.0 - 2.0);
        let theta = DVector::from_column_slice(&[0.0, 1.5, 0.0, 0.0, 0.0]);
        let y = &x * &theta;
        let sample = LinearSample::from_parts(x, theta.clone(), y).unwrap();
        let cfg = CsConfig::new(0.05);
        let (first, second) = split_rows(n, &cfg).unwrap();
        let fit = l0_pls(&sample.select_rows(&first), &SolverConfig::exact(0.01, 2)).unwrap();
        assert!((&fit.theta_hat - &theta).amax() < 1e-10);
        let cs = sample_split_from_fit(&fit, &sample.select_rows(&second), &cfg);
        // R = -1 and u_alpha / sqrt(n2) < 1
        assert_eq!(cs.radius_sq, 0.0);
        assert!((&cs.center - &theta).norm_squared() < 1e-18);
    }

    #[test]
    fn radius_grows_with_level() {
        let n = 60;
        let x = DMatrix::from_fn(n, 4, |i, j| ((i * 5 + j * 3) % 11) as f64 / 3.0 - 1.5);
        let y = DVector::from_fn(n, |i, _| (i as f64 * 0.7).sin() * 1.3);
        let sample = LinearSample::from_parts(x, DVector::zeros(4), y).unwrap();
        let solver = SolverConfig::exact(0.05, 2);
        let mut last = -1.0;
        for alpha in [0.5, 0.2, 0.1, 0.05, 0.01] {
            let cs = sample_split_cs(&sample, &CsConfig::new(alpha), &solver).unwrap();
            assert!(cs.radius_sq >= last, "alpha {alpha}");
            last = cs.radius_sq;
        }
        assert!(risk_quantile(0.01, 30) > risk_quantile(0.05, 30));
    }

    #[test]
    fn forced_branches() {
        let cfg = CsConfig {
            l_prime: 1.5,
            ..CsConfig::new(0.05)
        };
        let tcfg = TestConfig::new(0.05, 2, 12);
        let (n, p) = (300, 400);
        let small = two_radius_from_decision(DVector::zeros(p), false, &cfg, &tcfg, n);
        let large = two_radius_from_decision(DVector::zeros(p), true, &cfg, &tcfg, n);
        let lp = (p as f64).ln();
        assert!((small.radius_sq - 2.25 * lp * 2.0 / 300.0).abs() < 1e-15);
        assert!((large.radius_sq - 2.25 * lp * 12.0 / 300.0).abs() < 1e-15);
        assert_eq!(small.branch, Some(Branch::Small));
        assert_eq!(large.branch, Some(Branch::Large));
    }

    #[test]
    fn json_shape() {
        let v = ball(0.5).to_json();
        assert_eq!(v["center"], serde_json::json!([[0, 1.0], [2, -2.0]]));
        assert_eq!(v["construction"], "sample_split");
        assert!(v["branch"].is_null());
    }
}
