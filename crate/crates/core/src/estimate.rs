//! The l0-penalized least-squares estimator
//!
//! ```text
//! argmin_v  ||Y - X v||^2 / n + lambda^2 |supp(v)|
//! ```
//!
//! solved either exactly, by enumerating every support up to a size cap, or
//! by forward selection (orthogonal matching pursuit on the residual) that
//! stops as soon as an extra coordinate no longer lowers the penalized
//! objective. Also provides the best `k0`-term least-squares residual used
//! by the residual test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{binomial, for_each_combination, ls_on_support, GramCache};
use crate::synth::LinearSample;

/// Largest number of candidate supports an exact search may visit.
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

/// Default `C3` in `lambda^2 = C3 log p / n`.
///
/// Calibrated by Monte Carlo (forward selection, Gaussian design, n = 200,
/// p = 100, 3-sparse truth with unit amplitudes, 1000 replications, see
/// `examples/calibrate.rs`): no fit selects more than 9 coordinates from
/// `C3 = 1.5` upwards, and the mean squared loss levels off around 0.018 at
/// `C3 = 3` (0.117 at `C3 = 1`, 0.016 at `C3 = 4`).
pub const DEFAULT_C3: f64 = 3.0;

/// Relative slack under which two objectives count as tied.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    ExactEnumeration,
    GreedyForward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// A fixed `lambda^2`.
    LambdaSq(f64),
    /// `lambda^2 = c3 log p / n`, resolved with the `n` of the data fitted.
    Universal { c3: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub penalty: Penalty,
    pub mode: SolverMode,
    /// Largest support considered; in exact mode `C(p, max_support)` must not
    /// exceed [`ENUMERATION_BUDGET`].
    pub max_support: usize,
}

impl SolverConfig {
    pub fn greedy(c3: f64, max_support: usize) -> Self {
        Self {
            penalty: Penalty::Universal { c3 },
            mode: SolverMode::GreedyForward,
            max_support,
        }
    }

    pub fn exact(lambda_sq: f64, max_support: usize) -> Self {
        Self {
            penalty: Penalty::LambdaSq(lambda_sq),
            mode: SolverMode::ExactEnumeration,
            max_support,
        }
    }

    pub fn lambda_sq(&self, n: usize, p: usize) -> Result<f64> {
        match self.penalty {
            Penalty::LambdaSq(l) => {
                if l > 0.0 && l.is_finite() {
                    Ok(l)
                } else {
                    Err(invalid("lambda_sq", format!("must be positive, got {l}")))
                }
            }
            Penalty::Universal { c3 } => select_lambda(n, p, c3),
        }
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        self.lambda_sq(n, p)?;
        if self.max_support > p {
            return Err(invalid(
                "max_support",
                format!("{} exceeds p = {p}", self.max_support),
            ));
        }
        if self.mode == SolverMode::ExactEnumeration {
            let supports = binomial(p, self.max_support);
            if supports > ENUMERATION_BUDGET {
                return Err(Error::BudgetExceeded {
                    supports,
                    budget: ENUMERATION_BUDGET,
                });
            }
        }
        Ok(())
    }
}

/// `lambda^2 = c3 log(p) / n`.
pub fn select_lambda(n: usize, p: usize, c3: f64) -> Result<f64> {
    if n < 2 {
        return Err(invalid("n", "need n >= 2"));
    }
    if p < 2 {
        return Err(invalid("p", "need p >= 2"));
    }
    if !(c3 > 0.0 && c3.is_finite()) {
        return Err(invalid("c3", format!("must be positive, got {c3}")));
    }
    Ok(c3 * (p as f64).ln() / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedFit {
    pub theta_hat: DVector<f64>,
    /// Ascending indices of the nonzero coordinates.
    pub support: Vec<usize>,
    pub k_hat: usize,
    /// `residual_sq_n + lambda_sq * k_hat`.
    pub objective: f64,
    /// `||Y - X theta_hat||^2 / n`.
    pub residual_sq_n: f64,
    pub lambda_sq: f64,
    pub mode: SolverMode,
    /// Set when a least-squares block on the chosen support was singular and
    /// the minimum-norm solution was used.
    pub rank_deficient: bool,
}

#[derive(Serialize)]
struct FitJson<'a> {
    support: &'a [usize],
    theta_hat: Vec<(usize, f64)>,
    objective: f64,
    lambda_sq: f64,
    mode: SolverMode,
}

impl PenalizedFit {
    fn from_support(
        x: &DMatrix<f64>,
        y: &DVector<f64>,
        mut support: Vec<usize>,
        lambda_sq: f64,
        mode: SolverMode,
    ) -> Self {
        support.sort_unstable();
        let fit = ls_on_support(x, y, &support);
        let mut theta_hat = DVector::zeros(x.ncols());
        for (j, b) in support.iter().zip(&fit.beta) {
            theta_hat[*j] = *b;
        }
        let n = x.nrows() as f64;
        let residual_sq_n = fit.rss / n;
        let k_hat = support.len();
        Self {
            theta_hat,
            k_hat,
            objective: residual_sq_n + lambda_sq * k_hat as f64,
            residual_sq_n,
            lambda_sq,
            mode,
            rank_deficient: fit.rank_deficient,
            support,
        }
    }

    /// `{support, theta_hat: [[index, value], ...], objective, lambda_sq, mode}`
    pub fn to_json(&self) -> serde_json::Value {
        let doc = FitJson {
            support: &self.support,
            theta_hat: self.support.iter().map(|&j| (j, self.theta_hat[j])).collect(),
            objective: self.objective,
            lambda_sq: self.lambda_sq,
            mode: self.mode,
        };
        serde_json::to_value(doc).expect("fit serializes")
    }
}

pub fn l0_pls(sample: &LinearSample, cfg: &SolverConfig) -> Result<PenalizedFit> {
    l0_pls_xy(&sample.x, &sample.y, cfg)
}

pub fn l0_pls_xy(x: &DMatrix<f64>, y: &DVector<f64>, cfg: &SolverConfig) -> Result<PenalizedFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "X has {n} rows but Y has {} entries",
            y.len()
        )));
    }
    cfg.validate(n, p)?;
    let lambda_sq = cfg.lambda_sq(n, p)?;
    let support = match cfg.mode {
        SolverMode::ExactEnumeration => exact_support(x, y, lambda_sq, cfg.max_support),
        SolverMode::GreedyForward => greedy_support(x, y, lambda_sq, cfg.max_support),
    };
    Ok(PenalizedFit::from_support(x, y, support, lambda_sq, cfg.mode))
}

fn improves(candidate: f64, best: f64) -> bool {
    candidate < best - TIE_TOL * best.abs().max(1.0)
}

/// Global minimizer over supports of size `<= max_support`. Sizes are
/// visited in increasing order and supports lexicographically, and only a
/// strict improvement replaces the incumbent, so ties go to the smaller and
/// then the lexicographically first support.
fn exact_support(x: &DMatrix<f64>, y: &DVector<f64>, lambda_sq: f64, max_support: usize) -> Vec<usize> {
    let (n, p) = x.shape();
    let nf = n as f64;
    let mut cache = GramCache::new(x, y, max_support);
    let mut best_obj = cache.yy() / nf;
    let mut best: Vec<usize> = Vec::new();
    for size in 1..=max_support.min(p) {
        let pen = lambda_sq * size as f64;
        // every support of this size costs at least the penalty
        if pen >= best_obj {
            break;
        }
        for_each_combination(p, size, |s| {
            let (rss, _) = cache.rss(s);
            let obj = rss / nf + pen;
            if improves(obj, best_obj) {
                best_obj = obj;
                best.clear();
                best.extend_from_slice(s);
            }
        });
    }
    best
}

/// Index of the column most correlated with `resid`, among those not yet
/// selected. Ties go to the lower index.
fn most_correlated(
    x: &DMatrix<f64>,
    resid: &DVector<f64>,
    col_norm_sq: &[f64],
    selected: &[bool],
) -> Option<usize> {
    let corr = x.tr_mul(resid);
    let mut best: Option<(usize, f64)> = None;
    for j in 0..x.ncols() {
        if selected[j] || col_norm_sq[j] <= 0.0 {
            continue;
        }
        let score = corr[j] * corr[j] / col_norm_sq[j];
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((j, score));
        }
    }
    best.map(|(j, _)| j)
}

fn greedy_support(x: &DMatrix<f64>, y: &DVector<f64>, lambda_sq: f64, max_support: usize) -> Vec<usize> {
    let (n, p) = x.shape();
    let nf = n as f64;
    let col_norm_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
    let mut selected = vec![false; p];
    let mut support: Vec<usize> = Vec::new();
    let mut resid = y.clone();
    let mut obj = y.norm_squared() / nf;
    while support.len() < max_support.min(p) {
        let Some(j) = most_correlated(x, &resid, &col_norm_sq, &selected) else {
            break;
        };
        support.push(j);
        let fit = ls_on_support(x, y, &support);
        let cand = fit.rss / nf + lambda_sq * support.len() as f64;
        if !improves(cand, obj) {
            support.pop();
            break;
        }
        obj = cand;
        selected[j] = true;
        resid = y - x.select_columns(&support) * DVector::from_column_slice(&fit.beta);
    }
    support
}

/// Smallest residual sum of squares over supports of size at most `k0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinResidual {
    pub rss: f64,
    pub support: Vec<usize>,
    /// `false` when the search fell back to forward selection, in which case
    /// `rss` is an upper bound on the minimum.
    pub exact: bool,
    pub rank_deficient: bool,
}

pub fn sparse_ls_min_residual(x: &DMatrix<f64>, y: &DVector<f64>, k0: usize) -> Result<MinResidual> {
    sparse_ls_min_residual_with_budget(x, y, k0, ENUMERATION_BUDGET)
}

/// As [`sparse_ls_min_residual`], enumerating exactly only when
/// `C(p, k0) <= budget`.
pub fn sparse_ls_min_residual_with_budget(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    k0: usize,
    budget: u128,
) -> Result<MinResidual> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "X has {n} rows but Y has {} entries",
            y.len()
        )));
    }
    if k0 > p {
        return Err(invalid("k0", format!("k0 = {k0} exceeds p = {p}")));
    }
    if k0 == 0 {
        return Ok(MinResidual {
            rss: y.norm_squared(),
            support: Vec::new(),
            exact: true,
            rank_deficient: false,
        });
    }
    // Adding columns never increases the residual, so supports of size
    // exactly k0 attain the minimum.
    let exact = binomial(p, k0) <= budget;
    let support = if exact {
        let mut cache = GramCache::new(x, y, k0);
        let mut best_rss = f64::INFINITY;
        let mut best = Vec::new();
        for_each_combination(p, k0, |s| {
            let (rss, _) = cache.rss(s);
            if best.is_empty() || improves(rss, best_rss) {
                best_rss = rss;
                best.clear();
                best.extend_from_slice(s);
            }
        });
        best
    } else {
        forward_selection(x, y, k0)
    };
    let mut support = support;
    support.sort_unstable();
    let fit = ls_on_support(x, y, &support);
    Ok(MinResidual {
        rss: fit.rss.min(y.norm_squared()),
        support,
        exact,
        rank_deficient: fit.rank_deficient,
    })
}

/// `steps` rounds of orthogonal matching pursuit without a stopping rule.
fn forward_selection(x: &DMatrix<f64>, y: &DVector<f64>, steps: usize) -> Vec<usize> {
    let p = x.ncols();
    let col_norm_sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared()).collect();
    let mut selected = vec![false; p];
    let mut support = Vec::new();
    let mut resid = y.clone();
    for _ in 0..steps {
        let Some(j) = most_correlated(x, &resid, &col_norm_sq, &selected) else {
            break;
        };
        selected[j] = true;
        support.push(j);
        let fit = ls_on_support(x, y, &support);
        resid = y - x.select_columns(&support) * DVector::from_column_slice(&fit.beta);
    }
    support
}
