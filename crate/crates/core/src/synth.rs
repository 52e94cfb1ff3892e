//! Synthetic data: random designs, sparse and separated signals, model
//! samples `Y = X theta + eps`, and the sparse product prior used to probe
//! the detection boundary.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed::{self, TAG_DESIGN, TAG_NOISE};

/// Population covariance of a correlated Gaussian design, with its Cholesky
/// factor cached.
#[derive(Debug, Clone)]
pub struct Covariance {
    sigma: DMatrix<f64>,
    lower: DMatrix<f64>,
    min_eigenvalue: f64,
}

impl Covariance {
    /// Validates `sigma` (square, symmetric, unit diagonal, positive
    /// definite) and factors it.
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() || sigma.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square and nonempty, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let p = sigma.nrows();
        for i in 0..p {
            if (sigma[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(invalid("sigma", format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 {
                    return Err(invalid("sigma", "matrix is not symmetric"));
                }
            }
        }
        let min_eigenvalue = sigma.clone().symmetric_eigen().eigenvalues.min();
        if !(min_eigenvalue > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let lower = sigma
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .unpack();
        Ok(Self {
            sigma,
            lower,
            min_eigenvalue,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Smallest eigenvalue of the covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }
}

/// `Sigma_ij = rho^|i-j|`.
pub fn ar1_covariance(p: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32))
}

#[derive(Debug, Clone)]
pub enum DesignKind {
    /// Independent `N(0, 1)` entries.
    IidGaussian,
    /// Independent uniform signs; `bound` is the declared almost-sure bound.
    BoundedRademacher { bound: f64 },
    /// Independent `N(0, Sigma)` rows.
    CorrelatedGaussian(Arc<Covariance>),
}

/// Law of the random `n x p` design matrix.
#[derive(Debug, Clone)]
pub struct DesignSpec {
    pub n: usize,
    pub p: usize,
    pub kind: DesignKind,
    /// Known lower bound on the smallest eigenvalue of the population Gram
    /// matrix.
    pub lambda_min_sq: f64,
}

impl DesignSpec {
    pub fn iid_gaussian(n: usize, p: usize) -> Result<Self> {
        let spec = Self {
            n,
            p,
            kind: DesignKind::IidGaussian,
            lambda_min_sq: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn bounded_rademacher(n: usize, p: usize, bound: f64) -> Result<Self> {
        let spec = Self {
            n,
            p,
            kind: DesignKind::BoundedRademacher { bound },
            lambda_min_sq: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Correlated Gaussian rows; `lambda_min_sq` is taken from an eigen
    /// decomposition of `sigma`.
    pub fn correlated_gaussian(n: usize, p: usize, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != p {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {}x{} but p = {p}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let cov = Covariance::new(sigma)?;
        let spec = Self {
            n,
            p,
            lambda_min_sq: cov.min_eigenvalue(),
            kind: DesignKind::CorrelatedGaussian(Arc::new(cov)),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Correlated Gaussian design with AR(1) covariance `rho^|i-j|`.
    pub fn ar1(n: usize, p: usize, rho: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(invalid("rho", format!("AR(1) needs |rho| < 1, got {rho}")));
        }
        Self::correlated_gaussian(n, p, ar1_covariance(p, rho))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("n", format!("need n >= 2, got {}", self.n)));
        }
        if self.p < 1 {
            return Err(invalid("p", "need p >= 1"));
        }
        if !(self.lambda_min_sq > 0.0) {
            return Err(invalid("lambda_min_sq", "must be positive"));
        }
        match &self.kind {
            DesignKind::IidGaussian => {}
            DesignKind::BoundedRademacher { bound } => {
                // Unit-variance entries bounded by b exist only for b >= 1.
                if !(*bound >= 1.0) {
                    return Err(invalid(
                        "b",
                        format!("sign entries have modulus 1, bound must be >= 1, got {bound}"),
                    ));
                }
            }
            DesignKind::CorrelatedGaussian(cov) => {
                if cov.sigma.nrows() != self.p {
                    return Err(Error::DimensionMismatch(
                        "covariance does not match p".into(),
                    ));
                }
                if self.lambda_min_sq > cov.min_eigenvalue * (1.0 + 1e-12) {
                    return Err(invalid(
                        "lambda_min_sq",
                        "exceeds the smallest eigenvalue of the covariance",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Same law with a different number of rows.
    pub fn with_rows(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

/// Draws an `n x p` design from `spec`.
pub fn generate_design(spec: &DesignSpec, seed: u64) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let mut rng = seed::rng(seed);
    let (n, p) = (spec.n, spec.p);
    let x = match &spec.kind {
        DesignKind::IidGaussian => DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal)),
        DesignKind::BoundedRademacher { .. } => {
            DMatrix::from_fn(n, p, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
        }
        DesignKind::CorrelatedGaussian(cov) => {
            let z = DMatrix::<f64>::from_fn(n, p, |_, _| rng.sample(StandardNormal));
            z * cov.lower.transpose()
        }
    };
    Ok(x)
}

/// Magnitudes placed on the nonzero coordinates of a sparse signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeProfile {
    /// Every nonzero equals the given value.
    Constant(f64),
    /// The `i`-th placed nonzero (0-based) is `1 / (i + 1)`.
    Decaying,
    /// Independent standard normal values.
    RandomGaussian,
}

/// A vector with exactly `k` nonzero coordinates at uniformly random
/// positions.
pub fn generate_sparse_signal(
    p: usize,
    k: usize,
    profile: AmplitudeProfile,
    seed: u64,
) -> Result<DVector<f64>> {
    if k > p {
        return Err(invalid("k", format!("k = {k} exceeds p = {p}")));
    }
    if let AmplitudeProfile::Constant(a) = profile {
        if k > 0 && !(a != 0.0 && a.is_finite()) {
            return Err(invalid("amplitude", "must be finite and nonzero"));
        }
    }
    let mut rng = seed::rng(seed);
    let positions = index::sample(&mut rng, p, k);
    let mut theta = DVector::zeros(p);
    for (i, j) in positions.into_iter().enumerate() {
        theta[j] = match profile {
            AmplitudeProfile::Constant(a) => a,
            AmplitudeProfile::Decaying => 1.0 / (i as f64 + 1.0),
            AmplitudeProfile::RandomGaussian => loop {
                let v: f64 = rng.sample(StandardNormal);
                if v != 0.0 {
                    break v;
                }
            },
        };
    }
    Ok(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LrNorm {
    #[serde(rename = "1")]
    L1,
    #[serde(rename = "2")]
    L2,
}

impl LrNorm {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            LrNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            LrNorm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

/// Optional `||theta||_r <= radius` restriction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBall {
    pub norm: LrNorm,
    pub radius: f64,
}

/// Alternative class: `k1`-sparse vectors at distance at least `rho` from
/// the `k0`-sparse vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub p: usize,
    pub k0: usize,
    pub k1: usize,
    pub rho: f64,
    /// Magnitude of the `k0` large coordinates; `max(5 rho, 5)` when unset.
    pub spike: Option<f64>,
    pub ball: Option<NormBall>,
}

impl SignalSpec {
    pub fn new(p: usize, k0: usize, k1: usize, rho: f64) -> Self {
        Self {
            p,
            k0,
            k1,
            rho,
            spike: None,
            ball: None,
        }
    }

    pub fn spike_magnitude(&self) -> f64 {
        self.spike.unwrap_or_else(|| (5.0 * self.rho).max(5.0))
    }

    pub fn small_magnitude(&self) -> f64 {
        self.rho / ((self.k1 - self.k0) as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k0 >= self.k1 {
            return Err(invalid(
                "k1",
                format!("need k0 < k1, got k0 = {}, k1 = {}", self.k0, self.k1),
            ));
        }
        if self.k1 > self.p {
            return Err(invalid("k1", format!("k1 = {} exceeds p = {}", self.k1, self.p)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(invalid("rho", format!("must be positive, got {}", self.rho)));
        }
        if self.k0 > 0 && !(self.spike_magnitude() >= self.small_magnitude()) {
            return Err(invalid(
                "spike",
                format!(
                    "spike {} is below the separated magnitude {}",
                    self.spike_magnitude(),
                    self.small_magnitude()
                ),
            ));
        }
        if let Some(ball) = self.ball {
            if !(ball.radius > 0.0) {
                return Err(invalid("radius", "must be positive"));
            }
            let s = self.spike_magnitude();
            let k0 = self.k0 as f64;
            let norm = match ball.norm {
                LrNorm::L1 => k0 * s + self.rho * ((self.k1 - self.k0) as f64).sqrt(),
                LrNorm::L2 => (k0 * s * s + self.rho * self.rho).sqrt(),
            };
            if norm > ball.radius {
                return Err(Error::Infeasible(format!(
                    "separated signal has l{} norm {norm} > radius {}",
                    match ball.norm {
                        LrNorm::L1 => 1,
                        LrNorm::L2 => 2,
                    },
                    ball.radius
                )));
            }
        }
        Ok(())
    }
}

/// A member of the separated class sitting exactly on its boundary: `k0`
/// spikes plus `k1 - k0` equal coordinates of magnitude
/// `rho / sqrt(k1 - k0)`, at random positions.
pub fn generate_separated_signal(spec: &SignalSpec, seed: u64) -> Result<DVector<f64>> {
    spec.validate()?;
    let mut rng = seed::rng(seed);
    let positions = index::sample(&mut rng, spec.p, spec.k1);
    let spike = spec.spike_magnitude();
    let small = spec.small_magnitude();
    let mut theta = DVector::zeros(spec.p);
    for (i, j) in positions.into_iter().enumerate() {
        theta[j] = if i < spec.k0 { spike } else { small };
    }
    let d = distance_to_sparse(theta.as_slice(), spec.k0)?;
    debug_assert!(
        (d - spec.rho).abs() <= 1e-9 * spec.rho.max(1.0),
        "separation {d} != {}",
        spec.rho
    );
    Ok(theta)
}

/// Indices of the `k0` largest-magnitude coordinates. Ties go to the lower
/// index.
pub fn top_k_support(theta: &[f64], k0: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| {
        theta[b]
            .abs()
            .total_cmp(&theta[a].abs())
            .then(a.cmp(&b))
    });
    order.truncate(k0.min(theta.len()));
    order.sort_unstable();
    order
}

/// Euclidean distance from `theta` to the set of `k0`-sparse vectors: the
/// norm of what remains after removing the `k0` largest coordinates.
pub fn distance_to_sparse(theta: &[f64], k0: usize) -> Result<f64> {
    if k0 > theta.len() {
        return Err(invalid(
            "k0",
            format!("k0 = {k0} exceeds dimension {}", theta.len()),
        ));
    }
    let mut sq: Vec<f64> = theta.iter().map(|v| v * v).collect();
    sq.sort_by(f64::total_cmp);
    // ascending summation of the p - k0 smallest squares
    Ok(sq[..theta.len() - k0].iter().sum::<f64>().sqrt())
}

/// One draw `(X, theta, Y)` of the linear model.
#[derive(Debug, Clone)]
pub struct LinearSample {
    pub x: DMatrix<f64>,
    pub theta_true: DVector<f64>,
    pub y: DVector<f64>,
    pub seed: u64,
    pub design: Option<DesignSpec>,
}

impl LinearSample {
    /// Wraps externally constructed data. `seed` is set to 0.
    pub fn from_parts(x: DMatrix<f64>, theta_true: DVector<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() || x.ncols() != theta_true.len() {
            return Err(Error::DimensionMismatch(format!(
                "X is {}x{}, theta has {} entries, Y has {}",
                x.nrows(),
                x.ncols(),
                theta_true.len(),
                y.len()
            )));
        }
        Ok(Self {
            x,
            theta_true,
            y,
            seed: 0,
            design: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// The sub-sample made of the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(rows),
            theta_true: self.theta_true.clone(),
            y: self.y.select_rows(rows),
            seed: self.seed,
            design: self.design.as_ref().map(|d| d.with_rows(rows.len())),
        }
    }
}

/// Draws a fresh design and fresh standard Gaussian noise, and assembles
/// `Y = X theta + eps`.
pub fn sample_model(design: &DesignSpec, theta: &DVector<f64>, seed: u64) -> Result<LinearSample> {
    if theta.len() != design.p {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} entries but p = {}",
            theta.len(),
            design.p
        )));
    }
    let x = generate_design(design, seed::substream(seed, TAG_DESIGN))?;
    let mut rng = seed::rng(seed::substream(seed, TAG_NOISE));
    let mut y = &x * theta;
    for yi in y.iter_mut() {
        *yi += rng.sample::<f64, _>(StandardNormal);
    }
    Ok(LinearSample {
        x,
        theta_true: theta.clone(),
        y,
        seed,
        design: Some(design.clone()),
    })
}

/// Sparse product prior: each coordinate is `0` with probability `1 - h`
/// and `+b` or `-b` with probability `h / 2` each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub p: usize,
    pub b_amp: f64,
    pub h_prob: f64,
}

impl PriorSpec {
    /// Least-favorable calibration for alternatives of sparsity `k1` at
    /// separation `rho_bar`: `b = rho_bar / (c sqrt(k1))`, `h = c k1 / p`,
    /// so that `b^2 p h = rho_bar^2 / c`.
    pub fn least_favorable(p: usize, k1: usize, rho_bar: f64, c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(invalid("c", format!("must lie in (0, 1), got {c}")));
        }
        if k1 == 0 || k1 > p {
            return Err(invalid("k1", format!("need 1 <= k1 <= p, got {k1}")));
        }
        if !(rho_bar >= 0.0 && rho_bar.is_finite()) {
            return Err(invalid("rho_bar", "must be nonnegative"));
        }
        let h_prob = c * k1 as f64 / p as f64;
        if h_prob >= 1.0 {
            return Err(invalid("c", "inclusion probability c k1 / p must be < 1"));
        }
        Ok(Self {
            p,
            b_amp: rho_bar / (c * (k1 as f64).sqrt()),
            h_prob,
        })
    }

    pub fn from_parts(p: usize, b_amp: f64, h_prob: f64) -> Result<Self> {
        let spec = Self { p, b_amp, h_prob };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.h_prob) {
            return Err(invalid("h_prob", "must lie in [0, 1]"));
        }
        if !(self.b_amp >= 0.0 && self.b_amp.is_finite()) {
            return Err(invalid("b_amp", "must be finite and nonnegative"));
        }
        Ok(())
    }

    /// `E ||theta||^2 = b^2 p h`.
    pub fn mean_sq_norm(&self) -> f64 {
        self.b_amp * self.b_amp * self.p as f64 * self.h_prob
    }
}

pub fn sample_prior(prior: &PriorSpec, seed: u64) -> DVector<f64> {
    let mut rng = seed::rng(seed);
    DVector::from_fn(prior.p, |_, _| {
        let u: f64 = rng.random();
        if u < prior.h_prob / 2.0 {
            prior.b_amp
        } else if u < prior.h_prob {
            -prior.b_amp
        } else {
            0.0
        }
    })
}

pub fn count_nonzero(v: &[f64]) -> usize {
    v.iter().filter(|x| **x != 0.0).count()
}
