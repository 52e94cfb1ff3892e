//! Least squares restricted to a column subset, and the support enumeration
//! machinery shared by the estimator and the residual test.

use nalgebra::{DMatrix, DVector};

/// Least-squares fit of `y` on the columns `support` of `x`.
#[derive(Debug, Clone)]
pub(crate) struct SupportFit {
    /// Coefficients in the order of `support`.
    pub beta: Vec<f64>,
    pub rss: f64,
    pub rank_deficient: bool,
}

/// Minimum-norm least squares on `support` via SVD.
pub(crate) fn ls_on_support(x: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> SupportFit {
    if support.is_empty() {
        return SupportFit {
            beta: Vec::new(),
            rss: y.norm_squared(),
            rank_deficient: false,
        };
    }
    let xs = x.select_columns(support);
    let (n, s) = xs.shape();
    let svd = xs.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = n.max(s) as f64 * f64::EPSILON * smax;
    let rank_deficient = s > n || svd.singular_values.iter().any(|sv| *sv <= tol);
    let beta = svd
        .solve(y, tol)
        .unwrap_or_else(|_| DVector::zeros(s));
    let rss = (y - &xs * &beta).norm_squared();
    SupportFit {
        beta: beta.as_slice().to_vec(),
        rss,
        rank_deficient,
    }
}

/// `C(p, k)`, saturating.
pub fn binomial(p: usize, k: usize) -> u128 {
    if k > p {
        return 0;
    }
    let k = k.min(p - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((p - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Calls `f` on every `k`-subset of `0..p` in lexicographic order.
pub(crate) fn for_each_combination(p: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > p {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + p - k {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Precomputed `X^T X`, `X^T Y` and `||Y||^2` so that the residual sum of
/// squares of any small support costs one small Cholesky factorization.
pub(crate) struct GramCache<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    gram: Option<DMatrix<f64>>,
    diag: Vec<f64>,
    xty: DVector<f64>,
    yy: f64,
    chol: Vec<f64>,
    z: Vec<f64>,
}

impl<'a> GramCache<'a> {
    /// `max_support` decides whether the full Gram matrix is needed.
    pub fn new(x: &'a DMatrix<f64>, y: &'a DVector<f64>, max_support: usize) -> Self {
        let gram = (max_support >= 2).then(|| x.tr_mul(x));
        let diag = match &gram {
            Some(g) => g.diagonal().as_slice().to_vec(),
            None => x.column_iter().map(|c| c.norm_squared()).collect(),
        };
        Self {
            x,
            y,
            gram,
            diag,
            xty: x.tr_mul(y),
            yy: y.norm_squared(),
            chol: vec![0.0; max_support * max_support],
            z: vec![0.0; max_support],
        }
    }

    pub fn yy(&self) -> f64 {
        self.yy
    }

    fn g(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else {
            self.gram.as_ref().expect("full gram for supports of size >= 2")[(i, j)]
        }
    }

    /// Residual sum of squares on `support`; the bool flags a numerically
    /// singular Gram block (solved by SVD instead).
    pub fn rss(&mut self, support: &[usize]) -> (f64, bool) {
        match self.rss_cholesky(support) {
            Some(r) => (r, false),
            None => {
                let fit = ls_on_support(self.x, self.y, support);
                (fit.rss, true)
            }
        }
    }

    fn rss_cholesky(&mut self, support: &[usize]) -> Option<f64> {
        let s = support.len();
        if s == 0 {
            return Some(self.yy);
        }
        if self.chol.len() < s * s {
            self.chol.resize(s * s, 0.0);
            self.z.resize(s, 0.0);
        }
        for i in 0..s {
            for j in 0..=i {
                let mut sum = self.g(support[i], support[j]);
                for k in 0..j {
                    sum -= self.chol[i * s + k] * self.chol[j * s + k];
                }
                if i == j {
                    if !(sum > 1e-10 * self.diag[support[i]]) {
                        return None;
                    }
                    self.chol[i * s + i] = sum.sqrt();
                } else {
                    self.chol[i * s + j] = sum / self.chol[j * s + j];
                }
            }
        }
        let mut explained = 0.0;
        for i in 0..s {
            let mut v = self.xty[support[i]];
            for k in 0..i {
                v -= self.chol[i * s + k] * self.z[k];
            }
            let zi = v / self.chol[i * s + i];
            self.z[i] = zi;
            explained += zi * zi;
        }
        Some((self.yy - explained).max(0.0))
    }
}
