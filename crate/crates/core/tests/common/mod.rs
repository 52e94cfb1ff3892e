//! Reference implementations used as oracles. They follow the definitions
//! literally and share no code with the library's fast paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// All `k`-subsets of `0..p`, lexicographic, built recursively.
pub fn subsets(p: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, p: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..p {
            cur.push(j);
            rec(j + 1, p, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, p, k, &mut Vec::new(), &mut out);
    out
}

/// `min over |S| = k0 of sqrt(sum_{j not in S} theta_j^2)`.
pub fn brute_distance(theta: &[f64], k0: usize) -> f64 {
    subsets(theta.len(), k0)
        .iter()
        .map(|s| {
            theta
                .iter()
                .enumerate()
                .filter(|(j, _)| !s.contains(j))
                .map(|(_, v)| v * v)
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Residual sum of squares on `support` through the normal equations,
/// solved by LU.
pub fn lu_rss(x: &DMatrix<f64>, y: &DVector<f64>, support: &[usize]) -> f64 {
    if support.is_empty() {
        return y.norm_squared();
    }
    let xs = x.select_columns(support);
    let g = xs.transpose() * &xs;
    let b = xs.transpose() * y;
    let beta = g.lu().solve(&b).expect("nonsingular support");
    (y - xs * beta).norm_squared()
}

/// Penalized objective minimized over every support of size `<= max_support`;
/// ties keep the first support met (sizes ascending, lexicographic).
pub fn l0_oracle(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda_sq: f64,
    max_support: usize,
) -> (Vec<usize>, f64) {
    let n = x.nrows() as f64;
    let mut best = (Vec::new(), y.norm_squared() / n);
    for size in 1..=max_support {
        for s in subsets(x.ncols(), size) {
            let obj = lu_rss(x, y, &s) / n + lambda_sq * size as f64;
            if obj < best.1 - 1e-12 * best.1.abs().max(1.0) {
                best = (s, obj);
            }
        }
    }
    best
}

/// Smallest `||Y - X theta'||^2` over `k0`-sparse `theta'` with entries on a
/// grid of spacing `h` in `[-half_width, half_width]`, and a bound on how
/// far above the true minimum the grid value can be.
pub fn residual_grid_oracle(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    k0: usize,
    h: f64,
    half_width: f64,
) -> (f64, f64) {
    let steps = (2.0 * half_width / h).round() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| -half_width + i as f64 * h).collect();
    let mut best = f64::INFINITY;
    let mut lmax: f64 = 0.0;
    let yy = y.norm_squared();
    for s in subsets(x.ncols(), k0) {
        let xs = x.select_columns(&s);
        let g = xs.transpose() * &xs;
        let b = xs.transpose() * y;
        lmax = lmax.max(g.clone().symmetric_eigenvalues().max());
        let mut idx = vec![0usize; k0];
        let mut t = vec![0.0; k0];
        loop {
            for (d, &i) in idx.iter().enumerate() {
                t[d] = grid[i];
            }
            // ||y - Xs t||^2 = y'y - 2 b't + t'Gt
            let mut val = yy;
            for a in 0..k0 {
                val -= 2.0 * b[a] * t[a];
                for c in 0..k0 {
                    val += t[a] * g[(a, c)] * t[c];
                }
            }
            best = best.min(val);
            let mut d = 0;
            while d < k0 {
                idx[d] += 1;
                if idx[d] <= steps {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == k0 {
                break;
            }
        }
    }
    // the minimizer is within h/2 of a grid point in every coordinate
    (best, lmax * k0 as f64 * h * h / 4.0)
}

/// `a_ij = Y_i X_ij`.
pub fn products(x: &DMatrix<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| y[i] * x[(i, j)])
}

/// Coordinate `j` of the U-statistic at value `t`, by the double sum.
pub fn u_coordinate(a: &DMatrix<f64>, j: usize, t: f64) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for k in i + 1..n {
            s += (a[(i, j)] - t) * (a[(k, j)] - t);
        }
    }
    2.0 * s / (n as f64 * (n as f64 - 1.0))
}

/// `inf over k0-sparse theta' of |U_n(theta')|`: every support of size
/// `k0`, each coordinate minimized as a parabola fitted through three
/// double-sum evaluations.
pub fn u_min_oracle(a: &DMatrix<f64>, k0: usize) -> f64 {
    let p = a.ncols();
    let at_zero: Vec<f64> = (0..p).map(|j| u_coordinate(a, j, 0.0)).collect();
    if k0 == 0 {
        return at_zero.iter().sum::<f64>().abs();
    }
    let minimum: Vec<f64> = (0..p)
        .map(|j| {
            let f0 = at_zero[j];
            let f1 = u_coordinate(a, j, 1.0);
            let fm = u_coordinate(a, j, -1.0);
            let curv = (f1 + fm - 2.0 * f0) / 2.0;
            let slope = (f1 - fm) / 2.0;
            let t = -slope / (2.0 * curv);
            curv * t * t + slope * t + f0
        })
        .collect();
    subsets(p, k0)
        .iter()
        .map(|s| {
            let lowest: f64 = (0..p)
                .map(|j| if s.contains(&j) { minimum[j] } else { at_zero[j] })
                .sum();
            // U ranges continuously over [lowest, inf) on this support
            lowest.max(0.0)
        })
        .fold(f64::INFINITY, f64::min)
}
