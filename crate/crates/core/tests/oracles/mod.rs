//! Independent reference implementations used to check the estimators.
//!
//! Nothing here calls into the crate's solvers; the code is deliberately
//! naive (brute force, grid search, textbook Newton) so that agreement is
//! meaningful.
#![allow(dead_code, clippy::needless_range_loop, clippy::too_many_arguments)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Weighted least squares via `X'WX b = X'Wy`.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let d = x[0].len();
    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for ((r, &yi), &wi) in x.iter().zip(y).zip(w) {
        for j in 0..d {
            b[j] += wi * r[j] * yi;
            for k in 0..d {
                a[j][k] += wi * r[j] * r[k];
            }
        }
    }
    gauss_solve(a, b)
}

pub fn check_objective(x: &[Vec<f64>], y: &[f64], w: &[f64], u: f64, b: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(w)
        .map(|((r, &yi), &wi)| {
            let res = yi - r.iter().zip(b).map(|(a, c)| a * c).sum::<f64>();
            wi * if res > 0.0 { u * res } else { (u - 1.0) * res }
        })
        .sum()
}

/// Best basic solution of a two-coefficient quantile regression: every line
/// through two observations with distinct abscissae is tried.
pub fn qr_enumeration(x: &[Vec<f64>], y: &[f64], w: &[f64], u: f64) -> (Vec<f64>, f64) {
    let mut best = (vec![f64::NAN; 2], f64::INFINITY);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if w[i] <= 0.0 || w[j] <= 0.0 {
                continue;
            }
            let det = x[i][0] * x[j][1] - x[i][1] * x[j][0];
            if det.abs() < 1e-12 {
                continue;
            }
            let b0 = (y[i] * x[j][1] - x[i][1] * y[j]) / det;
            let b1 = (x[i][0] * y[j] - y[i] * x[j][0]) / det;
            let obj = check_objective(x, y, w, u, &[b0, b1]);
            if obj < best.1 {
                best = (vec![b0, b1], obj);
            }
        }
    }
    best
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

pub fn logit_loglik(x: &[Vec<f64>], z: &[bool], w: &[f64], b: &[f64]) -> f64 {
    x.iter()
        .zip(z)
        .zip(w)
        .map(|((r, &zi), &wi)| {
            let eta: f64 = r.iter().zip(b).map(|(a, c)| a * c).sum();
            let p = sigmoid(if zi { eta } else { -eta });
            wi * p.ln()
        })
        .sum()
}

/// Textbook Newton with backtracking, started from `starts` random points
/// in `[-2, 2]^d`; the start reaching the highest likelihood wins.
pub fn logit_multistart(x: &[Vec<f64>], z: &[bool], w: &[f64], starts: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = x[0].len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..starts {
        let mut b: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        for _ in 0..200 {
            let mut g = vec![0.0; d];
            let mut h = vec![vec![0.0; d]; d];
            for ((r, &zi), &wi) in x.iter().zip(z).zip(w) {
                let p = sigmoid(r.iter().zip(&b).map(|(a, c)| a * c).sum());
                let zf = if zi { 1.0 } else { 0.0 };
                for j in 0..d {
                    g[j] += wi * (zf - p) * r[j];
                    for k in 0..d {
                        h[j][k] += wi * p * (1.0 - p) * r[j] * r[k];
                    }
                }
            }
            if g.iter().all(|v| v.abs() < 1e-13) {
                break;
            }
            let step = gauss_solve(h, g);
            let ll = logit_loglik(x, z, w, &b);
            let mut t = 1.0;
            loop {
                let cand: Vec<f64> = b.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                if logit_loglik(x, z, w, &cand) >= ll || t < 1e-12 {
                    b = cand;
                    break;
                }
                t *= 0.5;
            }
        }
        let ll = logit_loglik(x, z, w, &b);
        if best.as_ref().is_none_or(|(_, l)| ll > *l) {
            best = Some((b, ll));
        }
    }
    best.unwrap().0
}

/// Breslow partial log-likelihood in the hazard parameterization
/// `lambda(t|x) = lambda0(t) exp(x'b)`.
pub fn cox_partial_loglik(x: &[Vec<f64>], y: &[f64], b: &[f64]) -> f64 {
    let eta: Vec<f64> = x.iter().map(|r| r.iter().zip(b).map(|(a, c)| a * c).sum()).collect();
    let mut ll = 0.0;
    for i in 0..y.len() {
        let risk: f64 = (0..y.len()).filter(|&j| y[j] >= y[i]).map(|j| eta[j].exp()).sum();
        ll += eta[i] - risk.ln();
    }
    ll
}

/// Grid search over `b in [-10, 10]` with step `1e-4`.
pub fn cox_grid(x: &[f64], y: &[f64]) -> f64 {
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..=200_000 {
        let b = -10.0 + k as f64 * 1e-4;
        let ll = cox_partial_loglik(&rows, y, &[b]);
        if ll > best.1 {
            best = (b, ll);
        }
    }
    best.0
}

/// Newton on the Breslow partial likelihood from random starts, with
/// numerically differentiated score and Hessian.
pub fn cox_multistart(x: &[Vec<f64>], y: &[f64], starts: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = x[0].len();
    let f = |b: &[f64]| cox_partial_loglik(x, y, b);
    let h = 1e-4;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..starts {
        let mut b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..100 {
            let shifted = |b: &[f64], j: usize, s: f64| {
                let mut c = b.to_vec();
                c[j] += s;
                c
            };
            let g: Vec<f64> = (0..d).map(|j| (f(&shifted(&b, j, h)) - f(&shifted(&b, j, -h))) / (2.0 * h)).collect();
            let mut hess = vec![vec![0.0; d]; d];
            for j in 0..d {
                for k in 0..d {
                    let pp = f(&shifted(&shifted(&b, j, h), k, h));
                    let pm = f(&shifted(&shifted(&b, j, h), k, -h));
                    let mp = f(&shifted(&shifted(&b, j, -h), k, h));
                    let mm = f(&shifted(&shifted(&b, j, -h), k, -h));
                    hess[j][k] = -(pp - pm - mp + mm) / (4.0 * h * h);
                }
            }
            let step = gauss_solve(hess, g.clone());
            let base = f(&b);
            let mut t = 1.0;
            loop {
                let cand: Vec<f64> = b.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                if f(&cand) >= base || t < 1e-12 {
                    b = cand;
                    break;
                }
                t *= 0.5;
            }
            if g.iter().all(|v| v.abs() < 1e-10) {
                break;
            }
        }
        let ll = f(&b);
        if best.as_ref().is_none_or(|(_, l)| ll > *l) {
            best = Some((b, ll));
        }
    }
    best.unwrap().0
}

/// Quantile with linear interpolation at position `1 + p (n - 1)`.
pub fn interpolated(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Weighted empirical CDF `sum_i w_i 1{y_i <= t} / sum_i w_i`.
pub fn ecdf(y: &[f64], w: &[f64], t: f64) -> f64 {
    let total: f64 = w.iter().sum();
    y.iter().zip(w).filter(|(v, _)| **v <= t).map(|(_, w)| w).sum::<f64>() / total
}

/// Three-step censored quantile regression for two-coefficient designs,
/// written from the textual recipe with brute-force quantile regression.
pub fn cqr_recipe(
    x: &[Vec<f64>],
    y: &[f64],
    censored: &[bool],
    u: f64,
    firstc: f64,
    secondc: f64,
    right: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n = y.len();
    let ones = vec![1.0; n];
    // step 1: censoring probabilities from a logit on every covariate
    let gamma = logit_multistart(x, censored, &ones, 3, rng);
    let p: Vec<f64> = x.iter().map(|r| sigmoid(r[0] * gamma[0] + r[1] * gamma[1])).collect();
    let limit = if right { 1.0 - u } else { u };
    let usable: Vec<usize> = (0..n).filter(|&i| p[i] < limit).collect();
    let cut = interpolated(&usable.iter().map(|&i| p[i]).collect::<Vec<_>>(), 1.0 - firstc);
    let sample: Vec<usize> = usable.into_iter().filter(|&i| p[i] <= cut).collect();
    let fit = |rows: &[usize]| {
        let xs: Vec<Vec<f64>> = rows.iter().map(|&i| x[i].clone()).collect();
        let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
        qr_enumeration(&xs, &ys, &vec![1.0; rows.len()], u).0
    };
    let beta = fit(&sample);
    // step 2: predicted quantile on the uncensored side of the censoring
    // point, dropping the observations closest to it
    let censored_y = (0..n).filter(|&i| censored[i]).map(|i| y[i]);
    let c = if right {
        censored_y.fold(f64::INFINITY, f64::min)
    } else {
        censored_y.fold(f64::NEG_INFINITY, f64::max)
    };
    let margin: Vec<f64> = x
        .iter()
        .map(|r| {
            let q = r[0] * beta[0] + r[1] * beta[1];
            if right {
                c - q
            } else {
                q - c
            }
        })
        .collect();
    let side: Vec<usize> = (0..n).filter(|&i| margin[i] > 0.0).collect();
    let floor = interpolated(&side.iter().map(|&i| margin[i]).collect::<Vec<_>>(), secondc);
    let kept: Vec<usize> = side.into_iter().filter(|&i| margin[i] >= floor).collect();
    // step 3
    fit(&kept)
}
