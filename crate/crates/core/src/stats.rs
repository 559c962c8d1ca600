//! Distribution functions and order-statistic helpers.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::scalar::Real;

/// `z_{0.75} - z_{0.25}` for the standard normal.
pub const NORMAL_IQR: f64 = 1.348_979_500_392_163_5;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Empirical quantile by linear interpolation of the order statistics at
/// the 1-based position `1 + p (n - 1)`. `sorted` must be ascending.
pub fn interpolated_quantile<T: Real>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    if n == 1 {
        return sorted[0];
    }
    let h = p * T::lit((n - 1) as f64);
    let lo = h.floor();
    let lo_idx = lo.to_usize().unwrap_or(0).min(n - 1);
    let hi_idx = (lo_idx + 1).min(n - 1);
    let frac = h - lo;
    sorted[lo_idx] + frac * (sorted[hi_idx] - sorted[lo_idx])
}

/// Sorts a copy of `values` (NaN-free) and returns the interpolated quantile.
pub fn quantile_of<T: Real>(values: &[T], p: T) -> T {
    let mut v = values.to_vec();
    sort_floats(&mut v);
    interpolated_quantile(&v, p)
}

pub fn sort_floats<T: Real>(v: &mut [T]) {
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sort"));
}

/// Sample standard deviation with `n - 1` denominator.
pub fn sample_sd<T: Real>(values: &[T]) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let nf = T::lit(n as f64);
    let mean = values.iter().copied().sum::<T>() / nf;
    let ss: T = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (ss / (nf - T::one())).sqrt()
}
