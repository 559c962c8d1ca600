use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::stats::{interpolated_quantile, normal_quantile, sample_sd, sort_floats, NORMAL_IQR};

/// Lower bound applied to a bootstrap standard error.
pub const SIGMA_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Dispersion<T> {
    pub sigma: Vec<T>,
    /// `sigma` was raised to [`SIGMA_FLOOR`] at this index.
    pub floored: Vec<bool>,
}

/// Per-column bootstrap standard error of a `reps x taus` draw matrix:
/// the sample standard deviation, or the interquartile range divided by
/// its normal counterpart when `robust`.
pub fn standard_errors<T: Real>(draws: &Matrix<T>, robust: bool) -> Result<Dispersion<T>> {
    if draws.nrows() < 2 {
        return Err(Error::invalid("standard errors need at least 2 replications"));
    }
    let floor = T::lit(SIGMA_FLOOR);
    let mut sigma = Vec::with_capacity(draws.ncols());
    let mut floored = Vec::with_capacity(draws.ncols());
    for j in 0..draws.ncols() {
        let mut col = draws.column(j);
        let s = if robust {
            sort_floats(&mut col);
            (interpolated_quantile(&col, T::lit(0.75)) - interpolated_quantile(&col, T::lit(0.25)))
                / T::lit(NORMAL_IQR)
        } else {
            sample_sd(&col)
        };
        let low = !(s >= floor);
        floored.push(low);
        sigma.push(if low { floor } else { s });
    }
    Ok(Dispersion { sigma, floored })
}

/// Indices of the quantile indexes inside `[first, last]`.
pub fn inference_range<T: Real>(taus: &[T], first: T, last: T) -> Result<Vec<usize>> {
    if !(first > T::zero() && first < last && last < T::one()) {
        return Err(Error::invalid(format!("need 0 < first < last < 1, got [{first}, {last}]")));
    }
    let slack = T::epsilon() * T::lit(16.0);
    let idx: Vec<usize> = (0..taus.len())
        .filter(|&k| taus[k] >= first - slack && taus[k] <= last + slack)
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyRange {
            first: first.as_f64(),
            last: last.as_f64(),
        });
    }
    Ok(idx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bands<T> {
    /// `z_{1 - alpha/2}`.
    pub pointwise_critical: T,
    /// Bootstrap `(1 - alpha)` quantile of the maximal t-statistic.
    pub uniform_critical: T,
    pub pointwise: Vec<(T, T)>,
    pub uniform: Vec<(T, T)>,
}

/// `max_{k in range} |draw_k - delta_k| / sigma_k` for every replication.
pub fn max_t_statistics<T: Real>(delta: &[T], sigma: &[T], draws: &Matrix<T>, range: &[usize]) -> Vec<T> {
    (0..draws.nrows())
        .map(|r| {
            let row = draws.row(r);
            range
                .iter()
                .map(|&k| (row[k] - delta[k]).abs() / sigma[k])
                .fold(T::zero(), T::max)
        })
        .collect()
}

/// Pointwise and uniform bands `delta +- c * sigma` at every quantile index;
/// the uniform critical value is computed over `range` only.
pub fn uniform_band<T: Real>(
    delta: &[T],
    sigma: &[T],
    draws: &Matrix<T>,
    alpha: T,
    range: &[usize],
) -> Result<Bands<T>> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    if range.is_empty() {
        return Err(Error::invalid("empty inference range"));
    }
    let mut stats = max_t_statistics(delta, sigma, draws, range);
    sort_floats(&mut stats);
    let t = interpolated_quantile(&stats, T::one() - alpha);
    let z = T::lit(normal_quantile(1.0 - alpha.as_f64() / 2.0));
    let band = |c: T| delta.iter().zip(sigma).map(|(&d, &s)| (d - c * s, d + c * s)).collect();
    Ok(Bands {
        pointwise_critical: z,
        uniform_critical: t,
        pointwise: band(z),
        uniform: band(t),
    })
}
