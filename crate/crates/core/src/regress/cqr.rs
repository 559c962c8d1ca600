use super::{binary_mle, qr_fit, BinaryFit, Coefficients, Link};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;
use crate::stats::quantile_of;

/// Tuning of the three-step censored quantile regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensoringOptions {
    /// `true`: the indicator marks right-censored outcomes; `false`: left.
    pub right: bool,
    /// Total number of steps, at least 3.
    pub nsteps: usize,
    /// Fraction of usable observations with the highest censoring
    /// probabilities dropped in step 1.
    pub firstc: f64,
    /// Fraction of step-2 survivors closest to the censoring point dropped.
    pub secondc: f64,
}

impl Default for CensoringOptions {
    fn default() -> Self {
        Self {
            right: false,
            nsteps: 3,
            firstc: 0.1,
            secondc: 0.05,
        }
    }
}

impl CensoringOptions {
    fn validate(&self) -> Result<()> {
        if self.nsteps < 3 {
            return Err(Error::invalid("nsteps must be at least 3"));
        }
        for (name, v) in [("firstc", self.firstc), ("secondc", self.secondc)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Step-1 logit of the censoring indicator on the full design. Returns the
/// fitted censoring probability of every row.
pub fn censoring_probabilities<T: Real>(x: &Matrix<T>, censored: &[bool], w: &[T]) -> Result<Vec<T>> {
    let fit = binary_mle(x, censored, w, Link::Logit)?;
    Ok(match fit {
        BinaryFit::AllZero => vec![T::zero(); x.nrows()],
        BinaryFit::AllOne => vec![T::one(); x.nrows()],
        fitted => x.rows().map(|r| fitted.probability(Link::Logit, r)).collect(),
    })
}

fn masked<T: Real>(w: &[T], keep: &[bool]) -> Vec<T> {
    w.iter().zip(keep).map(|(&v, &k)| if k { v } else { T::zero() }).collect()
}

fn enough(keep: &[bool], w: &[f64], d: usize) -> bool {
    keep.iter().zip(w).filter(|(k, v)| **k && **v > 0.0).count() >= d
}

/// Censored quantile regression at index `u` given precomputed censoring
/// probabilities, so a u-grid shares one step-1 logit.
#[allow(clippy::too_many_arguments)]
pub fn cqr_fit_with_probabilities<T: Real>(
    x: &Matrix<T>,
    y: &[T],
    w: &[T],
    u: T,
    censored: &[bool],
    probabilities: &[T],
    opts: &CensoringOptions,
) -> Result<Coefficients<T>> {
    opts.validate()?;
    let n = x.nrows();
    if censored.len() != n || probabilities.len() != n || y.len() != n || w.len() != n {
        return Err(Error::invalid("cqr: inputs differ in length"));
    }
    let d = x.ncols();
    let wf: Vec<f64> = w.iter().map(|v| v.as_f64()).collect();
    let uf = u.as_f64();
    let empty = |step: u8| Error::EmptySelection { step, u: uf };

    // step 1: usable at u, then drop the highest censoring probabilities
    let bound = if opts.right { 1.0 - uf } else { uf };
    let usable: Vec<bool> = (0..n)
        .map(|i| wf[i] > 0.0 && probabilities[i].as_f64() < bound)
        .collect();
    if !enough(&usable, &wf, d) {
        return Err(empty(1));
    }
    let p_usable: Vec<T> = (0..n).filter(|&i| usable[i]).map(|i| probabilities[i]).collect();
    let cut = quantile_of(&p_usable, T::lit(1.0 - opts.firstc));
    let step1: Vec<bool> = (0..n).map(|i| usable[i] && probabilities[i] <= cut).collect();
    if !enough(&step1, &wf, d) {
        return Err(empty(1));
    }
    let mut beta = qr_fit(x, y, &masked(w, &step1), u)?.beta;

    // fixed censoring point: the most extreme censored outcome
    let censor_point = (0..n)
        .filter(|&i| censored[i] && wf[i] > 0.0)
        .map(|i| y[i])
        .reduce(|a, b| if opts.right { a.min(b) } else { a.max(b) });

    for _ in 2..opts.nsteps {
        let keep = match censor_point {
            None => (0..n).map(|i| wf[i] > 0.0).collect::<Vec<_>>(),
            Some(c) => {
                let margin: Vec<T> = (0..n)
                    .map(|i| {
                        let q = dot(x.row(i), &beta);
                        if opts.right {
                            c - q
                        } else {
                            q - c
                        }
                    })
                    .collect();
                let uncensored_side: Vec<bool> = (0..n).map(|i| wf[i] > 0.0 && margin[i] > T::zero()).collect();
                if !enough(&uncensored_side, &wf, d) {
                    return Err(empty(2));
                }
                let kept: Vec<T> = (0..n).filter(|&i| uncensored_side[i]).map(|i| margin[i]).collect();
                let floor = quantile_of(&kept, T::lit(opts.secondc));
                (0..n).map(|i| uncensored_side[i] && margin[i] >= floor).collect()
            }
        };
        if !enough(&keep, &wf, d) {
            return Err(empty(2));
        }
        beta = qr_fit(x, y, &masked(w, &keep), u)?.beta;
    }
    Ok(beta)
}

/// Three-step censored quantile regression at index `u`.
pub fn cqr_fit<T: Real>(
    x: &Matrix<T>,
    y: &[T],
    w: &[T],
    u: T,
    censored: &[bool],
    opts: &CensoringOptions,
) -> Result<Coefficients<T>> {
    let probs = censoring_probabilities(x, censored, w)?;
    cqr_fit_with_probabilities(x, y, w, u, censored, &probs, opts)
}
