//! Estimation cores behind the conditional distribution models.

mod binary;
mod cox;
mod cqr;
mod logvar;
mod quantile;
mod wls;

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use binary::{binary_mle, BinaryFit, Link};
pub use cox::{cox_fit, CoxFit};
pub use cqr::{censoring_probabilities, cqr_fit, cqr_fit_with_probabilities, CensoringOptions};
pub use logvar::{logvar_fit, LogVarianceFit};
pub use quantile::{qr_fit, QuantileFit, QuantileSolver};
pub use wls::wls_fit;

/// A fitted coefficient vector; every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients<T>(Vec<T>);

impl<T: Real> Coefficients<T> {
    pub fn new(beta: Vec<T>) -> Result<Self> {
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonConvergence {
                solver: "coefficients",
                iterations: 0,
                detail: "non-finite coefficient".into(),
            });
        }
        Ok(Self(beta))
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for Coefficients<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

fn check_shapes<T: Real>(rows: usize, cols: usize, y_len: usize, w: &[T]) -> Result<()> {
    if y_len != rows || w.len() != rows {
        return Err(Error::invalid(format!(
            "design has {rows} rows but response has {y_len} and weights {}",
            w.len()
        )));
    }
    if cols == 0 {
        return Err(Error::invalid("design has no columns"));
    }
    if w.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let positive = w.iter().filter(|v| **v > T::zero()).count();
    if positive < cols {
        return Err(Error::invalid(format!(
            "{positive} observations with positive weight for {cols} coefficients"
        )));
    }
    Ok(())
}
