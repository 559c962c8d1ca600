use super::{wls_fit, Coefficients};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Smallest squared residual admitted before taking logs.
pub const SQUARED_RESIDUAL_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct LogVarianceFit<T> {
    pub gamma: Coefficients<T>,
    /// Rows whose squared residual was raised to the floor.
    pub floored: Vec<usize>,
}

/// Regresses `log(r_i^2)` on the scale design by weighted least squares.
pub fn logvar_fit<T: Real>(x2: &Matrix<T>, residuals: &[T], w: &[T]) -> Result<LogVarianceFit<T>> {
    if residuals.len() != x2.nrows() {
        return Err(Error::invalid("scale design and residuals differ in length"));
    }
    let floor = SQUARED_RESIDUAL_FLOOR;
    let mut floored = Vec::new();
    let response: Vec<T> = residuals
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let sq = r.as_f64() * r.as_f64();
            if sq < floor {
                floored.push(i);
            }
            T::lit(sq.max(floor).ln())
        })
        .collect();
    Ok(LogVarianceFit {
        gamma: wls_fit(x2, &response, w)?,
        floored,
    })
}
