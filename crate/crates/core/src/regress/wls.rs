use super::{check_shapes, Coefficients};
use crate::error::Result;
use crate::linalg::{least_squares, Matrix};
use crate::scalar::Real;

/// Weighted least squares, `argmin_b sum_i w_i (y_i - x_i'b)^2`.
///
/// Solved by Householder QR on the `sqrt(w)`-scaled system; a design whose
/// equilibrated normal matrix has reciprocal condition below
/// [`crate::linalg::SINGULAR_RCOND`] is rejected.
pub fn wls_fit<T: Real>(x: &Matrix<T>, y: &[T], w: &[T]) -> Result<Coefficients<T>> {
    check_shapes(x.nrows(), x.ncols(), y.len(), w)?;
    let keep: Vec<usize> = (0..x.nrows()).filter(|&i| w[i] > T::zero()).collect();
    let mut a = x.select_rows(&keep);
    let mut b = Vec::with_capacity(keep.len());
    for (r, &i) in keep.iter().enumerate() {
        let s = w[i].sqrt();
        a.row_mut(r).iter_mut().for_each(|v| *v *= s);
        b.push(y[i] * s);
    }
    Coefficients::new(least_squares(&a, &b)?.solution)
}
