//! Linear quantile regression by an exterior-point simplex on the check
//! function.
//!
//! Every iterate is a basic solution: `d` observations with zero residual
//! whose design rows form a nonsingular matrix `X_h`. At each vertex the
//! `2d` edge directions (release basis row `k` upwards or downwards) are
//! priced by their one-sided directional derivative. The steepest descending
//! edge is followed with an exact line search; the objective along an edge
//! is convex piecewise linear, so the minimizer is the breakpoint where the
//! slope turns nonnegative, and that observation enters the basis. When no
//! edge descends the vertex satisfies the linear-programming optimality
//! conditions.

use super::{check_shapes, Coefficients};
use crate::error::{Error, Result};
use crate::linalg::{dot, least_squares, Lu, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct QuantileFit<T> {
    pub beta: Coefficients<T>,
    /// `sum_i w_i rho_u(y_i - x_i'beta)` at the solution.
    pub objective: T,
    /// Row indices of the interpolated observations defining the vertex.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

/// Check function `rho_u(r) = r (u - 1{r <= 0})`.
#[inline]
pub fn check_loss<T: Real>(r: T, u: T) -> T {
    if r > T::zero() {
        u * r
    } else {
        (u - T::one()) * r
    }
}

/// Reusable solver over one data set; solves for any `u`, optionally warm
/// started from the basis of a neighbouring quantile.
pub struct QuantileSolver<'a, T> {
    x: &'a Matrix<T>,
    y: &'a [T],
    w: &'a [T],
    active: Vec<usize>,
    start: Vec<T>,
}

impl<'a, T: Real> QuantileSolver<'a, T> {
    pub fn new(x: &'a Matrix<T>, y: &'a [T], w: &'a [T]) -> Result<Self> {
        check_shapes(x.nrows(), x.ncols(), y.len(), w)?;
        let active: Vec<usize> = (0..x.nrows()).filter(|&i| w[i] > T::zero()).collect();
        // Least squares doubles as the rank check and supplies the cold start.
        let ls = least_squares(&x.select_rows(&active), &active.iter().map(|&i| y[i]).collect::<Vec<_>>())?;
        Ok(Self {
            x,
            y,
            w,
            active,
            start: ls.solution,
        })
    }

    fn cold_basis(&self) -> Result<Vec<usize>> {
        let d = self.x.ncols();
        let mut order: Vec<(T, usize)> = self
            .active
            .iter()
            .map(|&i| ((self.y[i] - dot(self.x.row(i), &self.start)).abs(), i))
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("NaN residual").then(a.1.cmp(&b.1)));
        // Greedy Gram-Schmidt: take the closest rows that add a new direction.
        let mut basis = Vec::with_capacity(d);
        let mut ortho: Vec<Vec<T>> = Vec::with_capacity(d);
        let tol = T::lit(1e-8);
        for (_, i) in order {
            let row = self.x.row(i);
            let norm = dot(row, row).sqrt();
            if norm == T::zero() {
                continue;
            }
            let mut v: Vec<T> = row.iter().map(|&a| a / norm).collect();
            for q in &ortho {
                let p = dot(&v, q);
                v.iter_mut().zip(q).for_each(|(a, &b)| *a -= p * b);
            }
            let rest = dot(&v, &v).sqrt();
            if rest > tol {
                v.iter_mut().for_each(|a| *a /= rest);
                ortho.push(v);
                basis.push(i);
                if basis.len() == d {
                    return Ok(basis);
                }
            }
        }
        Err(Error::SingularDesign {
            rcond: 0.0,
            tolerance: crate::linalg::SINGULAR_RCOND,
        })
    }

    fn basis_matrix(&self, basis: &[usize]) -> Matrix<T> {
        self.x.select_rows(basis)
    }

    pub fn solve(&self, u: T, warm: Option<&[usize]>) -> Result<QuantileFit<T>> {
        if !(u > T::zero() && u < T::one()) {
            return Err(Error::invalid(format!("quantile index {u} outside (0, 1)")));
        }
        let d = self.x.ncols();
        let mut basis = match warm {
            Some(b)
                if b.len() == d
                    && b.iter().all(|&i| i < self.x.nrows() && self.w[i] > T::zero())
                    && Lu::new(&self.basis_matrix(b)).is_some() =>
            {
                b.to_vec()
            }
            _ => self.cold_basis()?,
        };

        let n = self.active.len();
        let max_iter = 50 * (n + d) + 100;
        let zero_tol = T::epsilon() * T::lit(64.0);
        let mut resid = vec![T::zero(); self.x.nrows()];
        let mut a_col = vec![T::zero(); self.x.nrows()];
        let mut breakpoints: Vec<(T, usize)> = Vec::with_capacity(n);

        for iteration in 0..max_iter {
            let lu = Lu::new(&self.basis_matrix(&basis)).ok_or_else(|| Error::NonConvergence {
                solver: "quantile regression",
                iterations: iteration,
                detail: "basis became singular".into(),
            })?;
            let yb: Vec<T> = basis.iter().map(|&i| self.y[i]).collect();
            let beta = lu.solve(&yb);
            let binv = lu.inverse();

            // residual classification; basis rows interpolate exactly
            for &i in &self.active {
                let fit = dot(self.x.row(i), &beta);
                let r = self.y[i] - fit;
                let scale = self.y[i].abs() + self.x.row(i).iter().zip(&beta).map(|(&a, &b)| (a * b).abs()).sum::<T>();
                resid[i] = if r.abs() <= zero_tol * scale { T::zero() } else { r };
            }
            for &i in &basis {
                resid[i] = T::zero();
            }

            // price the 2d edges
            let mut best: Option<(T, T, usize, bool)> = None; // (normalized, raw, k, upward)
            for k in 0..d {
                let col: Vec<T> = (0..d).map(|r| binv[(r, k)]).collect();
                let (mut g_up, mut g_down, mut mass) = (T::zero(), T::zero(), T::zero());
                for &i in &self.active {
                    let a = dot(self.x.row(i), &col);
                    if a == T::zero() {
                        continue;
                    }
                    let wi = self.w[i];
                    let r = resid[i];
                    mass += wi * a.abs();
                    if r > T::zero() {
                        g_up -= wi * a * u;
                        g_down += wi * a * u;
                    } else if r < T::zero() {
                        g_up -= wi * a * (u - T::one());
                        g_down += wi * a * (u - T::one());
                    } else if a > T::zero() {
                        g_up += wi * a * (T::one() - u);
                        g_down += wi * a * u;
                    } else {
                        g_up -= wi * a * u;
                        g_down -= wi * a * (T::one() - u);
                    }
                }
                if mass == T::zero() {
                    continue;
                }
                for (g, upward) in [(g_up, true), (g_down, false)] {
                    let normalized = g / mass;
                    if best.is_none_or(|b| normalized < b.0) {
                        best = Some((normalized, g, k, upward));
                    }
                }
            }

            let (normalized, slope0, k, upward) = match best {
                Some(b) => b,
                None => break,
            };
            if normalized >= -(T::epsilon() * T::lit(1e3)) {
                let objective = self
                    .active
                    .iter()
                    .map(|&i| self.w[i] * check_loss(self.y[i] - dot(self.x.row(i), &beta), u))
                    .sum();
                return Ok(QuantileFit {
                    beta: Coefficients::new(beta)?,
                    objective,
                    basis,
                    iterations: iteration,
                });
            }

            // exact line search along the chosen edge
            let sign = if upward { T::one() } else { -T::one() };
            let col: Vec<T> = (0..d).map(|r| binv[(r, k)] * sign).collect();
            breakpoints.clear();
            for &i in &self.active {
                let a = dot(self.x.row(i), &col);
                a_col[i] = a;
                let r = resid[i];
                if a != T::zero() && r != T::zero() {
                    let t = r / a;
                    if t > T::zero() {
                        breakpoints.push((t, i));
                    }
                }
            }
            breakpoints.sort_by(|p, q| p.0.partial_cmp(&q.0).expect("NaN breakpoint").then(p.1.cmp(&q.1)));
            let mut slope = slope0;
            let mut entering = None;
            for &(_, i) in &breakpoints {
                slope += self.w[i] * a_col[i].abs();
                if slope >= T::zero() {
                    entering = Some(i);
                    break;
                }
            }
            match entering {
                Some(i) => basis[k] = i,
                None => {
                    return Err(Error::NonConvergence {
                        solver: "quantile regression",
                        iterations: iteration,
                        detail: "objective unbounded along an edge".into(),
                    })
                }
            }
        }
        Err(Error::NonConvergence {
            solver: "quantile regression",
            iterations: max_iter,
            detail: format!("iteration cap reached at u = {u}"),
        })
    }
}

/// Weighted linear quantile regression at index `u`.
pub fn qr_fit<T: Real>(x: &Matrix<T>, y: &[T], w: &[T], u: T) -> Result<QuantileFit<T>> {
    QuantileSolver::new(x, y, w)?.solve(u, None)
}
