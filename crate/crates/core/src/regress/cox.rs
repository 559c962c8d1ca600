use super::Coefficients;
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::scalar::Real;

/// Proportional-hazards fit in the transformation-model parameterization
/// `F(y|x) = 1 - exp(-exp(t(y) - x'beta))` with `t(y) = log H0(y)`.
///
/// `beta` is therefore the *negated* Cox hazard coefficient. The baseline is
/// the Breslow cumulative hazard at `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxFit<T> {
    pub beta: Coefficients<T>,
    /// Distinct event times, ascending.
    pub event_times: Vec<T>,
    /// Cumulative baseline hazard right after each event time.
    pub cumulative_hazard: Vec<T>,
    /// Covariate columns that are constant in the sample; their coefficient
    /// is fixed at 0.
    pub constant_columns: Vec<usize>,
    pub iterations: usize,
}

impl<T: Real> CoxFit<T> {
    /// Breslow baseline `H0(y)`; 0 before the first event time.
    pub fn baseline(&self, y: T) -> T {
        let k = self.event_times.partition_point(|&t| t <= y);
        if k == 0 {
            T::zero()
        } else {
            self.cumulative_hazard[k - 1]
        }
    }

    /// `t(y) = log H0(y)`; `-inf` before the first event.
    pub fn transformation(&self, y: T) -> T {
        self.baseline(y).ln()
    }

    /// `1 - exp(-H0(y) exp(-x'beta))` for a covariate row without intercept.
    pub fn distribution(&self, y: T, x: &[T]) -> T {
        let h = self.baseline(y);
        if h == T::zero() {
            return T::zero();
        }
        let index: T = x.iter().zip(self.beta.iter()).map(|(&a, &b)| a * b).sum();
        let e = (h.ln() - index).exp();
        -(-e).exp_m1()
    }
}

struct RiskSets {
    /// Distinct times ascending, with the rows observed at each.
    times: Vec<f64>,
    groups: Vec<Vec<usize>>,
}

fn risk_sets(y: &[f64], rows: &[usize]) -> RiskSets {
    let mut order = rows.to_vec();
    order.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).expect("NaN duration"));
    let mut times = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        if times.last() == Some(&y[i]) {
            groups.last_mut().expect("group exists").push(i);
        } else {
            times.push(y[i]);
            groups.push(vec![i]);
        }
    }
    RiskSets { times, groups }
}

/// Breslow partial log-likelihood, score and information at `b` over
/// centered covariates `z` (rows indexed like the data).
fn partial_likelihood(
    b: &[f64],
    z: &[Vec<f64>],
    w: &[f64],
    sets: &RiskSets,
) -> (f64, Vec<f64>, Matrix<f64>) {
    let p = b.len();
    let eta: Vec<f64> = z.iter().map(|r| r.iter().zip(b).map(|(a, c)| a * c).sum()).collect();
    let shift = sets
        .groups
        .iter()
        .flatten()
        .fold(f64::NEG_INFINITY, |m, &i| m.max(eta[i]));
    let mut ll = 0.0;
    let mut grad = vec![0.0; p];
    let mut info = Matrix::zeros(p, p);
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = Matrix::<f64>::zeros(p, p);
    // sweep from the latest time so the risk set only grows
    for group in sets.groups.iter().rev() {
        for &i in group {
            let r = w[i] * (eta[i] - shift).exp();
            s0 += r;
            for a in 0..p {
                s1[a] += r * z[i][a];
                for c in 0..p {
                    s2[(a, c)] += r * z[i][a] * z[i][c];
                }
            }
        }
        let d: f64 = group.iter().map(|&i| w[i]).sum();
        if d == 0.0 {
            continue;
        }
        ll += group.iter().map(|&i| w[i] * eta[i]).sum::<f64>() - d * (s0.ln() + shift);
        for a in 0..p {
            let xa: f64 = group.iter().map(|&i| w[i] * z[i][a]).sum();
            grad[a] += xa - d * s1[a] / s0;
            for c in 0..p {
                info[(a, c)] += d * (s2[(a, c)] / s0 - s1[a] * s1[c] / (s0 * s0));
            }
        }
    }
    (ll, grad, info)
}

/// Cox proportional hazards with Breslow ties and the Breslow baseline.
///
/// `x` carries covariates without the intercept; every observation is an
/// event. Constant columns are not identified: their coefficient is 0 and
/// they are listed in [`CoxFit::constant_columns`].
pub fn cox_fit<T: Real>(x: &Matrix<T>, y: &[T], w: &[T]) -> Result<CoxFit<T>> {
    let n = x.nrows();
    if y.len() != n || w.len() != n {
        return Err(Error::invalid("cox: design, durations and weights differ in length"));
    }
    if y.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::invalid("cox requires nonnegative outcomes"));
    }
    if w.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let rows: Vec<usize> = (0..n).filter(|&i| w[i] > T::zero()).collect();
    if rows.is_empty() {
        return Err(Error::invalid("cox: no observation with positive weight"));
    }
    let yf: Vec<f64> = y.iter().map(|v| v.as_f64()).collect();
    let wf: Vec<f64> = w.iter().map(|v| v.as_f64()).collect();
    let total_w: f64 = rows.iter().map(|&i| wf[i]).sum();

    let mut constant_columns = Vec::new();
    let mut active = Vec::new();
    for j in 0..x.ncols() {
        let first = x[(rows[0], j)];
        if rows.iter().all(|&i| x[(i, j)] == first) {
            constant_columns.push(j);
        } else {
            active.push(j);
        }
    }
    let means: Vec<f64> = active
        .iter()
        .map(|&j| rows.iter().map(|&i| wf[i] * x[(i, j)].as_f64()).sum::<f64>() / total_w)
        .collect();
    let z: Vec<Vec<f64>> = (0..n)
        .map(|i| active.iter().zip(&means).map(|(&j, m)| x[(i, j)].as_f64() - m).collect())
        .collect();
    let sets = risk_sets(&yf, &rows);

    let p = active.len();
    let mut b = vec![0.0; p];
    let mut iterations = 0;
    if p > 0 {
        let (mut ll, mut grad, mut info) = partial_likelihood(&b, &z, &wf, &sets);
        let tol = 1e-10 * total_w;
        let mut converged = false;
        let mut polished = 0;
        for it in 0..100 {
            iterations = it;
            let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            if gmax <= tol {
                polished += 1;
                if polished > 2 || gmax == 0.0 {
                    converged = true;
                    break;
                }
            }
            let lu = Lu::new(&info).ok_or(Error::SingularDesign {
                rcond: 0.0,
                tolerance: crate::linalg::SINGULAR_RCOND,
            })?;
            let step = lu.solve(&grad);
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..50 {
                let cand: Vec<f64> = b.iter().zip(&step).map(|(a, s)| a + t * s).collect();
                let (cll, cgrad, cinfo) = partial_likelihood(&cand, &z, &wf, &sets);
                if cll.is_finite() && cll >= ll - 1e-12 * ll.abs().max(1.0) {
                    b = cand;
                    ll = cll;
                    grad = cgrad;
                    info = cinfo;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                converged = gmax <= tol * 1e2;
                break;
            }
            if b.iter().any(|v| v.abs() > 1e3) {
                break;
            }
        }
        if !converged {
            return Err(Error::NonConvergence {
                solver: "cox partial likelihood",
                iterations,
                detail: "coefficients diverge (monotone likelihood) or the line search stalled".into(),
            });
        }
    }

    // Breslow baseline at the centered origin, then moved to x = 0.
    let eta: Vec<f64> = z.iter().map(|r| r.iter().zip(&b).map(|(a, c)| a * c).sum()).collect();
    let mut s0_at = vec![0.0; sets.times.len()];
    let mut s0 = 0.0;
    for (k, group) in sets.groups.iter().enumerate().rev() {
        s0 += group.iter().map(|&i| wf[i] * eta[i].exp()).sum::<f64>();
        s0_at[k] = s0;
    }
    let offset = (-means.iter().zip(&b).map(|(m, c)| m * c).sum::<f64>()).exp();
    let mut cumulative = 0.0;
    let mut hazard = Vec::with_capacity(sets.times.len());
    for (group, s) in sets.groups.iter().zip(&s0_at) {
        let d: f64 = group.iter().map(|&i| wf[i]).sum();
        cumulative += d / s;
        hazard.push(T::lit(cumulative * offset));
    }

    let mut beta = vec![T::zero(); x.ncols()];
    for (&j, v) in active.iter().zip(&b) {
        beta[j] = T::lit(-v);
    }
    Ok(CoxFit {
        beta: Coefficients::new(beta)?,
        event_times: sets.times.into_iter().map(T::lit).collect(),
        cumulative_hazard: hazard,
        constant_columns,
        iterations,
    })
}
