use super::{check_shapes, Coefficients};
use crate::error::{Error, Result};
use crate::linalg::{dot, Lu, Matrix};
use crate::scalar::Real;
use crate::stats::{normal_cdf, normal_pdf};

/// Index bound for results flagged as separated.
pub const INDEX_CAP: f64 = 30.0;

/// Largest index change allowed in a single Newton step.
const MAX_INDEX_STEP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Logit,
    Probit,
}

impl Link {
    /// `Lambda(eta)`.
    pub fn cdf(self, eta: f64) -> f64 {
        match self {
            Link::Logit => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            Link::Probit => normal_cdf(eta),
        }
    }

    /// `log Lambda(eta)`, stable in both tails.
    fn log_cdf(self, eta: f64) -> f64 {
        match self {
            Link::Logit => -softplus(-eta),
            Link::Probit if eta < PROBIT_TAIL => {
                // Phi(x) = phi(x)/|x| * (1 - 1/x^2 + 3/x^4 - ...)
                let x2 = eta * eta;
                -0.5 * x2 - 0.5 * (2.0 * std::f64::consts::PI).ln() - (-eta).ln() + tail_series(x2).ln()
            }
            Link::Probit => normal_cdf(eta).ln(),
        }
    }

    /// Score weight `d/d eta log-likelihood = (z - p) * k(eta)` and the
    /// Newton / Fisher weight.
    fn score_and_weight(self, eta: f64, z: bool) -> (f64, f64) {
        match self {
            Link::Logit => {
                let p = self.cdf(eta);
                let zf = if z { 1.0 } else { 0.0 };
                (zf - p, p * (1.0 - p))
            }
            Link::Probit => {
                // d/d eta log Phi(eta) = phi/Phi ; d/d eta log Phi(-eta) = -phi/Phi(-eta)
                let up = mills(eta);
                let down = mills(-eta);
                let s = if z { up } else { -down };
                (s, up * down)
            }
        }
    }
}

/// Below this index the probit tail is evaluated by its asymptotic series.
const PROBIT_TAIL: f64 = -30.0;

fn tail_series(x2: f64) -> f64 {
    1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2)
}

/// `phi(x) / Phi(x)`, finite for any `x`.
fn mills(x: f64) -> f64 {
    if x < PROBIT_TAIL {
        -x / tail_series(x * x)
    } else {
        normal_pdf(x) / normal_cdf(x)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Outcome of a binary-response maximum likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub enum BinaryFit<T> {
    Fitted {
        beta: Coefficients<T>,
        /// No finite maximizer: the coefficients are the Newton iterate at
        /// which the score fell below tolerance, and fitted indexes are
        /// clamped to `|x'b| <= 30`.
        separated: bool,
        iterations: usize,
    },
    /// Every positively weighted response is 0.
    AllZero,
    /// Every positively weighted response is 1.
    AllOne,
}

impl<T: Real> BinaryFit<T> {
    pub fn beta(&self) -> Option<&Coefficients<T>> {
        match self {
            BinaryFit::Fitted { beta, .. } => Some(beta),
            _ => None,
        }
    }

    /// Fitted probability at covariate row `x`. For a separated fit the
    /// index is clamped to `[-30, 30]`.
    pub fn probability(&self, link: Link, x: &[T]) -> T {
        match self {
            BinaryFit::Fitted { beta, separated, .. } => {
                let eta = dot(x, beta).as_f64();
                let eta = if *separated { eta.clamp(-INDEX_CAP, INDEX_CAP) } else { eta };
                T::lit(link.cdf(eta))
            }
            BinaryFit::AllZero => T::zero(),
            BinaryFit::AllOne => T::one(),
        }
    }
}

fn log_likelihood(link: Link, eta: &[f64], z: &[bool], w: &[f64], rows: &[usize]) -> f64 {
    rows.iter()
        .map(|&i| {
            let e = if z[i] { eta[i] } else { -eta[i] };
            w[i] * link.log_cdf(e)
        })
        .sum()
}

/// Maximizes `sum_i w_i [z_i log L(x_i'b) + (1 - z_i) log L(-x_i'b)]` by
/// Newton's method (Fisher scoring for probit) with step halving and a
/// per-step limit on the index change.
///
/// When the likelihood has no finite maximizer the iterate at which the
/// score vanishes is returned flagged as separated, and its fitted indexes
/// are clamped to `|x'b| <= 30`. A finite maximizer is returned as is, even
/// if an isolated high-leverage row has its index beyond the cap.
pub fn binary_mle<T: Real>(x: &Matrix<T>, z: &[bool], w: &[T], link: Link) -> Result<BinaryFit<T>> {
    check_shapes(x.nrows(), x.ncols(), z.len(), w)?;
    let rows: Vec<usize> = (0..x.nrows()).filter(|&i| w[i] > T::zero()).collect();
    if rows.iter().all(|&i| !z[i]) {
        return Ok(BinaryFit::AllZero);
    }
    if rows.iter().all(|&i| z[i]) {
        return Ok(BinaryFit::AllOne);
    }
    let d = x.ncols();
    let xf: Vec<Vec<f64>> = (0..x.nrows()).map(|i| x.row(i).iter().map(|v| v.as_f64()).collect()).collect();
    let wf: Vec<f64> = w.iter().map(|v| v.as_f64()).collect();
    let total_w: f64 = rows.iter().map(|&i| wf[i]).sum();
    let grad_tol = 1e-10 * total_w;

    let index = |b: &[f64]| -> Vec<f64> { xf.iter().map(|r| r.iter().zip(b).map(|(a, c)| a * c).sum()).collect() };

    let mut beta = vec![0.0; d];
    let mut eta = index(&beta);
    let mut ll = log_likelihood(link, &eta, z, &wf, &rows);
    let max_iter = 500;
    let mut polished = 0;
    for iteration in 0..max_iter {
        let mut grad = vec![0.0; d];
        let mut info = Matrix::<f64>::zeros(d, d);
        for &i in &rows {
            let (s, h) = link.score_and_weight(eta[i], z[i]);
            let r = &xf[i];
            for a in 0..d {
                grad[a] += wf[i] * s * r[a];
                let wa = wf[i] * h * r[a];
                for b in a..d {
                    info[(a, b)] += wa * r[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
            }
        }
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let small_score = gmax <= grad_tol;
        let lu = match Lu::new(&info) {
            Some(lu) => lu,
            // information underflows once every index sits deep in a tail
            None if small_score => return finish(beta, true, iteration),
            None => {
                return Err(Error::SingularDesign {
                    rcond: 0.0,
                    tolerance: crate::linalg::SINGULAR_RCOND,
                })
            }
        };
        let mut step = lu.solve(&grad);
        let dir_eta = index(&step);
        let reach = dir_eta.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        if small_score {
            if reach > 1e-6 {
                // the score vanishes while Newton still pushes the index
                // outwards: the likelihood has no finite maximizer
                return finish(beta, true, iteration);
            }
            // a couple of extra Newton steps push the score to rounding level
            polished += 1;
            if polished > 2 || gmax == 0.0 {
                return finish(beta, false, iteration);
            }
        }
        if reach > MAX_INDEX_STEP {
            let scale = MAX_INDEX_STEP / reach;
            step.iter_mut().for_each(|s| *s *= scale);
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let cand_eta = index(&cand);
            let cand_ll = log_likelihood(link, &cand_eta, z, &wf, &rows);
            if cand_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                beta = cand;
                eta = cand_eta;
                ll = cand_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            if gmax <= grad_tol * 1e2 {
                return finish(beta, false, iteration);
            }
            return Err(Error::NonConvergence {
                solver: "binary maximum likelihood",
                iterations: iteration,
                detail: format!("line search failed, score max-norm {gmax:.3e}"),
            });
        }
    }
    if eta.iter().any(|e| e.abs() > INDEX_CAP) {
        return finish(beta, true, max_iter);
    }
    Err(Error::NonConvergence {
        solver: "binary maximum likelihood",
        iterations: max_iter,
        detail: "iteration cap reached".into(),
    })
}

fn finish<T: Real>(beta: Vec<f64>, separated: bool, iterations: usize) -> Result<BinaryFit<T>> {
    Ok(BinaryFit::Fitted {
        beta: Coefficients::new(beta.into_iter().map(T::lit).collect())?,
        separated,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intercept(n: usize) -> Matrix<f64> {
        Matrix::<f64>::from_rows(&vec![vec![1.0]; n]).unwrap()
    }

    #[test]
    fn intercept_only_logit_closed_form() {
        let z = [true, false, false, false, true, false, false, false];
        let fit = binary_mle(&intercept(8), &z, &[1.0; 8], Link::Logit).unwrap();
        let b = fit.beta().unwrap()[0];
        assert!((b - (0.25f64 / 0.75).ln()).abs() < 1e-12, "{b}");
        assert!((b + 1.098_612_288_668_11).abs() < 1e-10);
    }

    #[test]
    fn intercept_only_probit_half() {
        let z = [true, false, true, false];
        let fit = binary_mle(&intercept(4), &z, &[1.0; 4], Link::Probit).unwrap();
        assert!(fit.beta().unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn degenerate_responses() {
        let x = intercept(3);
        assert_eq!(binary_mle(&x, &[false; 3], &[1.0; 3], Link::Logit).unwrap(), BinaryFit::AllZero);
        assert_eq!(binary_mle(&x, &[true; 3], &[1.0; 3], Link::Probit).unwrap(), BinaryFit::AllOne);
        // zero-weight rows do not count
        assert_eq!(
            binary_mle(&x, &[true, false, true], &[1.0, 0.0, 1.0], Link::Logit).unwrap(),
            BinaryFit::AllOne
        );
    }

    #[test]
    fn separation_is_flagged() {
        let x = Matrix::<f64>::from_rows(&[vec![1.0, -2.0], vec![1.0, -1.0], vec![1.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let z = [true, true, false, false];
        for link in [Link::Logit, Link::Probit] {
            let fit = binary_mle(&x, &z, &[1.0; 4], link).unwrap();
            assert!(matches!(fit, BinaryFit::Fitted { separated: true, .. }));
            for (r, &zi) in x.rows().zip(&z) {
                let p = fit.probability(link, r);
                assert!(p >= link.cdf(-INDEX_CAP) && p <= link.cdf(INDEX_CAP));
                // saturated towards the observed response
                assert!((p - if zi { 1.0 } else { 0.0 }).abs() < 1e-6, "{link:?} {p}");
            }
        }
    }

    #[test]
    fn probit_tails_are_finite() {
        assert!(Link::Probit.log_cdf(-30.0).is_finite());
        assert!(Link::Logit.log_cdf(-700.0).is_finite());
        for eta in [-25.0, -45.0, 45.0] {
            for z in [true, false] {
                let (s, h) = Link::Probit.score_and_weight(eta, z);
                assert!(s.is_finite() && h.is_finite(), "{eta} {z}");
            }
        }
        assert!(Link::Probit.log_cdf(-45.0).is_finite());
        // the series joins the direct evaluation at the switch point
        let x: f64 = PROBIT_TAIL;
        let series = -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln() - (-x).ln() + tail_series(x * x).ln();
        assert!((series - normal_cdf(x).ln()).abs() < 1e-8);
        assert!((mills(x - 1e-12) - mills(x + 1e-12)).abs() < 1e-6);
    }
}
