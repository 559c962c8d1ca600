//! Conditional distribution models `F(y | x)` built from the regression
//! cores.

use std::fmt;
use std::str::FromStr;

use crate::data::{make_ugrid, make_ygrid, ObservationTable, UGrid, YGrid};
use crate::error::{Error, GridAxis, Result};
use crate::linalg::dot;
use crate::regress::{
    binary_mle, censoring_probabilities, cox_fit, cqr_fit_with_probabilities, logvar_fit, wls_fit, BinaryFit,
    CensoringOptions, CoxFit, Link, QuantileSolver,
};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Qr,
    Loc,
    Locsca,
    Cqr,
    Cox,
    Logit,
    Probit,
    Lpm,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Qr,
        Method::Loc,
        Method::Locsca,
        Method::Cqr,
        Method::Cox,
        Method::Logit,
        Method::Probit,
        Method::Lpm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Qr => "qr",
            Method::Loc => "loc",
            Method::Locsca => "locsca",
            Method::Cqr => "cqr",
            Method::Cox => "cox",
            Method::Logit => "logit",
            Method::Probit => "probit",
            Method::Lpm => "lpm",
        }
    }

    /// Long name used in report headers.
    pub fn description(self) -> &'static str {
        match self {
            Method::Qr => "linear quantile regression",
            Method::Loc => "location model",
            Method::Locsca => "location-scale model",
            Method::Cqr => "censored quantile regression",
            Method::Cox => "Cox duration model",
            Method::Logit => "logit distribution regression",
            Method::Probit => "probit distribution regression",
            Method::Lpm => "linear probability model",
        }
    }

    /// Methods whose conditional distribution is only defined on the y-grid.
    pub fn is_threshold_family(self) -> bool {
        matches!(self, Method::Logit | Method::Probit | Method::Lpm)
    }

    /// Methods integrating a quantile-regression process over the u-grid.
    pub fn is_quantile_family(self) -> bool {
        matches!(self, Method::Qr | Method::Cqr)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions<T> {
    /// Tail trimming `epsilon` of the quantile-regression u-grid.
    pub trimming: T,
    /// Number of grid points (u-grid for qr/cqr, y-grid otherwise).
    pub nreg: usize,
    pub censoring: CensoringOptions,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            trimming: T::lit(0.005),
            nreg: 100,
            censoring: CensoringOptions::default(),
        }
    }
}

/// Weighted sample sorted ascending, with normalized cumulative weights.
#[derive(Debug, Clone)]
struct SortedSample<T> {
    values: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Real> SortedSample<T> {
    fn new(mut pairs: Vec<(T, T)>) -> Self {
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("NaN residual"));
        let total: T = pairs.iter().map(|p| p.1).sum();
        let mut acc = T::zero();
        let mut cumulative = Vec::with_capacity(pairs.len());
        for p in &pairs {
            acc += p.1;
            cumulative.push(acc / total);
        }
        if let Some(last) = cumulative.last_mut() {
            *last = T::one();
        }
        Self {
            values: pairs.into_iter().map(|p| p.0).collect(),
            cumulative,
        }
    }

    /// Weighted fraction of values `<= v`.
    fn cdf(&self, v: T) -> T {
        let k = self.values.partition_point(|&s| s <= v);
        if k == 0 {
            T::zero()
        } else {
            self.cumulative[k - 1]
        }
    }
}

#[derive(Debug, Clone)]
enum Model<T> {
    Quantile {
        trimming: T,
        ugrid: UGrid<T>,
        betas: Vec<Vec<T>>,
    },
    Location {
        beta: Vec<T>,
        residuals: SortedSample<T>,
    },
    LocationScale {
        beta: Vec<T>,
        gamma: Vec<T>,
        scale_columns: Vec<usize>,
        residuals: SortedSample<T>,
    },
    Cox(CoxFit<T>),
    Binary {
        link: Link,
        fits: Vec<BinaryFit<T>>,
    },
    Linear {
        betas: Vec<Vec<T>>,
    },
}

/// A fitted conditional distribution model.
#[derive(Debug, Clone)]
pub struct ConditionalDistributionFit<T> {
    method: Method,
    dx: usize,
    ygrid: Option<YGrid<T>>,
    model: Model<T>,
    separated: usize,
    floored: usize,
}

fn positive_rows<T: Real>(w: &[T]) -> Vec<usize> {
    (0..w.len()).filter(|&i| w[i] > T::zero()).collect()
}

fn at_grid<T: Real>(axis: GridAxis, value: T) -> impl FnOnce(Error) -> Error {
    move |e| Error::AtGridPoint {
        axis,
        value: value.as_f64(),
        source: Box::new(e),
    }
}

fn outcome_grid<T: Real>(table: &ObservationTable<T>, nreg: usize) -> Result<YGrid<T>> {
    let y = table.outcome();
    let observed: Vec<T> = positive_rows(table.weights()).into_iter().map(|i| y[i]).collect();
    make_ygrid(&observed, nreg)
}

/// Fits the conditional distribution of the outcome given the covariates
/// using the rows of `table` with positive weight.
pub fn fit_conditional<T: Real>(
    method: Method,
    table: &ObservationTable<T>,
    opts: &FitOptions<T>,
) -> Result<ConditionalDistributionFit<T>> {
    if table.censoring().is_some() && method != Method::Cqr {
        return Err(Error::invalid(format!("a censoring indicator is only used by cqr, not {method}")));
    }
    if table.scale_columns().is_some() && method != Method::Locsca {
        return Err(Error::invalid(format!("scale variables are only used by locsca, not {method}")));
    }
    let x = table.covariates();
    let y = table.outcome();
    let w = table.weights();
    let mut separated = 0;
    let mut floored = 0;
    let (ygrid, model) = match method {
        Method::Qr | Method::Cqr => {
            let ugrid = make_ugrid(opts.trimming, opts.nreg)?;
            let betas = if method == Method::Qr {
                let solver = QuantileSolver::new(x, y, w)?;
                let mut betas = Vec::with_capacity(ugrid.len());
                let mut basis: Option<Vec<usize>> = None;
                for &u in ugrid.values() {
                    let fit = solver.solve(u, basis.as_deref()).map_err(at_grid(GridAxis::Quantile, u))?;
                    basis = Some(fit.basis.clone());
                    betas.push(fit.beta.into_inner());
                }
                betas
            } else {
                let censored = table
                    .censoring()
                    .ok_or_else(|| Error::invalid("cqr requires a censoring indicator"))?;
                let probs = censoring_probabilities(x, censored, w)?;
                ugrid
                    .values()
                    .iter()
                    .map(|&u| {
                        cqr_fit_with_probabilities(x, y, w, u, censored, &probs, &opts.censoring)
                            .map(|b| b.into_inner())
                            .map_err(at_grid(GridAxis::Quantile, u))
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            (
                None,
                Model::Quantile {
                    trimming: opts.trimming,
                    ugrid,
                    betas,
                },
            )
        }
        Method::Loc => {
            let beta = wls_fit(x, y, w)?.into_inner();
            let residuals = SortedSample::new(
                positive_rows(w)
                    .into_iter()
                    .map(|i| (y[i] - dot(x.row(i), &beta), w[i]))
                    .collect(),
            );
            (Some(outcome_grid(table, opts.nreg)?), Model::Location { beta, residuals })
        }
        Method::Locsca => {
            let beta = wls_fit(x, y, w)?.into_inner();
            let scale_columns: Vec<usize> = match table.scale_columns() {
                Some(c) => c.to_vec(),
                None => (0..table.dx()).collect(),
            };
            let x2 = x.select_cols(&scale_columns);
            let r: Vec<T> = (0..x.nrows()).map(|i| y[i] - dot(x.row(i), &beta)).collect();
            let lv = logvar_fit(&x2, &r, w)?;
            floored = lv.floored.iter().filter(|&&i| w[i] > T::zero()).count();
            let gamma = lv.gamma.into_inner();
            let two = T::lit(2.0);
            let residuals = SortedSample::new(
                positive_rows(w)
                    .into_iter()
                    .map(|i| (r[i] / (dot(x2.row(i), &gamma) / two).exp(), w[i]))
                    .collect(),
            );
            (
                Some(outcome_grid(table, opts.nreg)?),
                Model::LocationScale {
                    beta,
                    gamma,
                    scale_columns,
                    residuals,
                },
            )
        }
        Method::Cox => {
            let cols: Vec<usize> = (1..table.dx()).collect();
            let fit = cox_fit(&x.select_cols(&cols), y, w)?;
            (Some(outcome_grid(table, opts.nreg)?), Model::Cox(fit))
        }
        Method::Logit | Method::Probit => {
            let link = if method == Method::Logit { Link::Logit } else { Link::Probit };
            let grid = outcome_grid(table, opts.nreg)?;
            let mut fits = Vec::with_capacity(grid.len());
            for &t in grid.values() {
                let z: Vec<bool> = y.iter().map(|&v| v <= t).collect();
                let fit = binary_mle(x, &z, w, link).map_err(at_grid(GridAxis::Threshold, t))?;
                if matches!(fit, BinaryFit::Fitted { separated: true, .. }) {
                    separated += 1;
                }
                fits.push(fit);
            }
            (Some(grid), Model::Binary { link, fits })
        }
        Method::Lpm => {
            let grid = outcome_grid(table, opts.nreg)?;
            let betas = grid
                .values()
                .iter()
                .map(|&t| {
                    let z: Vec<T> = y.iter().map(|&v| if v <= t { T::one() } else { T::zero() }).collect();
                    wls_fit(x, &z, w)
                        .map(|b| b.into_inner())
                        .map_err(at_grid(GridAxis::Threshold, t))
                })
                .collect::<Result<Vec<_>>>()?;
            (Some(grid), Model::Linear { betas })
        }
    };
    Ok(ConditionalDistributionFit {
        method,
        dx: table.dx(),
        ygrid,
        model,
        separated,
        floored,
    })
}

impl<T: Real> ConditionalDistributionFit<T> {
    pub fn method(&self) -> Method {
        self.method
    }

    /// Number of covariate columns (intercept included) the fit expects.
    pub fn dx(&self) -> usize {
        self.dx
    }

    /// Outcome thresholds; `None` for the quantile-regression families.
    pub fn ygrid(&self) -> Option<&YGrid<T>> {
        self.ygrid.as_ref()
    }

    /// Trimming `epsilon` for the quantile-regression families.
    pub fn trimming(&self) -> Option<T> {
        match &self.model {
            Model::Quantile { trimming, .. } => Some(*trimming),
            _ => None,
        }
    }

    /// u-grid and coefficient family of the quantile-regression families.
    pub fn quantile_process(&self) -> Option<(&UGrid<T>, &[Vec<T>])> {
        match &self.model {
            Model::Quantile { ugrid, betas, .. } => Some((ugrid, betas)),
            _ => None,
        }
    }

    /// Number of regressions estimated to build the model.
    pub fn regressions(&self) -> usize {
        match &self.model {
            Model::Quantile { betas, .. } => betas.len(),
            Model::Location { .. } | Model::Cox(_) => 1,
            Model::LocationScale { .. } => 2,
            Model::Binary { fits, .. } => fits.len(),
            Model::Linear { betas } => betas.len(),
        }
    }

    /// Grid points at which a binary fit was flagged as separated.
    pub fn separated_fits(&self) -> usize {
        self.separated
    }

    /// Observations whose zero residual was floored in the scale fit.
    pub fn floored_residuals(&self) -> usize {
        self.floored
    }

    fn grid_index(&self, y: T) -> Result<usize> {
        self.ygrid
            .as_ref()
            .and_then(|g| g.position(y))
            .ok_or(Error::OffGrid(y.as_f64()))
    }

    fn check_row(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dx {
            return Err(Error::DimensionMismatch {
                expected: self.dx,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `F(y | x)`; `x` includes the leading intercept. Threshold families
    /// (logit, probit, lpm) require `y` to be a y-grid value, and lpm values
    /// are clipped to `[0, 1]`.
    pub fn evaluate(&self, y: T, x: &[T]) -> Result<T> {
        let raw = self.evaluate_raw(y, x)?;
        Ok(raw.max(T::zero()).min(T::one()))
    }

    /// Like [`evaluate`](Self::evaluate) but without clipping the linear
    /// probability model.
    pub fn evaluate_raw(&self, y: T, x: &[T]) -> Result<T> {
        self.check_row(x)?;
        match &self.model {
            Model::Quantile { trimming, betas, .. } => {
                let below = betas.iter().filter(|b| dot(x, b) <= y).count();
                Ok(quantile_probability(*trimming, below, betas.len()))
            }
            Model::Location { beta, residuals } => Ok(residuals.cdf(y - dot(x, beta))),
            Model::LocationScale {
                beta,
                gamma,
                scale_columns,
                residuals,
            } => {
                let x2: Vec<T> = scale_columns.iter().map(|&j| x[j]).collect();
                Ok(residuals.cdf((y - dot(x, beta)) / scale(&x2, gamma)))
            }
            Model::Cox(fit) => Ok(fit.distribution(y, &x[1..])),
            Model::Binary { link, fits } => {
                let k = self.grid_index(y)?;
                Ok(fits[k].probability(*link, x))
            }
            Model::Linear { betas } => {
                let k = self.grid_index(y)?;
                Ok(dot(x, &betas[k]))
            }
        }
    }

    /// Evaluates the model for one covariate row at every y-grid point.
    /// `x2` overrides the scale covariates of the location-scale model.
    pub(crate) fn evaluate_row_on_grid(&self, x: &[T], x2: Option<&[T]>) -> Result<Vec<T>> {
        self.check_row(x)?;
        let grid = self
            .ygrid
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{} has no outcome grid", self.method)))?;
        let g = grid.values();
        Ok(match &self.model {
            Model::Location { beta, residuals } => {
                let m = dot(x, beta);
                g.iter().map(|&t| residuals.cdf(t - m)).collect()
            }
            Model::LocationScale {
                beta,
                gamma,
                scale_columns,
                residuals,
            } => {
                let m = dot(x, beta);
                let own: Vec<T>;
                let x2 = match x2 {
                    Some(v) => v,
                    None => {
                        own = scale_columns.iter().map(|&j| x[j]).collect();
                        &own
                    }
                };
                let s = scale(x2, gamma);
                g.iter().map(|&t| residuals.cdf((t - m) / s)).collect()
            }
            Model::Cox(fit) => g.iter().map(|&t| fit.distribution(t, &x[1..])).collect(),
            Model::Binary { link, fits } => fits.iter().map(|f| f.probability(*link, x)).collect(),
            Model::Linear { betas } => betas.iter().map(|b| dot(x, b)).collect(),
            Model::Quantile { .. } => unreachable!("quantile families carry no y-grid"),
        })
    }

    /// Scale columns of the location-scale model.
    pub fn scale_columns(&self) -> Option<&[usize]> {
        match &self.model {
            Model::LocationScale { scale_columns, .. } => Some(scale_columns),
            _ => None,
        }
    }
}

fn scale<T: Real>(x2: &[T], gamma: &[T]) -> T {
    (dot(x2, gamma) / T::lit(2.0)).exp()
}

/// `epsilon + (1 - 2 epsilon) * below / nreg`.
pub(crate) fn quantile_probability<T: Real>(trimming: T, below: usize, nreg: usize) -> T {
    let span = T::one() - trimming - trimming;
    if below == nreg {
        // exact upper bound regardless of rounding
        return T::one() - trimming;
    }
    trimming + span * T::lit(below as f64) / T::lit(nreg as f64)
}
