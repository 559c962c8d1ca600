//! Plug-in counterfactual distributions, their left inverses and the
//! quantile effects built from them.

use std::fmt;

use crate::conddist::{fit_conditional, quantile_probability, ConditionalDistributionFit, FitOptions, Method};
use crate::data::{ObservationTable, YGrid};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;

/// Monotone step function `y -> F(y)` on ascending thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualCdf<T> {
    thresholds: Vec<T>,
    probs: Vec<T>,
}

/// A left-inverse value; `saturated` when no threshold reaches `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantile<T> {
    pub value: T,
    pub saturated: bool,
}

impl<T: Real> CounterfactualCdf<T> {
    /// Monotonizes `raw` by running maximum and clips it to `[0, 1]`.
    pub fn new(thresholds: Vec<T>, raw: Vec<T>) -> Result<Self> {
        if thresholds.len() != raw.len() {
            return Err(Error::invalid("thresholds and probabilities differ in length"));
        }
        if thresholds.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("thresholds must be strictly increasing"));
        }
        let mut running = T::neg_infinity();
        let probs = raw
            .into_iter()
            .map(|p| {
                running = running.max(p);
                running.max(T::zero()).min(T::one())
            })
            .collect();
        Ok(Self { thresholds, probs })
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    /// Step-function value at any `y`: the probability at the largest
    /// threshold `<= y`, 0 below the first.
    pub fn value_at(&self, y: T) -> T {
        let k = self.thresholds.partition_point(|&t| t <= y);
        if k == 0 {
            T::zero()
        } else {
            self.probs[k - 1]
        }
    }

    /// Smallest threshold whose probability reaches `tau`.
    pub fn left_inverse(&self, tau: T) -> Result<Quantile<T>> {
        left_inverse(self, tau)
    }
}

/// `inf { y : F(y) >= tau }` over the thresholds; probabilities within
/// [`Real::prob_tolerance`] below `tau` count as reaching it.
pub fn left_inverse<T: Real>(cdf: &CounterfactualCdf<T>, tau: T) -> Result<Quantile<T>> {
    if !(tau > T::zero() && tau < T::one()) {
        return Err(Error::invalid(format!("quantile index {tau} outside (0, 1)")));
    }
    let last = *cdf.thresholds.last().ok_or(Error::EmptyGrid)?;
    let target = tau - T::prob_tolerance();
    let k = cdf.probs.partition_point(|&p| p < target);
    Ok(if k == cdf.probs.len() {
        Quantile {
            value: last,
            saturated: true,
        }
    } else {
        Quantile {
            value: cdf.thresholds[k],
            saturated: false,
        }
    })
}

fn check_population<T: Real>(fit: &ConditionalDistributionFit<T>, cov: &Matrix<T>, w: &[T]) -> Result<()> {
    if cov.ncols() != fit.dx() {
        return Err(Error::DimensionMismatch {
            expected: fit.dx(),
            found: cov.ncols(),
        });
    }
    if w.len() != cov.nrows() {
        return Err(Error::invalid("weights and covariate rows differ in length"));
    }
    if !(w.iter().copied().sum::<T>() > T::zero()) {
        return Err(Error::invalid("population weights sum to zero"));
    }
    Ok(())
}

/// `F(y_t) = sum_i w_i F(y_t | x_i) / sum_i w_i` on `grid`, then monotonized
/// and clipped. The linear probability model is averaged before clipping.
pub fn plug_in_cdf<T: Real>(
    fit: &ConditionalDistributionFit<T>,
    cov: &Matrix<T>,
    w: &[T],
    grid: &YGrid<T>,
) -> Result<CounterfactualCdf<T>> {
    plug_in_with_scale(fit, cov, w, grid, None)
}

fn plug_in_with_scale<T: Real>(
    fit: &ConditionalDistributionFit<T>,
    cov: &Matrix<T>,
    w: &[T],
    grid: &YGrid<T>,
    scale_columns: Option<&[usize]>,
) -> Result<CounterfactualCdf<T>> {
    check_population(fit, cov, w)?;
    let g = grid.values();
    let mut acc = vec![T::zero(); g.len()];
    let mut total = T::zero();
    let own_grid = fit.ygrid() == Some(grid);
    for (i, &wi) in w.iter().enumerate() {
        if wi <= T::zero() {
            continue;
        }
        let x = cov.row(i);
        total += wi;
        if own_grid {
            let x2: Option<Vec<T>> = scale_columns.map(|c| c.iter().map(|&j| x[j]).collect());
            let values = fit.evaluate_row_on_grid(x, x2.as_deref())?;
            acc.iter_mut().zip(values).for_each(|(a, v)| *a += w[i] * v);
        } else {
            for (a, &t) in acc.iter_mut().zip(g) {
                *a += w[i] * fit.evaluate_raw(t, x)?;
            }
        }
    }
    CounterfactualCdf::new(g.to_vec(), acc.into_iter().map(|a| a / total).collect())
}

/// Plug-in distribution on the model's own support: the y-grid for the
/// grid-based methods, and for qr/cqr every fitted conditional quantile
/// `x_i'beta(u)`, which makes the Riemann-sum distribution exact.
pub fn native_cdf<T: Real>(
    fit: &ConditionalDistributionFit<T>,
    cov: &Matrix<T>,
    w: &[T],
) -> Result<CounterfactualCdf<T>> {
    native_with_scale(fit, cov, w, None)
}

fn native_with_scale<T: Real>(
    fit: &ConditionalDistributionFit<T>,
    cov: &Matrix<T>,
    w: &[T],
    scale_columns: Option<&[usize]>,
) -> Result<CounterfactualCdf<T>> {
    if let Some(grid) = fit.ygrid() {
        return plug_in_with_scale(fit, cov, w, grid, scale_columns);
    }
    check_population(fit, cov, w)?;
    let (ugrid, betas) = fit.quantile_process().expect("quantile family");
    let trimming = fit.trimming().expect("quantile family");
    let mut atoms: Vec<(T, T)> = Vec::with_capacity(cov.nrows() * betas.len());
    let mut total = T::zero();
    for (i, &wi) in w.iter().enumerate() {
        if wi <= T::zero() {
            continue;
        }
        total += wi;
        atoms.extend(betas.iter().map(|b| (dot(cov.row(i), b), wi)));
    }
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("NaN conditional quantile"));
    let nreg = ugrid.len();
    let span = T::one() - trimming - trimming;
    let denom = T::lit(nreg as f64) * total;
    let mut thresholds: Vec<T> = Vec::new();
    let mut probs: Vec<T> = Vec::new();
    let mut cum = T::zero();
    for (k, &(v, wi)) in atoms.iter().enumerate() {
        cum += wi;
        let last_of_tie = atoms.get(k + 1).is_none_or(|next| next.0 > v);
        if last_of_tie {
            thresholds.push(v);
            probs.push(trimming + span * cum / denom);
        }
    }
    if let Some(p) = probs.last_mut() {
        *p = quantile_probability(trimming, nreg, nreg);
    }
    CounterfactualCdf::new(thresholds, probs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EffectKind {
    Structure,
    Composition,
    Total,
}

impl EffectKind {
    pub fn label(self) -> &'static str {
        match self {
            EffectKind::Structure => "Structure",
            EffectKind::Composition => "Composition",
            EffectKind::Total => "Total",
        }
    }
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Population in which the specification of the conditional model is
/// checked against the empirical distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Population {
    /// The single fitting sample of counterfactual-covariate mode.
    Reference,
    Group0,
    Group1,
    /// Both groups, with the model taken as the group-share mixture of the
    /// two group fits.
    Pooled,
}

impl Population {
    pub fn label(self) -> &'static str {
        match self {
            Population::Reference => "reference",
            Population::Group0 => "group 0",
            Population::Group1 => "group 1",
            Population::Pooled => "pooled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Populations defined by a binary group column.
    Group { treatment: bool, decomposition: bool },
    /// One fitting sample; the counterfactual population uses the
    /// counterfactual covariates. `transformation` marks them as a known
    /// transformation of the same units (paired rows).
    Counterfactual { transformation: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRequest<T> {
    pub mode: Mode,
    pub method: Method,
    pub quantiles: Vec<T>,
    pub options: FitOptions<T>,
}

impl<T: Real> AnalysisRequest<T> {
    pub fn new(mode: Mode, method: Method) -> Self {
        Self {
            mode,
            method,
            quantiles: (1..=9).map(|k| T::lit(k as f64 / 10.0)).collect(),
            options: FitOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.quantiles.is_empty() {
            return Err(Error::invalid("no quantile indexes requested"));
        }
        if self.quantiles.iter().any(|&t| !(t > T::zero() && t < T::one())) {
            return Err(Error::invalid("quantile indexes must lie in (0, 1)"));
        }
        if self.quantiles.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("quantile indexes must be strictly increasing"));
        }
        if let Mode::Group {
            treatment: false,
            decomposition: true,
        } = self.mode
        {
            return Err(Error::invalid("decomposition requires treatment"));
        }
        Ok(())
    }

    /// Effects produced, in report order.
    pub fn effect_kinds(&self) -> Vec<EffectKind> {
        match self.mode {
            Mode::Group {
                decomposition: true, ..
            } => vec![EffectKind::Structure, EffectKind::Composition, EffectKind::Total],
            Mode::Group { treatment: true, .. } => vec![EffectKind::Structure],
            _ => vec![EffectKind::Composition],
        }
    }
}

/// Quantile effect `Delta(tau)` on the requested quantile indexes.
#[derive(Debug, Clone, PartialEq)]
pub struct QeCurve<T> {
    pub kind: EffectKind,
    pub taus: Vec<T>,
    pub delta: Vec<T>,
    /// A left inverse entering `delta(tau)` saturated at the top threshold.
    pub saturated: Vec<bool>,
}

/// `Q_empirical(tau) - Q_model(tau)` in one population.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecificationProcess<T> {
    pub population: Population,
    pub discrepancy: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimate<T> {
    pub curve: QeCurve<T>,
    pub specification: SpecificationProcess<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<T> {
    pub effects: Vec<EffectEstimate<T>>,
    /// Regressions estimated per conditional model.
    pub regressions: usize,
    pub reference_size: usize,
    pub counterfactual_size: usize,
    /// Grid points where a binary fit was flagged as separated.
    pub separated_fits: usize,
}

impl<T: Real> Estimate<T> {
    pub fn effect(&self, kind: EffectKind) -> Option<&EffectEstimate<T>> {
        self.effects.iter().find(|e| e.curve.kind == kind)
    }
}

fn quantiles<T: Real>(cdf: &CounterfactualCdf<T>, taus: &[T]) -> Result<Vec<Quantile<T>>> {
    taus.iter().map(|&t| cdf.left_inverse(t)).collect()
}

fn curve<T: Real>(kind: EffectKind, taus: &[T], minuend: &[Quantile<T>], subtrahend: &[Quantile<T>]) -> QeCurve<T> {
    QeCurve {
        kind,
        taus: taus.to_vec(),
        delta: minuend.iter().zip(subtrahend).map(|(a, b)| a.value - b.value).collect(),
        saturated: minuend.iter().zip(subtrahend).map(|(a, b)| a.saturated || b.saturated).collect(),
    }
}

fn masked<T: Real>(w: &[T], group: &[u8], g: u8) -> Vec<T> {
    w.iter().zip(group).map(|(&v, &k)| if k == g { v } else { T::zero() }).collect()
}

/// Weighted empirical distribution of `y` evaluated at `thresholds`.
fn ecdf_at<T: Real>(y: &[T], w: &[T], thresholds: &[T]) -> Vec<T> {
    let mut pairs: Vec<(T, T)> = y.iter().zip(w).filter(|p| *p.1 > T::zero()).map(|(&a, &b)| (a, b)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("NaN outcome"));
    let total: T = pairs.iter().map(|p| p.1).sum();
    let mut out = Vec::with_capacity(thresholds.len());
    let mut k = 0;
    let mut acc = T::zero();
    for &t in thresholds {
        while k < pairs.len() && pairs[k].0 <= t {
            acc += pairs[k].1;
            k += 1;
        }
        out.push(if k == pairs.len() { T::one() } else { acc / total });
    }
    out
}

/// Thresholds on which the empirical and model distributions are compared:
/// the y-grid, or every distinct observed outcome for qr/cqr.
fn comparison_thresholds<T: Real>(fit: &ConditionalDistributionFit<T>, y: &[T], w: &[T]) -> Vec<T> {
    match fit.ygrid() {
        Some(g) => g.values().to_vec(),
        None => distinct_outcomes(y, w),
    }
}

fn distinct_outcomes<T: Real>(y: &[T], w: &[T]) -> Vec<T> {
    let mut v: Vec<T> = y.iter().zip(w).filter(|p| *p.1 > T::zero()).map(|p| *p.0).collect();
    crate::stats::sort_floats(&mut v);
    v.dedup();
    v
}

fn discrepancy<T: Real>(
    population: Population,
    empirical: CounterfactualCdf<T>,
    model: CounterfactualCdf<T>,
    taus: &[T],
) -> Result<SpecificationProcess<T>> {
    let qe = quantiles(&empirical, taus)?;
    let qm = quantiles(&model, taus)?;
    Ok(SpecificationProcess {
        population,
        discrepancy: qe.iter().zip(&qm).map(|(a, b)| a.value - b.value).collect(),
    })
}

fn single_specification<T: Real>(
    population: Population,
    fit: &ConditionalDistributionFit<T>,
    model: &CounterfactualCdf<T>,
    y: &[T],
    w: &[T],
    taus: &[T],
) -> Result<SpecificationProcess<T>> {
    let thresholds = comparison_thresholds(fit, y, w);
    let emp = CounterfactualCdf::new(thresholds.clone(), ecdf_at(y, w, &thresholds))?;
    let mdl = CounterfactualCdf::new(thresholds.clone(), thresholds.iter().map(|&t| model.value_at(t)).collect())?;
    discrepancy(population, emp, mdl, taus)
}

/// Quantile effects with the table's own weights.
pub fn compute_effects<T: Real>(request: &AnalysisRequest<T>, table: &ObservationTable<T>) -> Result<Estimate<T>> {
    let w = table.weights();
    estimate_with_weights(request, table, w, w)
}

/// Quantile effects with separate weights for the fitting (reference)
/// sample and the counterfactual covariate sample; the latter is only read
/// in counterfactual-covariate mode.
pub(crate) fn estimate_with_weights<T: Real>(
    request: &AnalysisRequest<T>,
    table: &ObservationTable<T>,
    w_ref: &[T],
    w_cf: &[T],
) -> Result<Estimate<T>> {
    request.validate()?;
    let taus = &request.quantiles;
    let x = table.covariates();
    let y = table.outcome();
    let count = |w: &[T]| w.iter().filter(|v| **v > T::zero()).count();
    match request.mode {
        Mode::Counterfactual { .. } => {
            let xc = table
                .counterfactual_covariates()
                .ok_or_else(|| Error::invalid("counterfactual mode requires counterfactual covariates"))?;
            let fit = fit_conditional(request.method, &table.reweighted(w_ref.to_vec()), &request.options)?;
            let f00 = native_cdf(&fit, x, w_ref)?;
            let f01 = native_with_scale(&fit, xc, w_cf, table.counterfactual_scale_columns())?;
            let q00 = quantiles(&f00, taus)?;
            let q01 = quantiles(&f01, taus)?;
            let spec = single_specification(Population::Reference, &fit, &f00, y, w_ref, taus)?;
            Ok(Estimate {
                effects: vec![EffectEstimate {
                    curve: curve(EffectKind::Composition, taus, &q01, &q00),
                    specification: spec,
                }],
                regressions: fit.regressions(),
                reference_size: count(w_ref),
                counterfactual_size: count(w_cf),
                separated_fits: fit.separated_fits(),
            })
        }
        Mode::Group {
            treatment,
            decomposition,
        } => {
            let group = table
                .group()
                .ok_or_else(|| Error::invalid("group mode requires a group column"))?;
            let w0 = masked(w_ref, group, 0);
            let w1 = masked(w_ref, group, 1);
            for (g, wg) in [(0u8, &w0), (1u8, &w1)] {
                if !(wg.iter().copied().sum::<T>() > T::zero()) {
                    return Err(Error::EmptyGroup(g));
                }
            }
            let fit0 = fit_conditional(request.method, &table.reweighted(w0.clone()), &request.options)?;
            let f00 = native_cdf(&fit0, x, &w0)?;
            let f01 = native_cdf(&fit0, x, &w1)?;
            let q00 = quantiles(&f00, taus)?;
            let q01 = quantiles(&f01, taus)?;
            let composition = curve(EffectKind::Composition, taus, &q01, &q00);
            let spec0 = || single_specification(Population::Group0, &fit0, &f00, y, &w0, taus);
            let mut separated = fit0.separated_fits();
            let effects = if !treatment {
                vec![EffectEstimate {
                    curve: composition,
                    specification: spec0()?,
                }]
            } else {
                let fit1 = fit_conditional(request.method, &table.reweighted(w1.clone()), &request.options)?;
                separated += fit1.separated_fits();
                let f11 = native_cdf(&fit1, x, &w1)?;
                let q11 = quantiles(&f11, taus)?;
                let structure = curve(EffectKind::Structure, taus, &q11, &q01);
                let spec1 = single_specification(Population::Group1, &fit1, &f11, y, &w1, taus)?;
                if !decomposition {
                    vec![EffectEstimate {
                        curve: structure,
                        specification: spec1,
                    }]
                } else {
                    let total = QeCurve {
                        kind: EffectKind::Total,
                        taus: taus.clone(),
                        delta: structure.delta.iter().zip(&composition.delta).map(|(s, c)| *s + *c).collect(),
                        saturated: structure
                            .saturated
                            .iter()
                            .zip(&composition.saturated)
                            .map(|(a, b)| *a || *b)
                            .collect(),
                    };
                    let pooled = pooled_specification(&fit0, &f00, &fit1, &f11, y, &w0, &w1, taus)?;
                    vec![
                        EffectEstimate {
                            curve: structure,
                            specification: spec1,
                        },
                        EffectEstimate {
                            curve: composition,
                            specification: spec0()?,
                        },
                        EffectEstimate {
                            curve: total,
                            specification: pooled,
                        },
                    ]
                }
            };
            Ok(Estimate {
                effects,
                regressions: fit0.regressions(),
                reference_size: count(&w0),
                counterfactual_size: count(&w1),
                separated_fits: separated,
            })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn pooled_specification<T: Real>(
    fit0: &ConditionalDistributionFit<T>,
    f00: &CounterfactualCdf<T>,
    fit1: &ConditionalDistributionFit<T>,
    f11: &CounterfactualCdf<T>,
    y: &[T],
    w0: &[T],
    w1: &[T],
    taus: &[T],
) -> Result<SpecificationProcess<T>> {
    let mut thresholds = comparison_thresholds(fit0, y, w0);
    thresholds.extend(comparison_thresholds(fit1, y, w1));
    crate::stats::sort_floats(&mut thresholds);
    thresholds.dedup();
    let s0: T = w0.iter().copied().sum();
    let s1: T = w1.iter().copied().sum();
    let share0 = s0 / (s0 + s1);
    let share1 = s1 / (s0 + s1);
    let pooled_w: Vec<T> = w0.iter().zip(w1).map(|(&a, &b)| a + b).collect();
    let emp = CounterfactualCdf::new(thresholds.clone(), ecdf_at(y, &pooled_w, &thresholds))?;
    let model = thresholds
        .iter()
        .map(|&t| share0 * f00.value_at(t) + share1 * f11.value_at(t))
        .collect();
    let mdl = CounterfactualCdf::new(thresholds, model)?;
    discrepancy(Population::Pooled, emp, mdl, taus)
}
