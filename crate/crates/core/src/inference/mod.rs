//! Bootstrap inference on quantile-effect processes.

mod bootstrap;
mod summary;

pub use bootstrap::{
    bootstrap, child_seed, replication_rng, resample_weights, BootstrapDraws, BootstrapOptions, Scheme, MAX_REDRAWS,
};
pub use summary::{inference_range, max_t_statistics, standard_errors, uniform_band, Bands, Dispersion, SIGMA_FLOOR};
pub use tests::{discrepancy_test, functional_tests, ks_cms, median_index, Null, Side, TestResult};

use crate::counterfactual::{compute_effects, AnalysisRequest, Estimate, QeCurve};
use crate::data::ObservationTable;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceOptions<T> {
    pub bootstrap: BootstrapOptions,
    /// Point estimates only.
    pub noboot: bool,
    pub robust: bool,
    pub alpha: T,
    pub first: T,
    pub last: T,
    /// Constants `c` tested as `QE(tau) = c`; 0 is always included.
    pub cons_test: Vec<T>,
}

impl<T: Real> Default for InferenceOptions<T> {
    fn default() -> Self {
        Self {
            bootstrap: BootstrapOptions::default(),
            noboot: false,
            robust: false,
            alpha: T::lit(0.05),
            first: T::lit(0.1),
            last: T::lit(0.9),
            cons_test: vec![T::zero()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectInference<T> {
    pub dispersion: Dispersion<T>,
    pub bands: Bands<T>,
    pub tests: Vec<TestResult<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceReport<T> {
    pub estimate: Estimate<T>,
    /// Aligned with `estimate.effects`; `None` when bootstrap is off.
    pub inference: Option<Vec<EffectInference<T>>>,
    pub draws: Option<BootstrapDraws<T>>,
    /// Indexes of the quantile grid inside `[first, last]`.
    pub range: Vec<usize>,
    pub first: T,
    pub last: T,
    pub alpha: T,
    /// The constant-effect null used the quantile index nearest 0.5.
    pub median_substituted: bool,
}

impl<T: Real> InferenceReport<T> {
    pub fn curves(&self) -> impl Iterator<Item = &QeCurve<T>> {
        self.estimate.effects.iter().map(|e| &e.curve)
    }
}

/// Point estimates, bootstrap standard errors, bands and functional tests.
pub fn infer<T: Real>(
    request: &AnalysisRequest<T>,
    table: &ObservationTable<T>,
    opts: &InferenceOptions<T>,
) -> Result<InferenceReport<T>> {
    request.validate()?;
    let range = inference_range(&request.quantiles, opts.first, opts.last)?;
    let estimate = compute_effects(request, table)?;
    if opts.noboot {
        return Ok(InferenceReport {
            estimate,
            inference: None,
            draws: None,
            range,
            first: opts.first,
            last: opts.last,
            alpha: opts.alpha,
            median_substituted: false,
        });
    }
    if opts.bootstrap.reps < 2 {
        return Err(Error::invalid("bootstrap inference needs at least 2 replications"));
    }
    let draws = bootstrap(request, table, &opts.bootstrap)?;
    let mut inference = Vec::with_capacity(estimate.effects.len());
    let mut median_substituted = false;
    for (slot, effect) in estimate.effects.iter().enumerate() {
        let (_, delta_draws) = &draws.effects[slot];
        let dispersion = standard_errors(delta_draws, opts.robust)?;
        let bands = uniform_band(&effect.curve.delta, &dispersion.sigma, delta_draws, opts.alpha, &range)?;
        let (tests, off_half) = functional_tests(
            effect.specification.population,
            &effect.specification.discrepancy,
            &draws.specification[slot],
            &effect.curve.delta,
            delta_draws,
            &dispersion,
            &range,
            &opts.cons_test,
            opts.robust,
            &request.quantiles,
        )?;
        median_substituted |= off_half;
        inference.push(EffectInference {
            dispersion,
            bands,
            tests,
        });
    }
    Ok(InferenceReport {
        estimate,
        inference: Some(inference),
        draws: Some(draws),
        range,
        first: opts.first,
        last: opts.last,
        alpha: opts.alpha,
        median_substituted,
    })
}
