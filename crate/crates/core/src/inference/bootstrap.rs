use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::counterfactual::{estimate_with_weights, AnalysisRequest, EffectKind, Estimate, Mode};
use crate::data::ObservationTable;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Re-draws allowed for a replication whose estimation fails.
pub const MAX_REDRAWS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Multinomial row counts times the base weights.
    Empirical,
    /// Base weights times i.i.d. standard exponential multipliers.
    Weighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOptions {
    pub scheme: Scheme,
    pub reps: usize,
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
    /// Test hook: every multiplier of the weighted scheme equals 1.
    pub unit_multipliers: bool,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::Empirical,
            reps: 100,
            seed: 8,
            workers: 1,
            unit_multipliers: false,
        }
    }
}

/// Bootstrap replications of every effect and specification process.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws<T> {
    pub scheme: Scheme,
    pub seed: u64,
    /// One `reps x taus` matrix of `Delta*` per effect, in estimate order.
    pub effects: Vec<(EffectKind, Matrix<T>)>,
    /// Matching `reps x taus` matrices of the specification discrepancy.
    pub specification: Vec<Matrix<T>>,
    /// Replications that needed at least one re-draw.
    pub redrawn: usize,
}

impl<T: Real> BootstrapDraws<T> {
    pub fn reps(&self) -> usize {
        self.effects.first().map_or(0, |e| e.1.nrows())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `r`, attempt `attempt`, derived from the run seed.
pub fn child_seed(seed: u64, r: usize, attempt: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ r as u64) ^ (attempt as u64).wrapping_mul(0xA24B_AED4_963E_E407))
}

pub fn replication_rng(seed: u64, r: usize, attempt: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(seed, r, attempt))
}

/// One bootstrap draw of the observation weights. Rows with zero base
/// weight stay at zero.
pub fn resample_weights<T: Real, R: Rng>(scheme: Scheme, base: &[T], unit_multipliers: bool, rng: &mut R) -> Vec<T> {
    match scheme {
        Scheme::Empirical => {
            let rows: Vec<usize> = (0..base.len()).filter(|&i| base[i] > T::zero()).collect();
            let mut counts = vec![0u32; base.len()];
            for _ in 0..rows.len() {
                counts[rows[rng.random_range(0..rows.len())]] += 1;
            }
            base.iter().zip(counts).map(|(&w, c)| w * T::lit(c as f64)).collect()
        }
        Scheme::Weighted => base
            .iter()
            .map(|&w| {
                let e: f64 = if unit_multipliers { 1.0 } else { rng.sample(Exp1) };
                if w > T::zero() {
                    w * T::lit(e)
                } else {
                    T::zero()
                }
            })
            .collect(),
    }
}

fn replicate<T: Real>(
    request: &AnalysisRequest<T>,
    table: &ObservationTable<T>,
    opts: &BootstrapOptions,
    r: usize,
) -> Result<(Estimate<T>, bool)> {
    let base = table.weights();
    let mut last = None;
    for attempt in 0..=MAX_REDRAWS {
        let mut rng = replication_rng(opts.seed, r, attempt);
        let w_ref = resample_weights(opts.scheme, base, opts.unit_multipliers, &mut rng);
        let w_cf = match request.mode {
            Mode::Counterfactual { transformation: false } => {
                resample_weights(opts.scheme, base, opts.unit_multipliers, &mut rng)
            }
            _ => w_ref.clone(),
        };
        match estimate_with_weights(request, table, &w_ref, &w_cf) {
            Ok(e) => return Ok((e, attempt > 0)),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::BootstrapFailed {
        replication: r,
        attempts: MAX_REDRAWS + 1,
        source: Box::new(last.expect("at least one attempt")),
    })
}

/// Re-runs the whole estimation on `reps` resampled weight vectors.
/// Replication `r` depends only on `(seed, r)`, and results are gathered in
/// replication order, so the draws are identical for any worker count.
pub fn bootstrap<T: Real>(
    request: &AnalysisRequest<T>,
    table: &ObservationTable<T>,
    opts: &BootstrapOptions,
) -> Result<BootstrapDraws<T>> {
    if opts.reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    if opts.workers == 0 {
        return Err(Error::invalid("worker count must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::WorkerPool(e.to_string()))?;
    let results: Vec<Result<(Estimate<T>, bool)>> =
        pool.install(|| (0..opts.reps).into_par_iter().map(|r| replicate(request, table, opts, r)).collect());
    let replications = results.into_iter().collect::<Result<Vec<_>>>()?;

    let kinds = request.effect_kinds();
    let ntau = request.quantiles.len();
    let mut effects: Vec<(EffectKind, Vec<T>)> = kinds.iter().map(|&k| (k, Vec::new())).collect();
    let mut specification: Vec<Vec<T>> = vec![Vec::new(); kinds.len()];
    let mut redrawn = 0;
    for (est, redraw) in &replications {
        redrawn += usize::from(*redraw);
        for (slot, e) in est.effects.iter().enumerate() {
            effects[slot].1.extend_from_slice(&e.curve.delta);
            specification[slot].extend_from_slice(&e.specification.discrepancy);
        }
    }
    let reps = opts.reps;
    Ok(BootstrapDraws {
        scheme: opts.scheme,
        seed: opts.seed,
        effects: effects
            .into_iter()
            .map(|(k, v)| Matrix::from_vec(reps, ntau, v).map(|m| (k, m)))
            .collect::<Result<_>>()?,
        specification: specification
            .into_iter()
            .map(|v| Matrix::from_vec(reps, ntau, v))
            .collect::<Result<_>>()?,
        redrawn,
    })
}
