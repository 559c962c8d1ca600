//! Synthetic CSV fixtures shared by the CLI test targets.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn engel_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/engel.csv")
}

pub fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("counterfactual").chain(list.iter().copied()).map(String::from).collect()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Two groups with identical covariates; group 1 outcomes are group 0
/// outcomes plus `shift` lattice steps of 0.1. Outcomes lie on the 0.1
/// lattice so both groups share thresholds exactly.
pub fn shifted_groups(dir: &Path, n: usize, shift: i64, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::from("y,x1,x2,union\n");
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = rng.random_range(0.0..2.0);
        let x2 = if rng.random::<f64>() < 0.4 { 1.0 } else { 0.0 };
        let latent = 1.5 + 0.8 * x1 + 0.5 * x2 + 0.6 * normal(&mut rng);
        let k = (latent * 10.0).round().clamp(0.0, 60.0) as i64;
        rows.push((k, x1, x2));
    }
    for (group, offset) in [(0, 0), (1, shift)] {
        for &(k, x1, x2) in &rows {
            let _ = writeln!(s, "{},{x1},{x2},{group}", lattice(k + offset));
        }
    }
    let path = dir.join("groups.csv");
    std::fs::write(&path, s).unwrap();
    path
}

fn lattice(k: i64) -> String {
    format!("{}.{}", k / 10, k % 10)
}

/// Two groups that differ in covariates and in the conditional model.
pub fn two_groups(dir: &Path, n0: usize, n1: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::from("y,x1,x2,g\n");
    for (group, n) in [(0, n0), (1, n1)] {
        for _ in 0..n {
            let x1: f64 = rng.random_range(0.0..2.0) + 0.5 * group as f64;
            let x2: f64 = normal(&mut rng);
            let y = 2.0 + x1 + 0.3 * x2 + 0.4 * group as f64 + (0.5 + 0.2 * x1) * normal(&mut rng);
            let _ = writeln!(s, "{},{x1},{x2},{group}", y.exp());
        }
    }
    let path = dir.join("two_groups.csv");
    std::fs::write(&path, s).unwrap();
    path
}

/// Outcome, two covariates, their shifted counterfactual copies
/// and a left-censoring indicator. With `censor`, outcomes below the 15th
/// percentile are replaced by it and flagged; otherwise nothing is censored.
pub struct SinglePopulation {
    pub path: PathBuf,
    pub x: Vec<[f64; 2]>,
    /// Observed (censored) outcomes as written to the file.
    pub y: Vec<f64>,
}

pub fn single_population(dir: &Path, n: usize, delta: [f64; 2], censor: bool, seed: u64) -> SinglePopulation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = rng.random_range(0.0..3.0);
        let x2: f64 = normal(&mut rng);
        x.push([x1, x2]);
        y.push(5.0 + x1 - 0.5 * x2 + (0.5 + 0.3 * x1) * normal(&mut rng));
    }
    let mut sorted = y.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let floor = if censor { sorted[n * 15 / 100] } else { f64::NEG_INFINITY };
    let mut s = String::from("y,x1,x2,cx1,cx2,cens\n");
    for (r, v) in x.iter().zip(y.iter_mut()) {
        let censored = *v <= floor;
        let observed = v.max(floor);
        *v = observed;
        let _ = writeln!(
            s,
            "{observed},{},{},{},{},{}",
            r[0],
            r[1],
            r[0] + delta[0],
            r[1] + delta[1],
            u8::from(censored)
        );
    }
    let path = dir.join("single.csv");
    std::fs::write(&path, s).unwrap();
    SinglePopulation { path, x, y }
}
