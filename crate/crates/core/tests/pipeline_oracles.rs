mod oracles;

use counterfactual::inference::{
    bootstrap, replication_rng, resample_weights, standard_errors, uniform_band, BootstrapOptions, Scheme,
};
use counterfactual::{
    compute_effects, fit_conditional, load_csv, make_ugrid, make_ygrid, plug_in_cdf, AnalysisRequest,
    ColumnRoles, CounterfactualCdf, EffectKind, FitOptions, Matrix, Method, Mode, ObservationTable,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn engel<T: counterfactual::Real>() -> counterfactual::data::ObservationTable<T> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/engel.csv");
    let roles = ColumnRoles::new("foodexp", &["income"]);
    load_csv(path, &roles).unwrap()
}

fn engel_transformed() -> ObservationTable {
    let t = engel::<f64>();
    let income: Vec<f64> = t.covariates().column(1);
    let mean = income.iter().sum::<f64>() / income.len() as f64;
    let cf: Vec<Vec<f64>> = income.iter().map(|v| vec![mean + 0.75 * (v - mean)]).collect();
    t.with_counterfactual(Matrix::from_rows(&cf).unwrap()).unwrap()
}

#[test]
fn engel_table_shape() {
    let t = engel::<f64>();
    assert_eq!(t.n(), 235);
    assert_eq!(t.dx(), 2);
}

#[test]
fn engel_ygrid_order_statistics() {
    let t = engel::<f64>();
    let grid = make_ygrid(t.outcome(), 100).unwrap();
    let mut distinct = t.outcome().to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let m = distinct.len();
    let expected: Vec<f64> = (1..=100)
        .map(|i| {
            let pos = (1.0 + (i - 1) as f64 * (m - 1) as f64 / 99.0).round() as usize;
            distinct[pos - 1]
        })
        .collect();
    assert_eq!(grid.values(), expected.as_slice());
}

#[test]
fn ugrid_endpoints_and_spacing() {
    let g = make_ugrid(0.005f64, 100).unwrap();
    assert_eq!(g.len(), 100);
    assert_eq!(g.values()[0], 0.005);
    assert!((g.values()[1] - (0.005 + 0.99 / 99.0)).abs() < 1e-15);
    assert_eq!(g.values()[99], 0.995);
}

#[test]
fn logit_intercept_score_identity_on_engel() {
    let t = engel::<f64>();
    let fit = fit_conditional(Method::Logit, &t, &FitOptions::default()).unwrap();
    let grid = fit.ygrid().unwrap().clone();
    let w = vec![1.0; t.n()];
    for &y in grid.values() {
        let mean: f64 = t
            .covariates()
            .rows()
            .map(|x| fit.evaluate(y, x).unwrap())
            .sum::<f64>()
            / t.n() as f64;
        let empirical = oracles::ecdf(t.outcome(), &w, y);
        assert!((mean - empirical).abs() < 1e-8, "y={y}: {mean} vs {empirical}");
    }
}

#[test]
fn logit_plug_in_on_own_covariates_is_weighted_ecdf() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let t = engel::<f64>();
    let w: Vec<f64> = (0..t.n()).map(|_| rng.random_range(0.5..2.0)).collect();
    let t = t.with_weights(w.clone()).unwrap();
    let fit = fit_conditional(Method::Logit, &t, &FitOptions::default()).unwrap();
    let grid = fit.ygrid().unwrap().clone();
    let cdf = plug_in_cdf(&fit, t.covariates(), &w, &grid).unwrap();
    for (&y, &p) in cdf.thresholds().iter().zip(cdf.probs()) {
        assert!((p - oracles::ecdf(t.outcome(), &w, y)).abs() < 1e-8);
    }
}

#[test]
fn intercept_only_location_model_is_ecdf() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let n = 40;
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let t = ObservationTable::new(y.clone(), Matrix::zeros(n, 0)).unwrap();
    let fit = fit_conditional(Method::Loc, &t, &FitOptions::default()).unwrap();
    let grid = fit.ygrid().unwrap().clone();
    let w = vec![1.0; n];
    let cdf = plug_in_cdf(&fit, t.covariates(), &w, &grid).unwrap();
    for (&g, &p) in cdf.thresholds().iter().zip(cdf.probs()) {
        assert!((p - oracles::ecdf(&y, &w, g)).abs() < 1e-12, "at {g}");
    }
}

#[test]
fn left_inverse_matches_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mut thresholds: Vec<f64> = (0..20).map(|_| rng.random_range(-5.0..5.0)).collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut probs: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
    probs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    *probs.last_mut().unwrap() = 1.0;
    let cdf = CounterfactualCdf::new(thresholds.clone(), probs.clone()).unwrap();
    for k in 0..50 {
        let tau = (k as f64 + 0.5) / 50.0;
        let scan = thresholds
            .iter()
            .zip(&probs)
            .find(|(_, p)| **p >= tau)
            .map(|(t, _)| *t)
            .unwrap();
        let q = cdf.left_inverse(tau).unwrap();
        assert_eq!(q.value, scan, "tau={tau}");
        assert!(!q.saturated);
    }
}

#[test]
fn empirical_bootstrap_is_multinomial() {
    // the ten count vectors of 3 draws over 3 rows
    let mut outcomes = Vec::new();
    for a in 0..=3u32 {
        for b in 0..=3 - a {
            outcomes.push([a, b, 3 - a - b]);
        }
    }
    let fact = |k: u32| (1..=k).product::<u32>() as f64;
    let reps = 2000;
    let mut counts = vec![0usize; outcomes.len()];
    for r in 0..reps {
        let mut rng = replication_rng(8, r, 0);
        let w = resample_weights(Scheme::Empirical, &[1.0f64; 3], false, &mut rng);
        let c = [w[0] as u32, w[1] as u32, w[2] as u32];
        counts[outcomes.iter().position(|o| *o == c).unwrap()] += 1;
    }
    let chi2: f64 = outcomes
        .iter()
        .zip(&counts)
        .map(|(o, &c)| {
            let p = fact(3) / (fact(o[0]) * fact(o[1]) * fact(o[2])) / 27.0;
            let e = p * reps as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let critical = ChiSquared::new(9.0).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi-square {chi2} >= {critical}");
}

#[test]
fn robust_standard_error_interpolation() {
    let values: Vec<f64> = (1..=100).map(f64::from).collect();
    let draws = Matrix::from_vec(100, 1, values.clone()).unwrap();
    let robust = standard_errors(&draws, true).unwrap();
    let iqr = oracles::interpolated(&values, 0.75) - oracles::interpolated(&values, 0.25);
    assert!((robust.sigma[0] - iqr / 1.348_979_500_392_163_5).abs() < 1e-12);
    let plain = standard_errors(&draws, false).unwrap();
    let mean = 50.5;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
    assert!((plain.sigma[0] - sd).abs() < 1e-12);
}

#[test]
fn uniform_critical_value_is_max_t_quantile() {
    // replication r has maximal t-statistic r + 1
    let draws = Matrix::from_vec(100, 1, (1..=100).map(f64::from).collect()).unwrap();
    let bands = uniform_band(&[0.0], &[1.0], &draws, 0.05, &[0]).unwrap();
    let expected = oracles::interpolated(&(1..=100).map(f64::from).collect::<Vec<_>>(), 0.95);
    assert!((bands.uniform_critical - expected).abs() < 1e-12);
    assert!((bands.pointwise_critical - 1.959_963_984_540_054).abs() < 1e-9);
}

#[test]
fn bootstrap_draws_do_not_depend_on_workers() {
    let t = engel_transformed();
    let request = AnalysisRequest::new(Mode::Counterfactual { transformation: true }, Method::Qr);
    let run = |workers| {
        let opts = BootstrapOptions { reps: 20, workers, ..Default::default() };
        bootstrap(&request, &t, &opts).unwrap()
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn f32_pipeline_tracks_f64() {
    let t64 = engel_transformed();
    let t32 = {
        let t = engel::<f32>();
        let income = t.covariates().column(1);
        let mean = income.iter().sum::<f32>() / income.len() as f32;
        let cf: Vec<Vec<f32>> = income.iter().map(|v| vec![mean + 0.75 * (v - mean)]).collect();
        t.with_counterfactual(counterfactual::linalg::Matrix::<f32>::from_rows(&cf).unwrap()).unwrap()
    };
    let mode = Mode::Counterfactual { transformation: true };
    let e64 = compute_effects(&AnalysisRequest::<f64>::new(mode, Method::Loc), &t64).unwrap();
    let e32 = compute_effects(&AnalysisRequest::<f32>::new(mode, Method::Loc), &t32).unwrap();
    let d64 = &e64.effect(EffectKind::Composition).unwrap().curve.delta;
    let d32 = &e32.effect(EffectKind::Composition).unwrap().curve.delta;
    for (a, b) in d64.iter().zip(d32) {
        assert!((a - f64::from(*b)).abs() < 1.0, "{a} vs {b}");
    }
}

proptest! {
    #[test]
    fn ugrid_is_symmetric(eps in 0.001f64..0.45, nreg in 2usize..200) {
        let g = make_ugrid(eps, nreg).unwrap();
        let v = g.values();
        for k in 0..v.len() {
            prop_assert!((v[k] + v[v.len() - 1 - k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ygrid_ignores_row_order(mut y in prop::collection::vec(-100.0f64..100.0, 1..80), nreg in 1usize..50, seed in 0u64..1000) {
        let a = make_ygrid(&y, nreg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..y.len()).rev() {
            y.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(a, make_ygrid(&y, nreg).unwrap());
    }

    #[test]
    fn counterfactual_cdf_is_monotone_and_bounded(raw in prop::collection::vec(-0.5f64..1.5, 1..60)) {
        let thresholds: Vec<f64> = (0..raw.len()).map(|k| k as f64).collect();
        let cdf = CounterfactualCdf::new(thresholds, raw).unwrap();
        let p = cdf.probs();
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn left_inverse_is_monotone(raw in prop::collection::vec(0.0f64..1.0, 2..40), a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let thresholds: Vec<f64> = (0..raw.len()).map(|k| k as f64 * 0.5).collect();
        let cdf = CounterfactualCdf::new(thresholds, raw).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(cdf.left_inverse(lo).unwrap().value <= cdf.left_inverse(hi).unwrap().value);
    }
}
