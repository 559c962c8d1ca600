//! Counterfactual distributions and quantile effects.
//!
//! A conditional distribution model is fitted in a reference population and
//! integrated over the covariates of a counterfactual population. Quantile
//! effects are differences of the resulting quantile functions; bootstrap
//! replications give standard errors, uniform bands and functional tests.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`). The aliases below fix `f64`.

// Comparisons such as `!(x > 0)` are written that way on purpose so that
// NaN lands on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conddist;
pub mod counterfactual;
pub mod data;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod regress;
pub mod scalar;
pub mod stats;

pub use conddist::{fit_conditional, FitOptions, Method};
pub use counterfactual::{
    compute_effects, left_inverse, native_cdf, plug_in_cdf, AnalysisRequest, EffectKind, Mode, Population,
};
pub use data::{load_csv, make_ugrid, make_ygrid, read_csv, ColumnRoles};
pub use error::{Error, Result};
pub use inference::{bootstrap, infer, BootstrapOptions, InferenceOptions, Scheme};
pub use scalar::Real;

pub type ObservationTable = data::ObservationTable<f64>;
pub type YGrid = data::YGrid<f64>;
pub type UGrid = data::UGrid<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type ConditionalDistributionFit = conddist::ConditionalDistributionFit<f64>;
pub type CounterfactualCdf = counterfactual::CounterfactualCdf<f64>;
pub type QeCurve = counterfactual::QeCurve<f64>;
pub type Estimate = counterfactual::Estimate<f64>;
pub type BootstrapDraws = inference::BootstrapDraws<f64>;
pub type InferenceReport = inference::InferenceReport<f64>;
