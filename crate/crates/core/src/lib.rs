//! Missing-not-at-random response models with instrumental (shadow)
//! variables: identifiability diagnostics, mean-score estimation with
//! fractional imputation or quadrature, inverse-probability-weighted means,
//! bootstrap inference and a Monte Carlo harness.

pub mod config;
pub mod data;
pub mod error;
pub mod estimate;
pub mod identify;
pub mod links;
pub mod models;
pub mod numerics;
pub mod simulate;

pub use error::{Error, Result};
pub use links::LinkFunction;
pub use models::{IndexSpec, KnownMean, MeanBasis, OutcomeFamily, OutcomeModel, ResponseModel, Transform};
