//! Sparse universal kriging for multi-step time-series forecasting.
//!
//! The offline pipeline standardizes an input/output log, builds ARX
//! regressors, partitions them into balanced zones, whitens each zone and fits
//! an exponential semivariogram to the trend residuals. Online, each
//! prediction step solves an ℓ1-regularized universal kriging problem with
//! K-ADMM, which diagonalizes the zone's semivariance matrix once and reuses
//! a single factorization across all iterations and queries.

// Negated float comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod config;
pub mod data;
pub mod datagen;
pub mod error;
pub mod forecast;
pub mod kadmm;
pub mod kriging;
pub mod library;
pub mod linalg;
pub mod oracle;
pub mod preprocess;
pub mod validation;
pub mod variogram;
pub mod verify;

pub use error::{Error, Result};
