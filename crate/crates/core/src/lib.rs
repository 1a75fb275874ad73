//! Non-Gaussian output statistics of a below-threshold degenerate OPO.
//!
//! The crate evaluates the linear response of the cavity, the nonlinear
//! corrections to intracavity squeezing, and the kurtosis excess of filtered
//! homodyne quadratures driven by quantum noise and classical parameter
//! fluctuations. A phase-space Monte Carlo engine provides an independent
//! check of the analytic pipeline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cmat;
pub mod config;
pub mod error;
pub mod figures;
pub mod fit;
pub mod intracavity;
pub mod kurtosis;
pub mod linear;
pub mod mc;
pub mod model;
pub mod perturbation;
pub mod quad;

pub use cmat::{theta_vec, CMat2, C64};
pub use error::{OpoError, Result};
pub use model::{
    normalize_params, validity_check, ChannelKind, DefaultWeights, DetectionFilter, NoiseChannel,
    OpoParams, RawParams, SpectrumModel, ValidityReport,
};
