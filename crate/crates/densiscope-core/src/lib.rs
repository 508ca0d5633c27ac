//! Outlier detection and robust regression for density-valued data.
//!
//! Densities are sampled on uniform grids ([`density`]), mapped into Hilbert
//! spaces ([`transforms`]) and screened with boxplot-style detectors
//! ([`scalar`], [`functional`], [`multi`]). The [`regression`] module fits
//! the kernel LQD regressor used by [`regoutlier`] to find abnormal
//! predictor/response associations. [`simgen`] holds the synthetic data
//! generators and [`metrics`] the detection rates.
#![no_std]

extern crate alloc;

pub mod density;
pub mod error;
pub mod functional;
pub mod metrics;
pub mod multi;
pub mod regoutlier;
pub mod regression;
pub mod scalar;
pub mod simgen;
pub mod transforms;

pub use error::{Error, Result};
pub use nalgebra;
