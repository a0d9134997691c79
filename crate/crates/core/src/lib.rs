//! Simulation of latent-variable measurement-error models for dietary
//! assessment: the calibration method (biomarker-on-self-report regression)
//! and the method of triads (validity coefficient from three instruments).

// `!(x > y)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod error;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod model;
pub mod triads;

pub use error::{Error, Result};
