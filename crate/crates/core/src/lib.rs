//! Knowledge-gradient frequency band selection for RSS-based relative positioning.
//!
//! * [`belief`]: Gaussian beliefs over alternatives, full and attribute form.
//! * [`kg`]: knowledge-gradient factors, selection rules, subset policy.
//! * [`positioning`]: path-loss ranging, multilateration, EKF smoothing.
//! * [`spectrum`]: synthetic sweeps, smoothing, band clustering, sweep files.
//! * [`harness`]: end-to-end emulation runs, summaries, CSV output.
//! * [`config`]: experiment configuration files.

// NaN must fail validity checks, so `!(x > 0.0)` is deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod config;
pub mod error;
pub mod harness;
pub mod kg;
pub mod linalg;
pub mod positioning;
pub mod spectrum;

pub use error::{Error, Result};
