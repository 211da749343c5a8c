//! Pilot distortion design for time-of-arrival obfuscation in OFDM uplinks.
//!
//! A single-antenna transmitter scales each pilot subcarrier by a complex
//! factor `z_i`. The receiver is unaware of the distortion and correlates
//! against the nominal pilots, so the distortion reshapes the mismatched
//! ambiguity function (MAF) seen by its delay estimator. This crate designs
//! `z` to raise MAF sidelobes (SLPR or ISL) inside a proximity ball around
//! the communication-optimal pilot, and evaluates the result with a
//! mismatched maximum-likelihood delay estimator and a capacity lower bound.
//!
//! Module map:
//! - [`model`]: pilots, multipath channel, noise, received-signal synthesis.
//! - [`maf`]: steering vectors, sidelobe geometry, SLPR/ISL quadratic forms.
//! - [`commcap`]: LMMSE-based capacity lower bound.
//! - [`fracopt`]: Dinkelbach outer loop with difference-of-convex inner steps.
//! - [`mml`]: grid-search delay estimator.
//! - [`harness`]: range profiles and Monte Carlo sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commcap;
pub mod error;
pub mod fracopt;
pub mod harness;
pub mod maf;
pub mod mml;
pub mod model;

pub use error::{Error, Result};
pub use num_complex::Complex64;
