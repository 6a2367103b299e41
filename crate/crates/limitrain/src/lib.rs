//! Synthesis of neural-network controllers for plants with limiters.
//!
//! The pipeline this crate implements:
//!
//! 1. **Plant** ([`plant`]): discrete-time reference simulators for linear
//!    plants, saturation and mechanical-stop limiter links, and a hydraulic
//!    drive with two internal limiters.
//! 2. **Imitator** ([`imitator`]): a feedforward network that reproduces the
//!    plant's one-sample dynamics — constructed exactly from the plant
//!    parameters (the clamp is piecewise linear, so a single ReLU layer
//!    represents it), or trained from recorded data.
//! 3. **Controller** ([`controller`]): a network trained by rolling the
//!    closed loop forward through the frozen imitator and
//!    back-propagating the tracking error through it into the controller
//!    weights.
//! 4. **Baseline and evaluation** ([`baseline`], [`eval`]): an LQR designed
//!    on the limiter-free linearization, plus closed-loop metrics and
//!    side-by-side comparison.
//!
//! The [`cli`] module ties the stages together behind the `limitrain`
//! binary; every run is a pure function of its config and seed.

// `!(x > 0.0)`-style checks treat NaN as out of range; the suggested
// `x <= 0.0` would let NaN through. Index loops in the matrix code
// mirror the written math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baseline;
pub mod cli;
pub mod config;
pub mod controller;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod imitator;
pub mod linalg;
pub mod net;
pub mod plant;
pub mod rng;

pub use error::{Error, Result};
