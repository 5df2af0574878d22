//! Space-mapping parameter estimation for a 1D heat-transfer problem.
//!
//! The crate pairs an expensive finite-difference *fine* model of
//! `dT/dt = alpha * d2T/dx2 + s0` with Robin boundaries against a cheap ReLU
//! multilayer-perceptron *coarse* model, and drives both with the
//! space-mapping loop in [`smo`]:
//!
//! 1. optimize the coarse model for parameters that reproduce a target response,
//! 2. evaluate the fine model at that candidate,
//! 3. stop when both responses agree, otherwise add the fine evaluations to the
//!    training set and retrain the coarse model.
//!
//! Everything here is `no_std` + `alloc`. File formats, the command-line driver
//! and the experiment harness live in the `spacemap-cli` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(clippy::needless_range_loop))]

extern crate alloc;

pub mod coarse_net;
pub mod error;
pub mod fine_solver;
pub mod heat_model;
pub mod linalg;
mod math;
pub mod optim;
pub mod smo;

pub use error::{Error, Result};
pub use heat_model::{DataRecord, Dataset, Grid1D, HeatParams, ParamBounds, Probe, ProbeSet, TemperatureField};
