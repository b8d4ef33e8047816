//! Simulator for a microcomb-driven photonic perceptron and a capacity
//! planner for layered optical neural networks built the same way.
//!
//! - [`dataset`]: MNIST IDX and WDBC ingestion into normalized samples.
//! - [`model`]: perceptron training and the digital reference path.
//! - [`photonics`]: comb lines, spectral shaping and feedback calibration.
//! - [`signalchain`]: AWG, broadcast, dispersive delay, detection, recovery.
//! - [`capacity`]: throughput and latency arithmetic.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod dataset;
pub mod error;
pub mod model;
pub mod photonics;
pub mod signalchain;

pub use error::{Error, ErrorKind, Result};
