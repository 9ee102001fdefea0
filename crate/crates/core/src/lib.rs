// SPDX-License-Identifier: MIT OR Apache-2.0

//! Offline change-point detection as classification.
//!
//! The crate collects the classical single-change tests (CUSUM, its dyadic-grid
//! variant, generalised likelihood-ratio scans, the Wilcoxon rank statistic),
//! feedforward ReLU networks that embed them exactly and can be trained from
//! labelled data, seeded generators for the simulation scenarios, a
//! sliding-window localiser for multiple changes, and a Monte-Carlo evaluation
//! harness.
//!
//! Monte-Carlo loops run on rayon when the `parallel` feature is enabled (the
//! default). Every replication draws from its own seeded stream, so parallel and
//! sequential runs produce bit-identical results.

#![forbid(unsafe_code)]

pub mod cusum;
pub mod error;
pub mod eval;
pub mod glr;
pub mod io;
pub mod localise;
pub mod nn;
pub mod par;
pub mod recipes;
pub mod rng;
pub mod robust;
pub mod series;
pub mod simgen;

pub use error::{CpdError, Result};
pub use series::Series;
