// SPDX-License-Identifier: MIT OR Apache-2.0

//! Offline change-point detection for univariate series with piecewise
//! constant mean.
//!
//! The crate provides two detection pipelines and the machinery they share:
//!
//! - a penalized least-squares estimator with a multiscale penalty, solved
//!   exactly by dynamic programming ([`solver`]), with a pruned variant that
//!   returns the identical segmentation;
//! - a CUSUM post-processing pipeline ([`postproc`]) that prunes candidate
//!   points through per-candidate confidence radii and locally re-estimates
//!   the survivors; applied to the full candidate vector it is a
//!   self-standing `O(n log n)` detector in its dyadic mode.
//!
//! Detection thresholds are Monte-Carlo calibrated ([`calibrate`]), the
//! at-most-one-change model has its own test, estimator, and confidence
//! interval ([`single`]), and [`sim`] drives reproducible Monte-Carlo
//! experiments over synthetic scenarios scored by [`metrics`].
//!
//! Positions are 1-based throughout: a change-point `tau` in `{2, ..., n}`
//! is the first index of the new segment.

#![forbid(unsafe_code)]

pub mod calibrate;
pub mod cusum;
pub mod error;
pub mod metrics;
pub mod postproc;
pub mod series;
pub mod sim;
pub mod single;
pub mod solver;

pub use error::{Error, Result};
pub use series::{ChangePointVector, PiecewiseSignal, PrefixSums, TimeSeries, Triad};
