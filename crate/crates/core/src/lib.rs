//! Joint multiuser decoding for the single-input multiple-output multiple
//! access channel `y = Hx + v`.
//!
//! The crate provides
//!
//! * [`model`]: constellations, fading laws, and the forward channel model;
//! * [`numerics`]: box-constrained least squares, null-space extraction and
//!   the l-infinity projection onto the box-LS solution polytope;
//! * [`decoders`]: exhaustive ML, the box-relaxed ISQ decoder, its randomized
//!   r-ISQ variant, the (epsilon, delta)-grid decoder and an AMP baseline;
//! * [`bounds`]: Q-function, Chernoff/chi-square and union-bound calculators;
//! * [`sim`]: a reproducible Monte Carlo harness producing symbol-error-rate
//!   statistics with Wilson confidence intervals;
//! * [`verify`]: fixed-seed property suites shared by the CLI and the tests.
//!
//! Trial-level parallelism uses rayon behind the `parallel` feature (on by
//! default); without it every [`par::Execution`] runs sequentially.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod decoders;
pub mod error;
pub mod model;
pub mod numerics;
pub mod par;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
