//! The decoder family. Every decoder maps `(H, y, constellation)` to an
//! estimated codeword of `n` constellation points (`n * d` real coordinates).
//!
//! | decoder | search space | tie-breaking |
//! |---------|--------------|--------------|
//! | [`decode_ml`]   | all codewords, exhaustively | lexicographic in point indices |
//! | [`decode_isq`]  | the box `[-B, B]^{nd}`, then quantize | quantizer (lowest index) |
//! | [`decode_risq`] | l-inf projection of a uniform point onto the minimizer set | l2 refinement |
//! | [`decode_grid`] | the shifted `(eps, delta)` grid, then quantize | lexicographic |
//! | [`decode_amp`]  | AMP with a tanh denoiser (BPSK only) | `sgn(0) = -1` |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{SolutionSetKind, DEFAULT_MAX_ITER, DEFAULT_RANK_TOL, DEFAULT_TOL};
use crate::par::Execution;

mod amp;
mod grid;
mod isq;
mod ml;
mod search;

pub use amp::decode_amp;
pub use grid::{decode_grid, grid_build, GridSpec};
pub use isq::{decode_isq, decode_risq, draw_reference, solution_set};
pub use ml::decode_ml;

/// Default exhaustive-search guard: `2^24` candidates.
pub const DEFAULT_MAX_EXHAUSTIVE_BITS: u32 = 24;
pub const DEFAULT_AMP_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderId {
    Ml,
    Isq,
    Risq,
    Grid,
    Amp,
}

impl DecoderId {
    pub const ALL: [DecoderId; 5] = [DecoderId::Ml, DecoderId::Isq, DecoderId::Risq, DecoderId::Grid, DecoderId::Amp];

    pub fn as_str(self) -> &'static str {
        match self {
            DecoderId::Ml => "ml",
            DecoderId::Isq => "isq",
            DecoderId::Risq => "risq",
            DecoderId::Grid => "grid",
            DecoderId::Amp => "amp",
        }
    }
}

impl fmt::Display for DecoderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecoderId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DecoderId::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| crate::error::invalid("decoder", format!("unknown decoder `{s}` (ml, isq, risq, grid, amp)")))
    }
}

/// Solver tolerances and search guards shared by the decoders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderOptions {
    pub box_tol: f64,
    pub box_max_iter: usize,
    pub rank_tol: f64,
    pub max_exhaustive_bits: u32,
    pub solution_set: SolutionSetKind,
    pub amp_iters: usize,
    /// Scheduling of the exhaustive searches.
    pub execution: Execution,
}

impl Default for DecoderOptions {
    fn default() -> Self {
        Self {
            box_tol: DEFAULT_TOL,
            box_max_iter: DEFAULT_MAX_ITER,
            rank_tol: DEFAULT_RANK_TOL,
            max_exhaustive_bits: DEFAULT_MAX_EXHAUSTIVE_BITS,
            solution_set: SolutionSetKind::BoxConstrained,
            amp_iters: DEFAULT_AMP_ITERS,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub estimate: DVector<f64>,
    /// Pre-quantization point (ISQ, r-ISQ, grid) or final AMP iterate.
    pub relaxed_point: Option<DVector<f64>>,
    pub decoder_id: DecoderId,
    pub diagnostics: BTreeMap<String, f64>,
}

impl DecodeOutput {
    fn new(decoder_id: DecoderId, estimate: DVector<f64>, relaxed_point: Option<DVector<f64>>) -> Self {
        Self {
            estimate,
            relaxed_point,
            decoder_id,
            diagnostics: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    /// `||y - H * estimate||^2`.
    pub fn residual(&self, h: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
        (y - h * &self.estimate).norm_squared()
    }
}

fn check_dims(h: &DMatrix<f64>, y: &DVector<f64>, d: usize) -> Result<()> {
    if h.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "H has {} rows but y has length {}",
            h.nrows(),
            y.len()
        )));
    }
    if h.ncols() == 0 || !h.ncols().is_multiple_of(d) {
        return Err(Error::DimensionMismatch(format!(
            "H has {} columns, not a positive multiple of the symbol dimension {d}",
            h.ncols()
        )));
    }
    Ok(())
}
