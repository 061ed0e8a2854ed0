use nalgebra::{DMatrix, DVector};

use super::search::{exhaustive, Blocks};
use super::{check_dims, DecodeOutput, DecoderId, DecoderOptions};
use crate::error::Result;
use crate::model::Constellation;

/// Maximum-likelihood decoding by exhaustive enumeration of all `|M|^n`
/// codewords. Fails when `n * log2|M|` exceeds the exhaustive-search guard.
pub fn decode_ml(h: &DMatrix<f64>, y: &DVector<f64>, c: &Constellation, opts: &DecoderOptions) -> Result<DecodeOutput> {
    check_dims(h, y, c.dim())?;
    let flat: Vec<f64> = c.points().flatten().copied().collect();
    let n = h.ncols() / c.dim();
    let blocks = Blocks {
        points: vec![&flat[..]; n],
        d: c.dim(),
    };
    let r = exhaustive(h, y, &blocks, opts.max_exhaustive_bits, opts.execution)?;
    Ok(DecodeOutput::new(DecoderId::Ml, r.x, None)
        .with("objective", r.cost)
        .with("candidates", r.work as f64))
}
