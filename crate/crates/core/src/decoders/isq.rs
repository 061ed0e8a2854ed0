use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{check_dims, DecodeOutput, DecoderId, DecoderOptions};
use crate::error::Result;
use crate::model::{quantize, Constellation};
use crate::numerics::{box_ls, linf_project, SolutionSet};

/// Box-relaxed decoding: solve `min ||y - Hx||^2` over `||x||_inf <= B`
/// with `B` the constellation's box radius, then quantize.
pub fn decode_isq(h: &DMatrix<f64>, y: &DVector<f64>, c: &Constellation, opts: &DecoderOptions) -> Result<DecodeOutput> {
    check_dims(h, y, c.dim())?;
    let r = box_ls(h, y, c.box_radius(), opts.box_tol, opts.box_max_iter)?;
    let estimate = quantize(c, &r.x_hat)?;
    Ok(DecodeOutput::new(DecoderId::Isq, estimate, Some(r.x_hat))
        .with("objective", r.objective)
        .with("iterations", r.iterations as f64)
        .with("converged", f64::from(u8::from(r.converged)))
        .with("kkt_residual", r.kkt_residual))
}

/// The set of box-LS minimizers for `(h, y)` (or the affine variant selected
/// in `opts`).
pub fn solution_set(h: &DMatrix<f64>, y: &DVector<f64>, c: &Constellation, opts: &DecoderOptions) -> Result<SolutionSet> {
    check_dims(h, y, c.dim())?;
    SolutionSet::build(
        h,
        y,
        c.box_radius(),
        opts.solution_set,
        opts.box_tol,
        opts.box_max_iter,
        opts.rank_tol,
    )
}

/// A uniform draw from `[-B, B]^len`, coordinates in order.
pub fn draw_reference<R: Rng + ?Sized>(len: usize, bound: f64, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-bound..=bound))
}

/// Randomized ISQ: project a uniform point of the box onto the minimizer set
/// in l-infinity norm, then quantize.
pub fn decode_risq<R: Rng + ?Sized>(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    c: &Constellation,
    rng: &mut R,
    opts: &DecoderOptions,
) -> Result<DecodeOutput> {
    let s = solution_set(h, y, c, opts)?;
    let x_r = draw_reference(h.ncols(), c.box_radius(), rng);
    let p = linf_project(&s, &x_r)?;
    let estimate = quantize(c, &p)?;
    let dist = (&x_r - &p).amax();
    Ok(DecodeOutput::new(DecoderId::Risq, estimate, Some(p))
        .with("objective", s.objective)
        .with("null_rank", s.null_rank() as f64)
        .with("converged", f64::from(u8::from(s.converged)))
        .with("linf_distance", dist))
}
