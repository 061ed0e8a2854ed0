use nalgebra::{DMatrix, DVector};

use super::search::{branch_and_bound, exhaustive, Blocks};
use super::{check_dims, DecodeOutput, DecoderId, DecoderOptions};
use crate::error::{invalid, Error, Result};
use crate::model::{quantize, Constellation};

/// The shifted grid `{x : x_i = delta_i mod eps, |x_i| <= B}` restricted, for
/// multi-dimensional constellations, to the per-user ball of radius `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub epsilon: f64,
    /// Per-coordinate offsets, canonicalized to `[0, eps)`.
    pub delta: Vec<f64>,
    /// Ordered scalar grid of every real coordinate.
    pub scalar_points_per_coord: Vec<Vec<f64>>,
    /// Admissible points of every user block, flattened `d`-vectors.
    block_points: Vec<Vec<f64>>,
    dim: usize,
}

impl GridSpec {
    pub fn users(&self) -> usize {
        self.block_points.len()
    }

    /// Number of admissible points for user `u`.
    pub fn block_len(&self, u: usize) -> usize {
        self.block_points[u].len() / self.dim
    }

    /// `log2` of the total number of grid codewords.
    pub fn bits(&self) -> f64 {
        (0..self.users()).map(|u| (self.block_len(u) as f64).log2()).sum()
    }
}

fn scalar_grid(epsilon: f64, delta: f64, bound: f64) -> Vec<f64> {
    let jmin = ((-bound - delta) / epsilon - 1e-9).ceil() as i64;
    let jmax = ((bound - delta) / epsilon + 1e-9).floor() as i64;
    (jmin..=jmax)
        .map(|j| (delta + j as f64 * epsilon).clamp(-bound, bound))
        .collect()
}

/// Builds the grid for `n` users. `delta` holds one offset per real
/// coordinate (`n * d` values) or a single offset shared by all of them.
pub fn grid_build(c: &Constellation, epsilon: f64, delta: &[f64], n: usize) -> Result<GridSpec> {
    let bound = c.box_radius();
    if !(epsilon > 0.0 && epsilon <= 2.0 * bound) || !epsilon.is_finite() {
        return Err(invalid("epsilon", format!("must lie in (0, {}], got {epsilon}", 2.0 * bound)));
    }
    let d = c.dim();
    let len = n * d;
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    let delta: Vec<f64> = match delta.len() {
        1 => vec![delta[0]; len],
        l if l == len => delta.to_vec(),
        l => {
            return Err(Error::DimensionMismatch(format!(
                "delta has {l} entries, expected 1 or {len}"
            )))
        }
    };
    if let Some(bad) = delta.iter().find(|v| !v.is_finite()) {
        return Err(invalid("delta", format!("must be finite, got {bad}")));
    }
    let delta: Vec<f64> = delta
        .into_iter()
        .map(|v| {
            let r = v.rem_euclid(epsilon);
            if r >= epsilon {
                0.0
            } else {
                r
            }
        })
        .collect();
    let scalar: Vec<Vec<f64>> = delta.iter().map(|&dl| scalar_grid(epsilon, dl, bound)).collect();
    if let Some(i) = scalar.iter().position(Vec::is_empty) {
        return Err(Error::EmptyGrid(format!(
            "coordinate {i} has no points for eps = {epsilon}, delta = {}",
            delta[i]
        )));
    }

    let mut block_points = Vec::with_capacity(n);
    for u in 0..n {
        let axes = &scalar[u * d..(u + 1) * d];
        let mut flat = Vec::new();
        let mut idx = vec![0usize; d];
        'outer: loop {
            let p: Vec<f64> = (0..d).map(|k| axes[k][idx[k]]).collect();
            if d == 1 || p.iter().map(|v| v * v).sum::<f64>().sqrt() <= bound * (1.0 + 1e-12) {
                flat.extend_from_slice(&p);
            }
            let mut k = d;
            loop {
                if k == 0 {
                    break 'outer;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        if flat.is_empty() {
            return Err(Error::EmptyGrid(format!("user {u} has no grid point inside the ball")));
        }
        block_points.push(flat);
    }
    Ok(GridSpec {
        epsilon,
        delta,
        scalar_points_per_coord: scalar,
        block_points,
        dim: d,
    })
}

/// Minimizes `||y - Hx||^2` over the grid, then quantizes.
///
/// Grids within the exhaustive guard are enumerated. Larger grids are searched
/// exactly by branch and bound when `H` has full column rank (same result,
/// same tie-breaking); otherwise the guard error is returned.
pub fn decode_grid(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &GridSpec,
    c: &Constellation,
    opts: &DecoderOptions,
) -> Result<DecodeOutput> {
    check_dims(h, y, c.dim())?;
    if grid.dim != c.dim() || grid.users() * grid.dim != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "grid covers {} users of dimension {}, H has {} columns",
            grid.users(),
            grid.dim,
            h.ncols()
        )));
    }
    let blocks = Blocks {
        points: grid.block_points.iter().map(Vec::as_slice).collect(),
        d: grid.dim,
    };
    let (r, method) = match exhaustive(h, y, &blocks, opts.max_exhaustive_bits, opts.execution) {
        Ok(r) => (r, 0.0),
        Err(Error::SearchTooLarge { .. }) => {
            (branch_and_bound(h, y, &blocks, opts.max_exhaustive_bits, opts.rank_tol)?, 1.0)
        }
        Err(e) => return Err(e),
    };
    let estimate = quantize(c, &r.x)?;
    Ok(DecodeOutput::new(DecoderId::Grid, estimate, Some(r.x))
        .with("objective", r.cost)
        .with("grid_bits", grid.bits())
        .with("search_work", r.work as f64)
        .with("branch_and_bound", method))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{decode_ml, solution_set};
    use crate::model::{sample_channel, sample_codeword, FadingDistribution};
    use crate::numerics::linf_project;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn third_pitch_grids() {
        let c = Constellation::bpsk();
        let g = grid_build(&c, 1.0 / 3.0, &[0.0], 1).unwrap();
        let want: Vec<f64> = (-3..=3).map(|j| j as f64 / 3.0).collect();
        assert!(close(&g.scalar_points_per_coord[0], &want));

        // Enumeration oracle: scan a fine lattice of [-1, 1] for x = 0.1 mod 1/3.
        let g = grid_build(&c, 1.0 / 3.0, &[0.1], 1).unwrap();
        let oracle: Vec<f64> = (-30_000..=30_000)
            .map(|k| k as f64 / 30_000.0)
            .filter(|x| {
                let r = (x - 0.1).rem_euclid(1.0 / 3.0);
                r < 1e-9 || (1.0 / 3.0 - r) < 1e-9
            })
            .collect();
        assert_eq!(g.scalar_points_per_coord[0].len(), 6);
        for (a, b) in g.scalar_points_per_coord[0].iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn pitch_two_degenerates_to_constellation() {
        let c = Constellation::bpsk();
        let g = grid_build(&c, 2.0, &[1.0], 3).unwrap();
        assert!(close(&g.scalar_points_per_coord[0], &[-1.0, 1.0]));
        assert_eq!(g.delta, vec![1.0; 3]);
        let g = grid_build(&c, 2.0, &[3.0], 3).unwrap();
        assert_eq!(g.delta, vec![1.0; 3]);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let opts = DecoderOptions::default();
        for _ in 0..10 {
            let h = sample_channel(2, 3, FadingDistribution::Gaussian, &mut rng);
            let y = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            let a = decode_grid(&h, &y, &g, &c, &opts).unwrap();
            let b = decode_ml(&h, &y, &c, &opts).unwrap();
            assert_eq!(a.estimate, b.estimate);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let c = Constellation::bpsk();
        assert!(grid_build(&c, 0.0, &[0.0], 2).is_err());
        assert!(grid_build(&c, 2.5, &[0.0], 2).is_err());
        assert!(grid_build(&c, 0.5, &[0.0, 0.1, 0.2], 2).is_err());
    }

    #[test]
    fn grid_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let eps = rng.random_range(0.05..2.0);
            let delta: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let g = grid_build(&Constellation::bpsk(), eps, &delta, 3).unwrap();
            for (pts, dl) in g.scalar_points_per_coord.iter().zip(&g.delta) {
                assert!(*dl >= 0.0 && *dl < eps);
                assert!(pts.iter().all(|p| p.abs() <= 1.0));
                for w in pts.windows(2) {
                    assert!((w[1] - w[0] - eps).abs() < 1e-9);
                }
                // Covering: every point of [-1, 1] is within eps of the grid.
                for k in 0..=200 {
                    let x = -1.0 + k as f64 / 100.0;
                    assert!(pts.iter().any(|p| (p - x).abs() <= eps + 1e-12));
                }
            }
        }
    }

    #[test]
    fn psk_grid_is_restricted_to_the_disc() {
        let g = grid_build(&Constellation::psk4(), 0.5, &[0.0], 1).unwrap();
        assert_eq!(g.scalar_points_per_coord[0].len(), 5);
        // 5 x 5 product minus the four corners (+-1, +-0.5) and (+-0.5, +-1)
        // and (+-1, +-1): 25 - 12 = 13.
        assert_eq!(g.block_len(0), 13);
    }

    #[test]
    fn noiseless_full_rank_recovers_codeword() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let c = Constellation::bpsk();
        let opts = DecoderOptions::default();
        for n in [4, 8, 16] {
            let g = grid_build(&c, 0.25, &[0.0], n).unwrap();
            let h = sample_channel(n, n, FadingDistribution::Gaussian, &mut rng);
            let x0 = sample_codeword(&c, n, &mut rng);
            let out = decode_grid(&h, &(&h * &x0), &g, &c, &opts).unwrap();
            assert_eq!(out.estimate, x0);
            assert_eq!(out.relaxed_point.unwrap(), x0);
        }
    }

    #[test]
    fn branch_and_bound_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = Constellation::bpsk();
        let g = grid_build(&c, 0.25, &[0.1], 5).unwrap();
        let big = DecoderOptions::default();
        let small = DecoderOptions {
            max_exhaustive_bits: 12,
            ..big
        };
        for _ in 0..10 {
            let h = sample_channel(6, 5, FadingDistribution::Gaussian, &mut rng);
            let y = DVector::from_fn(6, |_, _| rng.random_range(-2.0..2.0));
            let a = decode_grid(&h, &y, &g, &c, &big).unwrap();
            let b = decode_grid(&h, &y, &g, &c, &small).unwrap();
            assert_eq!(a.diagnostic("branch_and_bound"), Some(0.0));
            assert_eq!(b.diagnostic("branch_and_bound"), Some(1.0));
            assert_eq!(a.relaxed_point, b.relaxed_point);
        }
    }

    #[test]
    fn grid_minimizer_is_near_the_solution_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let c = Constellation::bpsk();
        let opts = DecoderOptions::default();
        let g = grid_build(&c, 0.25, &[0.0], 3).unwrap();
        for _ in 0..20 {
            let h = sample_channel(2, 3, FadingDistribution::Gaussian, &mut rng);
            let y = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            let out = decode_grid(&h, &y, &g, &c, &opts).unwrap();
            let x = out.relaxed_point.unwrap();
            let s = solution_set(&h, &y, &c, &opts).unwrap();
            let p = linf_project(&s, &x).unwrap();
            assert!((&x - p).amax() <= 0.25 + 1e-6);
        }
    }

    #[test]
    fn grid_minimizer_can_sit_farther_than_epsilon() {
        // Shallow valley along (2, 1) near the corner x0 = (-1, -1): the grid
        // point nearest x0 loses to one a full pitch further out.
        let c = Constellation::bpsk();
        let h = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.0, 0.05]);
        let x0 = DVector::from_vec(vec![-1.0, -1.0]);
        let y = &h * &x0;
        let g = grid_build(&c, 0.1, &[0.062], 2).unwrap();
        let opts = DecoderOptions::default();
        let x = decode_grid(&h, &y, &g, &c, &opts).unwrap().relaxed_point.unwrap();
        assert!((&x - DVector::from_vec(vec![-0.838, -0.938])).amax() < 1e-12);
        let s = solution_set(&h, &y, &c, &opts).unwrap();
        let p = linf_project(&s, &x).unwrap();
        assert!(((&x - p).amax() - 0.162).abs() < 1e-6);
    }
}
