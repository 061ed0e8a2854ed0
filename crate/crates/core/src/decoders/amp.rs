use nalgebra::{DMatrix, DVector};

use super::{check_dims, DecodeOutput, DecoderId};
use crate::error::{Error, Result};
use crate::model::{sgn, Constellation};

/// Approximate message passing for BPSK with the posterior-mean (tanh)
/// denoiser and Onsager correction.
///
/// Internally `A = H / sqrt(m)` and `y_s = y / sqrt(m)`. Starting from
/// `x = 0, z = y_s`, each iteration computes
///
/// ```text
/// r   = x + A^T z
/// tau = ||z||^2 / m
/// x'  = tanh(r / tau)
/// z'  = y_s - A x' + (n / m) z mean((1 - tanh^2(r / tau)) / tau)
/// ```
///
/// and the estimate is `sgn(x + A^T z)` after the last iteration, so
/// `iters = 0` gives `sgn(A^T y_s)`. A non-finite iterate stops the
/// recursion; the last finite state is used and `diverged` is set.
pub fn decode_amp(h: &DMatrix<f64>, y: &DVector<f64>, c: &Constellation, iters: usize) -> Result<DecodeOutput> {
    if !c.is_bpsk() {
        return Err(Error::Unsupported {
            decoder: "amp",
            reason: "only BPSK (points -1, +1) is supported".into(),
        });
    }
    check_dims(h, y, 1)?;
    let (m, n) = h.shape();
    let scale = (m as f64).sqrt();
    let a = h / scale;
    let ys = y / scale;
    let ratio = n as f64 / m as f64;

    let mut x = DVector::zeros(n);
    let mut z = ys.clone();
    let mut done = 0;
    let mut diverged = false;
    for _ in 0..iters {
        let r = &x + a.tr_mul(&z);
        let tau = (z.norm_squared() / m as f64).max(f64::MIN_POSITIVE);
        let x_new = r.map(|v| (v / tau).tanh());
        let onsager = x_new.iter().map(|t| (1.0 - t * t) / tau).sum::<f64>() / n as f64;
        let z_new = &ys - &a * &x_new + &z * (ratio * onsager);
        if !(x_new.iter().all(|v| v.is_finite()) && z_new.iter().all(|v| v.is_finite())) {
            diverged = true;
            break;
        }
        x = x_new;
        z = z_new;
        done += 1;
    }
    let r = &x + a.tr_mul(&z);
    Ok(DecodeOutput::new(DecoderId::Amp, sgn(&r), Some(r))
        .with("iterations", done as f64)
        .with("diverged", f64::from(u8::from(diverged))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_channel, sample_codeword, transmit, FadingDistribution};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthonormal_columns_noiseless() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = Constellation::bpsk();
        let (m, n) = (40, 20);
        let g = sample_channel(m, n, FadingDistribution::Gaussian, &mut rng);
        let q = g.qr().q();
        let h = q * (m as f64).sqrt();
        let x0 = sample_codeword(&c, n, &mut rng);
        let out = decode_amp(&h, &(&h * &x0), &c, 10).unwrap();
        assert_eq!(out.estimate, x0);
    }

    #[test]
    fn zero_iterations_is_matched_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = sample_channel(5, 7, FadingDistribution::Gaussian, &mut rng);
        let y = DVector::from_fn(5, |i, _| i as f64 - 2.0);
        let out = decode_amp(&h, &y, &Constellation::bpsk(), 0).unwrap();
        assert_eq!(out.estimate, sgn(&(h.tr_mul(&y) / 5.0)));
    }

    #[test]
    fn rejects_non_bpsk() {
        let h = DMatrix::identity(2, 2);
        let y = DVector::zeros(2);
        assert!(matches!(
            decode_amp(&h, &y, &Constellation::pam4(), 5),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn more_antennas_fewer_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = Constellation::bpsk();
        let n = 128;
        let mean_errors = |m: usize, rng: &mut ChaCha8Rng| {
            let mut errors = 0;
            for _ in 0..200 {
                let h = sample_channel(m, n, FadingDistribution::Gaussian, rng);
                let x0 = sample_codeword(&c, n, rng);
                let y = transmit(&h, &x0, 0.1, rng).unwrap();
                let out = decode_amp(&h, &y, &c, 50).unwrap();
                errors += crate::model::symbol_errors(1, &out.estimate, &x0);
            }
            errors as f64 / (200 * n) as f64
        };
        let hi = mean_errors(90, &mut rng);
        let lo = mean_errors(38, &mut rng);
        assert!(hi < lo, "alpha 0.7: {hi}, alpha 0.3: {lo}");
    }
}
