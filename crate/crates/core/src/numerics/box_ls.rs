//! Box-constrained least squares, `min ||y - Hx||^2` over `||x||_inf <= B`,
//! by accelerated projected gradient with function-value restart.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 20_000;

/// Outcome of [`box_ls`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoxLsResult {
    pub x_hat: DVector<f64>,
    /// `||y - H x_hat||^2`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `||P(x - g) - x||_2` with `g = H^T(Hx - y)` and `P` the box projection.
    pub kkt_residual: f64,
}

/// Largest squared singular value of `h` by power iteration on `H^T H`,
/// stopped once the Rayleigh quotient changes by less than `tol` relative.
pub fn spectral_norm_sq(h: &DMatrix<f64>, tol: f64) -> Result<f64> {
    if h.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let n = h.ncols();
    // Heaviest column plus an irrational-looking spread: never orthogonal to
    // the top right singular vector in practice.
    let heavy = (0..n)
        .max_by(|&a, &b| h.column(a).norm_squared().total_cmp(&h.column(b).norm_squared()))
        .unwrap_or(0);
    let mut v = DVector::from_fn(n, |j, _| 0.1 * ((j as f64 + 1.0) * 0.618_033_988_75).fract());
    v[heavy] += 1.0;
    v /= v.norm();

    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = h.tr_mul(&(h * &v));
        let next = v.dot(&w);
        let wn = w.norm();
        if wn == 0.0 {
            break;
        }
        v = w / wn;
        let done = (next - lambda).abs() <= tol * next;
        lambda = next;
        if done {
            break;
        }
    }
    Ok(lambda)
}

/// Box-constrained least squares from the origin.
pub fn box_ls(h: &DMatrix<f64>, y: &DVector<f64>, bound: f64, tol: f64, max_iter: usize) -> Result<BoxLsResult> {
    box_ls_from(h, y, bound, &DVector::zeros(h.ncols()), tol, max_iter)
}

/// Box-constrained least squares from `start` (projected onto the box first).
pub fn box_ls_from(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    bound: f64,
    start: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<BoxLsResult> {
    if h.nrows() != y.len() || h.ncols() != start.len() {
        return Err(Error::DimensionMismatch(format!(
            "H is {}x{}, y has length {}, start has length {}",
            h.nrows(),
            h.ncols(),
            y.len(),
            start.len()
        )));
    }
    if !(bound > 0.0) {
        return Err(invalid("B", "box bound must be positive"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let clamp = |v: &DVector<f64>| v.map(|x| x.clamp(-bound, bound));
    let kkt = |x: &DVector<f64>, g: &DVector<f64>| (clamp(&(x - g)) - x).norm();

    let mut x = clamp(start);
    let hx = h * &x;
    let mut gx = h.tr_mul(&(&hx - y));
    let mut f = (&hx - y).norm_squared();

    let lip = match spectral_norm_sq(h, 1e-10) {
        Ok(l) => l * 1.001,
        Err(Error::ZeroMatrix) => {
            return Ok(BoxLsResult {
                objective: f,
                kkt_residual: 0.0,
                x_hat: x,
                iterations: 0,
                converged: true,
            })
        }
        Err(e) => return Err(e),
    };

    let (mut z, mut gz) = (x.clone(), gx.clone());
    let mut theta = 1.0f64;
    let mut residual = kkt(&x, &gx);
    let mut iterations = 0;
    let mut restarted = false;
    while residual > tol && iterations < max_iter {
        iterations += 1;
        let x_new = clamp(&(&z - &gz / lip));
        let hx_new = h * &x_new;
        let r_new = &hx_new - y;
        let f_new = r_new.norm_squared();
        // A plain gradient step right after a restart is accepted even if
        // rounding makes it look uphill.
        if f_new > f && !restarted {
            // Momentum overshot: restart from the last iterate.
            theta = 1.0;
            z.copy_from(&x);
            gz.copy_from(&gx);
            restarted = true;
            continue;
        }
        restarted = false;
        let gx_new = h.tr_mul(&r_new);
        let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let mom = (theta - 1.0) / theta_new;
        z = &x_new + (&x_new - &x) * mom;
        gz = &gx_new + (&gx_new - &gx) * mom;
        theta = theta_new;
        x = x_new;
        gx = gx_new;
        f = f_new;
        residual = kkt(&x, &gx);
    }
    Ok(BoxLsResult {
        x_hat: x,
        objective: f,
        iterations,
        converged: residual <= tol,
        kkt_residual: residual,
    })
}
