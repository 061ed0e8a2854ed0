//! The box-LS solution polytope and the l-infinity projection onto it.

use nalgebra::{DMatrix, DVector};

use super::box_ls::{box_ls, BoxLsResult};
use super::nullspace::{null_basis, pseudo_solve};
use super::simplex::solve_standard;
use crate::error::{invalid, Error, Result};

/// Slack on the l-infinity level when refining over the optimal face.
pub const FACE_TOL: f64 = 1e-9;

/// Which minimizer set is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolutionSetKind {
    /// `{x in [-B, B]^N : Hx = z_star}` with `x_hat` from box-constrained LS.
    #[default]
    BoxConstrained,
    /// `{x : Hx = z_star}` with `x_hat = H^+ y` and no box.
    Affine,
}

/// `S = {x_hat + Z beta}`, intersected with the box for
/// [`SolutionSetKind::BoxConstrained`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    pub h: DMatrix<f64>,
    pub x_hat: DVector<f64>,
    /// Orthonormal null-space basis of `h`, possibly with zero columns.
    pub z: DMatrix<f64>,
    pub box_bound: f64,
    /// Common value of `Hx` over all members.
    pub z_star: DVector<f64>,
    /// `||y - H x_hat||^2`.
    pub objective: f64,
    pub kind: SolutionSetKind,
    /// Whether the particular solution met its solver tolerance.
    pub converged: bool,
}

impl SolutionSet {
    /// Builds the set for `(h, y)` from a box-LS (or pseudo-inverse) particular
    /// solution and the numerical null space of `h`.
    pub fn build(
        h: &DMatrix<f64>,
        y: &DVector<f64>,
        box_bound: f64,
        kind: SolutionSetKind,
        tol: f64,
        max_iter: usize,
        rank_tol: f64,
    ) -> Result<Self> {
        let z = null_basis(h, rank_tol)?;
        let (x_hat, converged) = match kind {
            SolutionSetKind::BoxConstrained => {
                let BoxLsResult { x_hat, converged, .. } = box_ls(h, y, box_bound, tol, max_iter)?;
                (x_hat, converged)
            }
            SolutionSetKind::Affine => {
                if h.nrows() != y.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "H has {} rows, y has length {}",
                        h.nrows(),
                        y.len()
                    )));
                }
                (pseudo_solve(h, y, rank_tol)?, true)
            }
        };
        let objective = (y - h * &x_hat).norm_squared();
        Self::from_parts(h.clone(), x_hat, z, box_bound, objective, kind).map(|s| Self { converged, ..s })
    }

    /// Assembles a set from an explicit particular point and null basis.
    pub fn from_parts(
        h: DMatrix<f64>,
        x_hat: DVector<f64>,
        z: DMatrix<f64>,
        box_bound: f64,
        objective: f64,
        kind: SolutionSetKind,
    ) -> Result<Self> {
        if h.ncols() != x_hat.len() || z.nrows() != x_hat.len() {
            return Err(Error::DimensionMismatch(format!(
                "H is {}x{}, x_hat has length {}, Z is {}x{}",
                h.nrows(),
                h.ncols(),
                x_hat.len(),
                z.nrows(),
                z.ncols()
            )));
        }
        if !(box_bound > 0.0) {
            return Err(invalid("B", "box bound must be positive"));
        }
        let z_star = &h * &x_hat;
        Ok(Self {
            h,
            x_hat,
            z,
            box_bound,
            z_star,
            objective,
            kind,
            converged: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_hat.len()
    }

    pub fn null_rank(&self) -> usize {
        self.z.ncols()
    }

    pub fn is_singleton(&self) -> bool {
        self.null_rank() == 0
    }

    pub fn feasibility_tol(&self) -> f64 {
        1e-6 * (1.0 + self.z_star.norm())
    }

    /// The point `x_hat + Z beta`.
    pub fn point(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.x_hat + &self.z * beta
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let in_box = match self.kind {
            SolutionSetKind::BoxConstrained => x.amax() <= self.box_bound * (1.0 + 1e-12),
            SolutionSetKind::Affine => true,
        };
        in_box && (&self.h * x - &self.z_star).norm() <= self.feasibility_tol()
    }

    fn boxed(&self) -> bool {
        self.kind == SolutionSetKind::BoxConstrained
    }
}

/// The member of `s` closest to `x_r` in l-infinity norm; among all such
/// minimizers the one closest in Euclidean norm.
///
/// The epigraph LP `min t s.t. |x_hat + Z beta - x_r| <= t` (plus the box) is
/// solved through its dual in standard form; the l2 refinement is an
/// active-set projection over the optimal face.
pub fn linf_project(s: &SolutionSet, x_r: &DVector<f64>) -> Result<DVector<f64>> {
    let n = s.dim();
    if x_r.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "x_r has length {}, solution set lives in dimension {n}",
            x_r.len()
        )));
    }
    if s.is_singleton() {
        return Ok(s.x_hat.clone());
    }
    let (beta, t_star) = epigraph_lp(s, x_r)?;
    let beta = refine_l2(s, x_r, beta, t_star)?;
    let mut x = s.point(&beta);
    if s.boxed() {
        x.apply(|v| *v = v.clamp(-s.box_bound, s.box_bound));
    }
    Ok(x)
}

/// Rows of `A w <= b` for `w = (beta, t)`.
fn epigraph_lp(s: &SolutionSet, x_r: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let (n, k) = s.z.shape();
    let per = if s.boxed() { 4 } else { 2 };
    let rows = per * n;
    // Dual standard form: M = A^T is (k + 1) x rows.
    let mut m = DMatrix::zeros(k + 1, rows);
    let mut cost = DVector::zeros(rows);
    for i in 0..n {
        let d = x_r[i] - s.x_hat[i];
        let base = per * i;
        for j in 0..k {
            let zij = s.z[(i, j)];
            m[(j, base)] = zij;
            m[(j, base + 1)] = -zij;
        }
        m[(k, base)] = -1.0;
        m[(k, base + 1)] = -1.0;
        cost[base] = d;
        cost[base + 1] = -d;
        if s.boxed() {
            for j in 0..k {
                let zij = s.z[(i, j)];
                m[(j, base + 2)] = zij;
                m[(j, base + 3)] = -zij;
            }
            cost[base + 2] = s.box_bound - s.x_hat[i];
            cost[base + 3] = s.box_bound + s.x_hat[i];
        }
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = -1.0;
    let sol = solve_standard(&m, &rhs, &cost)
        .map_err(|e| Error::LinearProgram(format!("l-infinity projection: {e}")))?;
    let w = sol.duals;
    Ok((w.rows(0, k).into_owned(), w[k].max(0.0)))
}

/// Projects `beta0 = Z^T (x_r - x_hat)` onto the face where every coordinate
/// stays within `t_star + FACE_TOL` of `x_r`, starting from the feasible
/// `beta`.
fn refine_l2(s: &SolutionSet, x_r: &DVector<f64>, mut beta: DVector<f64>, t_star: f64) -> Result<DVector<f64>> {
    let (n, k) = s.z.shape();
    let beta0 = s.z.tr_mul(&(x_r - &s.x_hat));
    // G beta <= h with rows (Z_i, hi_i - xhat_i) and (-Z_i, xhat_i - lo_i).
    let mut g = DMatrix::zeros(2 * n, k);
    let mut h = DVector::zeros(2 * n);
    for i in 0..n {
        let mut lo = x_r[i] - t_star - FACE_TOL;
        let mut hi = x_r[i] + t_star + FACE_TOL;
        if s.boxed() {
            lo = lo.max(-s.box_bound);
            hi = hi.min(s.box_bound);
        }
        for j in 0..k {
            g[(2 * i, j)] = s.z[(i, j)];
            g[(2 * i + 1, j)] = -s.z[(i, j)];
        }
        h[2 * i] = hi - s.x_hat[i];
        h[2 * i + 1] = s.x_hat[i] - lo;
    }

    let scale = 1.0 + beta0.amax() + beta.amax();
    // Working-set rows in the order of the QR columns.
    let mut working: Vec<usize> = Vec::new();
    let mut qr = ActiveQr::new(k);
    let max_iter = 10 * (2 * n + k) + 100;
    for _ in 0..max_iter {
        let grad = &beta0 - &beta;
        let p = qr.reject(&grad);
        if p.norm() <= 1e-12 * scale {
            if working.is_empty() {
                return Ok(beta);
            }
            // Least-squares multipliers of G_W^T lambda = grad.
            let lambda = qr.multipliers(&grad);
            let (worst, min) = lambda
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
            if min >= -1e-12 * scale {
                return Ok(beta);
            }
            working.remove(worst);
            qr.remove(worst);
            continue;
        }
        let gp = &g * &p;
        let slack = &h - &g * &beta;
        let mut step = 1.0;
        let mut blocking = None;
        for r in 0..2 * n {
            if gp[r] <= 1e-14 * scale || working.contains(&r) {
                continue;
            }
            let a = slack[r].max(0.0) / gp[r];
            if a < step {
                step = a;
                blocking = Some(r);
            }
        }
        beta.axpy(step, &p, 1.0);
        if let Some(r) = blocking {
            if qr.push(&g.row(r).transpose()) {
                working.push(r);
            }
        }
    }
    Ok(beta)
}

/// Thin QR factorization `G_W^T = Q R` of the working-set rows, updated by
/// Gram-Schmidt on insertion and Givens rotations on deletion.
struct ActiveQr {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    w: usize,
}

impl ActiveQr {
    fn new(dim: usize) -> Self {
        Self {
            q: DMatrix::zeros(dim, dim),
            r: DMatrix::zeros(dim, dim),
            w: 0,
        }
    }

    /// Component of `v` orthogonal to the span of the working rows.
    fn reject(&self, v: &DVector<f64>) -> DVector<f64> {
        let qw = self.q.columns(0, self.w);
        v - qw * qw.tr_mul(v)
    }

    /// Appends a row; returns false (leaving the factorization untouched) if
    /// it is numerically dependent on the current ones.
    fn push(&mut self, a: &DVector<f64>) -> bool {
        if self.w == self.q.ncols() {
            return false;
        }
        let mut v = a.clone();
        let mut coef = DVector::zeros(self.w);
        for _ in 0..2 {
            let qw = self.q.columns(0, self.w);
            let c = qw.tr_mul(&v);
            v -= qw * &c;
            coef += c;
        }
        let nv = v.norm();
        if nv <= 1e-10 * a.norm() {
            return false;
        }
        let w = self.w;
        self.q.column_mut(w).copy_from(&(v / nv));
        self.r.view_mut((0, w), (w, 1)).copy_from(&coef);
        self.r[(w, w)] = nv;
        self.w += 1;
        true
    }

    fn remove(&mut self, j: usize) {
        let w = self.w;
        for c in j..w - 1 {
            let next = self.r.column(c + 1).into_owned();
            self.r.column_mut(c).copy_from(&next);
        }
        self.r.column_mut(w - 1).fill(0.0);
        // Restore triangularity of the Hessenberg tail.
        for c in j..w - 1 {
            let (a, b) = (self.r[(c, c)], self.r[(c + 1, c)]);
            let rho = a.hypot(b);
            if rho == 0.0 {
                continue;
            }
            let (cs, sn) = (a / rho, b / rho);
            for col in c..w - 1 {
                let (x, y) = (self.r[(c, col)], self.r[(c + 1, col)]);
                self.r[(c, col)] = cs * x + sn * y;
                self.r[(c + 1, col)] = -sn * x + cs * y;
            }
            for row in 0..self.q.nrows() {
                let (x, y) = (self.q[(row, c)], self.q[(row, c + 1)]);
                self.q[(row, c)] = cs * x + sn * y;
                self.q[(row, c + 1)] = -sn * x + cs * y;
            }
        }
        self.r.row_mut(w - 1).fill(0.0);
        self.q.column_mut(w - 1).fill(0.0);
        self.w -= 1;
    }

    fn multipliers(&self, grad: &DVector<f64>) -> DVector<f64> {
        let w = self.w;
        let rhs = self.q.columns(0, w).tr_mul(grad);
        let mut lambda = DVector::zeros(w);
        for i in (0..w).rev() {
            let mut acc = rhs[i];
            for j in i + 1..w {
                acc -= self.r[(i, j)] * lambda[j];
            }
            lambda[i] = acc / self.r[(i, i)];
        }
        lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_channel, FadingDistribution};
    use crate::numerics::{DEFAULT_MAX_ITER, DEFAULT_RANK_TOL, DEFAULT_TOL};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(dir: &[f64], h: &[f64]) -> SolutionSet {
        let d = DVector::from_row_slice(dir);
        SolutionSet::from_parts(
            DMatrix::from_row_slice(1, 2, h),
            DVector::zeros(2),
            DMatrix::from_columns(&[d.normalize()]),
            1.0,
            0.0,
            SolutionSetKind::BoxConstrained,
        )
        .unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn diagonal_line_midpoint() {
        let s = line(&[1.0, 1.0], &[1.0, -1.0]);
        let p = linf_project(&s, &v(&[1.0, 0.0])).unwrap();
        assert!((p - v(&[0.5, 0.5])).amax() < 1e-9);
    }

    #[test]
    fn singleton_returns_particular_point() {
        let h = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let s = SolutionSet::build(
            &h,
            &v(&[0.3, -0.2, 0.1]),
            1.0,
            SolutionSetKind::BoxConstrained,
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        assert!(s.is_singleton());
        assert_eq!(linf_project(&s, &v(&[0.9, -0.9])).unwrap(), s.x_hat);
    }

    #[test]
    fn tie_break_picks_euclidean_nearest() {
        let s = line(&[1.0, 0.0], &[0.0, 1.0]);
        let p = linf_project(&s, &v(&[0.2, 0.9])).unwrap();
        assert!((p - v(&[0.2, 0.0])).amax() < 1e-9);
    }

    #[test]
    fn box_limits_the_segment() {
        // Closest point on {(t, -t)} to (3, 0) within the box is (1, -1).
        let s = line(&[1.0, -1.0], &[1.0, 1.0]);
        let p = linf_project(&s, &v(&[3.0, 0.0])).unwrap();
        assert!((p - v(&[1.0, -1.0])).amax() < 1e-9);
        let mut a = s.clone();
        a.kind = SolutionSetKind::Affine;
        let p = linf_project(&a, &v(&[3.0, 0.0])).unwrap();
        assert!((p - v(&[1.5, -1.5])).amax() < 1e-9);
    }

    #[test]
    fn membership() {
        let s = line(&[1.0, -1.0], &[1.0, 1.0]);
        assert!(s.contains(&v(&[0.5, -0.5])));
        assert!(!s.contains(&v(&[0.5, 0.5])));
        assert!(!s.contains(&v(&[1.1, -1.1])));
    }

    fn random_members(s: &SolutionSet, count: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<f64>> {
        let mut out = Vec::new();
        let mut attempts = 0;
        while out.len() < count && attempts < 100_000 {
            attempts += 1;
            let radius = rng.random_range(0.0..2.0 * s.box_bound);
            let beta = DVector::from_fn(s.null_rank(), |_, _| rng.random_range(-radius..radius));
            let x = s.point(&beta);
            if s.contains(&x) {
                out.push(x);
            }
        }
        out
    }

    #[test]
    fn projection_beats_random_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let n = rng.random_range(3..10);
            let m = rng.random_range(1..n);
            let h = sample_channel(m, n, FadingDistribution::Gaussian, &mut rng);
            let x0 = DVector::from_fn(n, |_, _| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
            let y = &h * x0 + DVector::from_fn(m, |_, _| rng.random_range(-0.3..0.3));
            let s = SolutionSet::build(
                &h,
                &y,
                1.0,
                SolutionSetKind::BoxConstrained,
                DEFAULT_TOL,
                DEFAULT_MAX_ITER,
                DEFAULT_RANK_TOL,
            )
            .unwrap();
            let x_r = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let p = linf_project(&s, &x_r).unwrap();
            assert!(s.contains(&p));
            let d = (&x_r - &p).amax();
            for m in random_members(&s, 100, &mut rng) {
                assert!(d <= (&x_r - m).amax() + 1e-7);
            }
        }
    }

    #[test]
    fn refinement_is_deterministic_and_first_order_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = sample_channel(3, 8, FadingDistribution::Gaussian, &mut rng);
        let y = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let s = SolutionSet::build(
            &h,
            &y,
            1.0,
            SolutionSetKind::BoxConstrained,
            DEFAULT_TOL,
            DEFAULT_MAX_ITER,
            DEFAULT_RANK_TOL,
        )
        .unwrap();
        let x_r = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let a = linf_project(&s, &x_r).unwrap();
        let b = linf_project(&s, &x_r).unwrap();
        assert_eq!(a, b);
        // No random member at the same l-infinity level is closer in l2.
        let level = (&x_r - &a).amax();
        for m in random_members(&s, 200, &mut rng) {
            if (&x_r - &m).amax() <= level {
                assert!((&x_r - &a).norm() <= (&x_r - &m).norm() + 1e-7);
            }
        }
    }
}
