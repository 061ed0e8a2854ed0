//! Dense two-phase revised simplex for standard-form programs
//! `min c^T x  s.t.  A x = b, x >= 0`.
//!
//! Pricing is Dantzig's most-negative reduced cost. After `rows + cols`
//! consecutive degenerate pivots the solver switches to Bland's rule
//! (lowest-index entering and leaving variables) until the objective strictly
//! improves again, which rules out cycling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;

/// Primal solution plus the simplex multipliers `pi` (`A^T pi <= c` at
/// optimality, `b^T pi = c^T x`).
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub duals: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
}

pub fn solve_standard(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Result<LpSolution> {
    let (rows, cols) = a.shape();
    if b.len() != rows || c.len() != cols {
        return Err(Error::DimensionMismatch(format!(
            "A is {rows}x{cols}, b has length {}, c has length {}",
            b.len(),
            c.len()
        )));
    }
    let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut a_s = a.clone();
    for (i, s) in sign.iter().enumerate() {
        if *s < 0.0 {
            a_s.row_mut(i).neg_mut();
        }
    }
    let b_s = DVector::from_fn(rows, |i, _| b[i] * sign[i]);

    let mut t = Tableau {
        a: a_s,
        b: b_s,
        basis: (cols..cols + rows).collect(),
        is_basic: (0..cols + rows).map(|j| j >= cols).collect(),
        binv: DMatrix::identity(rows, rows),
        xb: DVector::zeros(rows),
        iterations: 0,
        max_iter: 50 * (rows + cols) + 1000,
    };
    t.xb.copy_from(&t.b);

    // Phase 1: drive the artificial variables to zero.
    let mut phase1 = vec![0.0; cols + rows];
    phase1[cols..].iter_mut().for_each(|v| *v = 1.0);
    t.run(&phase1)?;
    let infeasibility: f64 = (0..rows).filter(|&i| t.basis[i] >= cols).map(|i| t.xb[i]).sum();
    if infeasibility > 1e-8 * (1.0 + t.b.amax()) {
        return Err(Error::LinearProgram(format!("infeasible (phase-one residual {infeasibility:e})")));
    }
    t.evict_artificials()?;

    // Phase 2.
    let mut cost = c.as_slice().to_vec();
    cost.extend(std::iter::repeat_n(0.0, rows));
    t.run(&cost)?;
    t.refactor()?;

    let mut x = DVector::zeros(cols);
    for (i, &j) in t.basis.iter().enumerate() {
        if j < cols {
            x[j] = t.xb[i].max(0.0);
        }
    }
    let cb = DVector::from_iterator(rows, t.basis.iter().map(|&j| cost[j]));
    let pi = t.binv.tr_mul(&cb);
    let duals = DVector::from_fn(rows, |i, _| pi[i] * sign[i]);
    Ok(LpSolution {
        objective: c.dot(&x),
        x,
        duals,
        iterations: t.iterations,
    })
}

struct Tableau {
    a: DMatrix<f64>,
    b: DVector<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    iterations: usize,
    max_iter: usize,
}

impl Tableau {
    fn cols(&self) -> usize {
        self.a.ncols()
    }

    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.cols() {
            self.a.column(j).into_owned()
        } else {
            let mut e = DVector::zeros(self.a.nrows());
            e[j - self.cols()] = 1.0;
            e
        }
    }

    fn run(&mut self, cost: &[f64]) -> Result<()> {
        let cols = self.cols();
        let dtol = 1e-9 * (1.0 + cost.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let streak_limit = self.a.nrows() + cols;
        let mut streak = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.iterations >= self.max_iter {
                return Err(Error::LinearProgram(format!(
                    "iteration limit {} reached",
                    self.max_iter
                )));
            }
            if since_refactor == REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
            let cb = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|&j| cost[j]));
            let pi = self.binv.tr_mul(&cb);
            let reduced = self.a.tr_mul(&pi);
            let bland = streak >= streak_limit;
            let mut entering = None;
            let mut best = -dtol;
            for j in 0..cols {
                if self.is_basic[j] {
                    continue;
                }
                let d = cost[j] - reduced[j];
                if bland {
                    if d < -dtol {
                        entering = Some(j);
                        break;
                    }
                } else if d < best {
                    best = d;
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                return Ok(());
            };

            let u = &self.binv * self.a.column(q);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..u.len() {
                if u[i] <= PIVOT_TOL {
                    continue;
                }
                let theta = self.xb[i].max(0.0) / u[i];
                leave = match leave {
                    None => Some((i, theta)),
                    Some((l, best_theta)) => {
                        let tie = (theta - best_theta).abs() <= 1e-12 * (1.0 + best_theta);
                        let better = if tie {
                            if bland {
                                self.basis[i] < self.basis[l]
                            } else {
                                u[i] > u[l]
                            }
                        } else {
                            theta < best_theta
                        };
                        if better {
                            Some((i, theta))
                        } else {
                            Some((l, best_theta))
                        }
                    }
                };
            }
            let Some((l, theta)) = leave else {
                return Err(Error::LinearProgram("unbounded".into()));
            };
            streak = if theta <= 1e-12 { streak + 1 } else { 0 };
            self.pivot(l, q, &u);
            since_refactor += 1;
        }
    }

    fn pivot(&mut self, l: usize, q: usize, u: &DVector<f64>) {
        let piv = u[l];
        let theta = self.xb[l] / piv;
        self.xb.axpy(-theta, u, 1.0);
        self.xb[l] = theta;
        let r = self.binv.row(l).transpose() / piv;
        let mut w = u.clone();
        w[l] -= 1.0;
        self.binv.ger(-1.0, &w, &r, 1.0);
        self.is_basic[self.basis[l]] = false;
        self.basis[l] = q;
        self.is_basic[q] = true;
        self.iterations += 1;
    }

    fn refactor(&mut self) -> Result<()> {
        let cols: Vec<DVector<f64>> = self.basis.iter().map(|&j| self.column(j)).collect();
        let bmat = DMatrix::from_columns(&cols);
        self.binv = bmat
            .try_inverse()
            .ok_or_else(|| Error::LinearProgram("singular basis".into()))?;
        self.xb = &self.binv * &self.b;
        Ok(())
    }

    fn evict_artificials(&mut self) -> Result<()> {
        let cols = self.cols();
        for l in 0..self.basis.len() {
            if self.basis[l] < cols {
                continue;
            }
            let row = self.a.tr_mul(&self.binv.row(l).transpose());
            let pick = (0..cols)
                .filter(|&j| !self.is_basic[j])
                .max_by(|&x, &y| row[x].abs().total_cmp(&row[y].abs()))
                .filter(|&j| row[j].abs() > PIVOT_TOL);
            let Some(j) = pick else {
                return Err(Error::LinearProgram("redundant equality constraint".into()));
            };
            let u = &self.binv * self.a.column(j);
            self.pivot(l, j, &u);
        }
        self.refactor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(rows: usize, cols: usize, a: &[f64], b: &[f64], c: &[f64]) -> Result<LpSolution> {
        solve_standard(
            &DMatrix::from_row_slice(rows, cols, a),
            &DVector::from_row_slice(b),
            &DVector::from_row_slice(c),
        )
    }

    #[test]
    fn textbook_two_variable() {
        // min -x1 - x2 s.t. x1 + 2x2 <= 4, 3x1 + x2 <= 6.
        let s = lp(2, 4, &[1.0, 2.0, 1.0, 0.0, 3.0, 1.0, 0.0, 1.0], &[4.0, 6.0], &[-1.0, -1.0, 0.0, 0.0])
            .unwrap();
        assert!((s.x[0] - 1.6).abs() < 1e-12);
        assert!((s.x[1] - 1.2).abs() < 1e-12);
        assert!((s.objective + 2.8).abs() < 1e-12);
        // Strong duality.
        assert!((s.duals.dot(&DVector::from_vec(vec![4.0, 6.0])) - s.objective).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_rows_are_flipped() {
        // min x1 + x2 s.t. -x1 - x2 + s = -2 (x1 + x2 >= 2).
        let s = lp(1, 3, &[-1.0, -1.0, 1.0], &[-2.0], &[1.0, 1.0, 0.0]).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-12);
        assert!((s.duals[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn beale_cycling_example() {
        #[rustfmt::skip]
        let a = [
            1.0, 0.0, 0.0, 0.25, -8.0, -1.0, 9.0,
            0.0, 1.0, 0.0, 0.5, -12.0, -0.5, 3.0,
            0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0,
        ];
        let c = [0.0, 0.0, 0.0, -0.75, 20.0, -0.5, 6.0];
        let s = lp(3, 7, &a, &[0.0, 0.0, 1.0], &c).unwrap();
        assert!((s.objective + 1.25).abs() < 1e-12, "{}", s.objective);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x1 + x2 = -1 with x >= 0.
        assert!(matches!(lp(1, 2, &[1.0, 1.0], &[-1.0], &[1.0, 1.0]), Err(Error::LinearProgram(_))));
        // min -x1 s.t. x1 - x2 = 0.
        assert!(matches!(lp(1, 2, &[1.0, -1.0], &[0.0], &[-1.0, 0.0]), Err(Error::LinearProgram(_))));
    }
}
