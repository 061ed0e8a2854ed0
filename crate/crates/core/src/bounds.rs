//! Analytical error bounds: Gaussian tail, pairwise error exponent,
//! chi-square moment generating function, the Markov tail bound on
//! `||sum_j c_j h_j||^2`, and the union bounds over error patterns.
//!
//! Probabilities are clamped to `[0, 1]`. Large combinatorial sums are
//! evaluated in the log domain.

use nalgebra::{DMatrix, DVector};
use statrs::function::factorial::ln_binomial;

use crate::error::{invalid, Error, Result};
use crate::numerics::box_ls;

/// Positions (zero-based, sorted, distinct) where two codewords differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorPattern {
    n: usize,
    indices: Vec<usize>,
}

impl ErrorPattern {
    pub fn new(n: usize, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(invalid("pattern", "needs at least one index"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(invalid("pattern", format!("index {bad} out of range for n = {n}")));
        }
        Ok(Self { n, indices })
    }

    /// The first `i` positions.
    pub fn leading(n: usize, i: usize) -> Result<Self> {
        Self::new(n, (0..i).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of differing positions.
    pub fn i(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }
}

/// Parameters shared by the bound calculators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub sigma: f64,
    /// Chernoff / MGF parameter.
    pub t: f64,
    /// Exponent constant `a`; `None` means `alpha / 4`.
    pub a: Option<f64>,
    pub k_prime: f64,
    pub epsilon: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            t: 1.0,
            a: None,
            k_prime: 0.02,
            epsilon: 0.25,
        }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("sigma", self.sigma), ("t", self.t), ("k_prime", self.k_prime), ("epsilon", self.epsilon)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if let Some(a) = self.a {
            if !(a > 0.0 && a.is_finite()) {
                return Err(invalid("a", format!("must be positive, got {a}")));
            }
        }
        if self.k_prime > 1.0 {
            return Err(invalid("k_prime", format!("must not exceed 1, got {}", self.k_prime)));
        }
        Ok(())
    }

    pub fn a_for(&self, alpha: f64) -> f64 {
        self.a.unwrap_or(alpha / 4.0)
    }
}

/// Gaussian tail `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `Q(x) <= exp(-x^2 / 2) / 2` for `x >= 0`.
pub fn q_upper(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(invalid("x", format!("must be nonnegative, got {x}")));
    }
    Ok(0.5 * (-0.5 * x * x).exp())
}

/// Result of a pairwise-exponent evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseExponent {
    /// `min ||H c||^2 / (8 sigma^2)`.
    pub value: f64,
    /// `min ||H c||^2`.
    pub min_norm_sq: f64,
    /// A minimizing `c`.
    pub c: DVector<f64>,
    pub converged: bool,
}

/// `min ||H c||^2 / (8 sigma^2)` with `c_j in [1, 2]` on the pattern and
/// `c_j in [0, 1]` elsewhere.
pub fn pairwise_exponent(h: &DMatrix<f64>, pattern: &ErrorPattern, sigma: f64) -> Result<PairwiseExponent> {
    if pattern.n() != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "pattern is over {} positions, H has {} columns",
            pattern.n(),
            h.ncols()
        )));
    }
    let n = h.ncols();
    let lo: Vec<f64> = (0..n).map(|j| if pattern.contains(j) { 1.0 } else { 0.0 }).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + 1.0).collect();
    box_exponent(h, &lo, &hi, sigma)
}

/// `min ||H c||^2 / (8 sigma^2)` over the box `lo <= c <= hi`.
pub fn box_exponent(h: &DMatrix<f64>, lo: &[f64], hi: &[f64], sigma: f64) -> Result<PairwiseExponent> {
    let n = h.ncols();
    if lo.len() != n || hi.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "bounds have lengths {} and {}, H has {n} columns",
            lo.len(),
            hi.len()
        )));
    }
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    if let Some(j) = (0..n).find(|&j| !(lo[j] <= hi[j])) {
        return Err(invalid("bounds", format!("empty interval at coordinate {j}")));
    }
    // c = center + D u with u in [-1, 1]^n, D = diag(half widths).
    let center = DVector::from_fn(n, |j, _| 0.5 * (lo[j] + hi[j]));
    let half = DVector::from_fn(n, |j, _| 0.5 * (hi[j] - lo[j]));
    let scaled = DMatrix::from_fn(h.nrows(), n, |i, j| h[(i, j)] * half[j]);
    let target = -(h * &center);
    let (u, converged) = if scaled.iter().all(|&v| v == 0.0) {
        (DVector::zeros(n), true)
    } else {
        let r = box_ls(&scaled, &target, 1.0, 1e-11, 200_000)?;
        (r.x_hat, r.converged)
    };
    let c = center + half.component_mul(&u);
    let min_norm_sq = (h * &c).norm_squared();
    Ok(PairwiseExponent {
        value: min_norm_sq / (8.0 * sigma * sigma),
        min_norm_sq,
        c,
        converged,
    })
}

/// `E exp(-t ||sum_j c_j h_j||^2) = (1 + 2t sum_j c_j^2)^(-m/2)` for
/// `h_j` i.i.d. `N(0, I_m)`.
pub fn chi_sq_mgf_bound(t: f64, c: &[f64], m: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("t", format!("must be positive, got {t}")));
    }
    let s: f64 = c.iter().map(|v| v * v).sum();
    Ok((1.0 + 2.0 * t * s).powf(-(m as f64) / 2.0))
}

/// Markov/Chernoff tail bound on `P(||sum c_j h_j||^2 < a n ln n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    /// `a n ln n` with `a = alpha / 4`.
    pub threshold: f64,
    /// `min(1, exp(t * threshold) (1 + 2 t s)^(-alpha n / 2))`.
    pub probability: f64,
}

pub fn lemma1_tail_bound(n: usize, alpha: f64, t: f64, sum_c_sq_lower: f64) -> Result<TailBound> {
    if n < 2 {
        return Err(invalid("n", format!("must be at least 2, got {n}")));
    }
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    if !(t > 0.0) {
        return Err(invalid("t", format!("must be positive, got {t}")));
    }
    if !(sum_c_sq_lower >= 0.0) {
        return Err(invalid("sum_c_sq_lower", "must be nonnegative"));
    }
    let nf = n as f64;
    let threshold = alpha / 4.0 * nf * nf.ln();
    let log_p = t * threshold - alpha * nf / 2.0 * (2.0 * t * sum_c_sq_lower).ln_1p();
    Ok(TailBound {
        threshold,
        probability: log_p.min(0.0).exp(),
    })
}

/// The `t` in `(0, t_max]` minimizing [`lemma1_tail_bound`], by golden-section
/// search on the (convex) log bound.
pub fn optimal_chernoff_t(n: usize, alpha: f64, sum_c_sq_lower: f64, t_max: f64) -> Result<(f64, TailBound)> {
    if !(t_max > 0.0) {
        return Err(invalid("t_max", "must be positive"));
    }
    lemma1_tail_bound(n, alpha, 1.0, sum_c_sq_lower)?;
    let nf = n as f64;
    let threshold = alpha / 4.0 * nf * nf.ln();
    let f = |t: f64| t * threshold - alpha * nf / 2.0 * (2.0 * t * sum_c_sq_lower).ln_1p();
    let t = golden_section(f, 0.0, t_max, 1e-12);
    let t = t.max(f64::MIN_POSITIVE);
    Ok((t, lemma1_tail_bound(n, alpha, t, sum_c_sq_lower)?))
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Base-2 binary entropy with `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid("x", format!("must lie in [0, 1], got {x}")));
    }
    Ok(entropy(x, std::f64::consts::LN_2))
}

fn entropy(x: f64, ln_base: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.ln() / ln_base };
    term(x) + term(1.0 - x)
}

/// Smallest integer `i >= k' n`, guarded against rounding just above an
/// integer.
pub fn min_errors(n: usize, k_prime: f64) -> usize {
    ((k_prime * n as f64 - 1e-9).ceil().max(0.0) as usize).max(1)
}

/// `sum_{k'n <= i <= n} binom(n, i) p_i / 2`, clamped to 1. `p[i]` is the
/// per-pattern bound for `i` errors; `p[0]` is ignored.
pub fn union_bound(n: usize, k_prime: f64, p: &[f64]) -> Result<f64> {
    if !(k_prime > 0.0 && k_prime <= 1.0) {
        return Err(invalid("k_prime", format!("must lie in (0, 1], got {k_prime}")));
    }
    if p.len() < n + 1 {
        return Err(invalid("p", format!("need entries for i = 0..={n}, got {}", p.len())));
    }
    let start = min_errors(n, k_prime);
    let mut total = 0.0;
    for (i, &pi) in p.iter().enumerate().take(n + 1).skip(start) {
        if !(0.0..=1.0).contains(&pi) {
            return Err(invalid("p", format!("p[{i}] = {pi} is not a probability")));
        }
        if pi > 0.0 {
            total += (ln_binomial(n as u64, i as u64) + pi.ln() - std::f64::consts::LN_2).exp();
        }
    }
    Ok(total.min(1.0))
}

/// Logarithm base for the grid union bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Two,
    E,
}

impl LogBase {
    fn ln(self) -> f64 {
        match self {
            LogBase::Two => std::f64::consts::LN_2,
            LogBase::E => 1.0,
        }
    }
}

/// `n b^{n (max_{k'n <= i <= n} H_b(i/n) - log_b eps - a log_b n)}`, clamped to 1.
pub fn grid_union_bound(n: usize, k_prime: f64, epsilon: f64, a: f64, base: LogBase) -> Result<f64> {
    if n < 2 {
        return Err(invalid("n", format!("must be at least 2, got {n}")));
    }
    if !(k_prime > 0.0 && k_prime <= 1.0) {
        return Err(invalid("k_prime", format!("must lie in (0, 1], got {k_prime}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", format!("must lie in (0, 1), got {epsilon}")));
    }
    if !(a > 0.0) {
        return Err(invalid("a", format!("must be positive, got {a}")));
    }
    let lb = base.ln();
    let nf = n as f64;
    let h_max = (min_errors(n, k_prime)..=n)
        .map(|i| entropy(i as f64 / nf, lb))
        .fold(0.0, f64::max);
    let exponent = nf * (h_max - epsilon.ln() / lb - a * nf.ln() / lb);
    let ln_bound = nf.ln() + exponent * lb;
    Ok(ln_bound.min(0.0).exp())
}

/// `P_e <= k' + P_e^{k'}`, clamped to 1.
pub fn per_user_bound(k_prime: f64, p_block: f64) -> Result<f64> {
    for (name, v) in [("k_prime", k_prime), ("p_block", p_block)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid(name, format!("must lie in [0, 1], got {v}")));
        }
    }
    Ok((k_prime + p_block).min(1.0))
}

/// Chi-square bound on the averaged pairwise term for `i` BPSK errors:
/// `(1 + i / (4 sigma^2))^(-m/2)`, i.e. [`chi_sq_mgf_bound`] at
/// `t = 1 / (8 sigma^2)` with `sum c_j^2 >= i`.
pub fn bpsk_pattern_bound(i: usize, m: usize, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    Ok((1.0 + i as f64 / (4.0 * sigma * sigma)).powf(-(m as f64) / 2.0))
}
