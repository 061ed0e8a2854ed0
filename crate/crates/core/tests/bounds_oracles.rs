use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use simo_isq::bounds::*;
use simo_isq::model::{sample_channel, FadingDistribution};

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Composite Simpson integral of the standard normal density over
/// `[x, x + 12]` with compensated summation. The tail beyond is below
/// `1e-30` of the result for `x >= 0`.
fn q_quadrature(x: f64) -> f64 {
    let panels = 200_000;
    let h = 12.0 / panels as f64;
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for k in 0..=panels {
        let w = if k == 0 || k == panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let term = w * density(x + k as f64 * h) - comp;
        let t = sum + term;
        comp = (t - sum) - term;
        sum = t;
    }
    sum * h / 3.0
}

#[test]
fn q_function_matches_quadrature() {
    assert!((q_function(1.96) - 0.0249979).abs() < 1e-6);
    assert!((q_quadrature(1.96) - 0.0249979).abs() < 1e-6);
    for k in 0..=32 {
        let x = k as f64 * 0.25;
        let (q, oracle) = (q_function(x), q_quadrature(x));
        assert!(((q - oracle) / oracle).abs() < 1e-12, "x = {x}: {q} vs {oracle}");
        assert!((q_function(-x) - (1.0 - oracle)).abs() < 1e-12);
    }
}

#[test]
fn q_upper_dominates() {
    assert!((q_function(2.0) - 0.02275).abs() < 1e-5);
    assert!(q_function(2.0) <= q_upper(2.0).unwrap());
    assert!((q_upper(2.0).unwrap() - 0.06767).abs() < 1e-5);
    for k in 0..=60 {
        let x = k as f64 * 0.1;
        assert!(q_upper(x).unwrap() >= q_function(x));
    }
}

fn dense_grid_min(h: &DMatrix<f64>, pattern: &ErrorPattern, points: usize) -> f64 {
    let n = h.ncols();
    let mut idx = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let c = DVector::from_fn(n, |j, _| {
            let base = if pattern.contains(j) { 1.0 } else { 0.0 };
            base + idx[j] as f64 / (points - 1) as f64
        });
        best = best.min((h * c).norm_squared());
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < points {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Exact box-constrained minimum of `||H c||^2` by enumerating every
/// assignment of coordinates to {lower, upper, free} and solving the
/// equality-constrained least squares on the free block.
fn active_set_min(h: &DMatrix<f64>, lo: &[f64], hi: &[f64]) -> f64 {
    let n = h.ncols();
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&j| state[j] == 2).collect();
        let mut c = DVector::from_fn(n, |j, _| if state[j] == 1 { hi[j] } else { lo[j] });
        if !free.is_empty() {
            let hf = DMatrix::from_fn(h.nrows(), free.len(), |i, k| h[(i, free[k])]);
            for &j in &free {
                c[j] = 0.0;
            }
            let rhs = -(h * &c);
            let svd = hf.clone().svd(true, true);
            let sol = svd.solve(&rhs, 1e-12).unwrap();
            for (k, &j) in free.iter().enumerate() {
                c[j] = sol[k];
            }
        }
        if (0..n).all(|j| c[j] >= lo[j] - 1e-12 && c[j] <= hi[j] + 1e-12) {
            best = best.min((h * &c).norm_squared());
        }
    }
    best
}

fn pattern_box(pattern: &ErrorPattern) -> (Vec<f64>, Vec<f64>) {
    let n = pattern.n();
    let lo = (0..n).map(|j| if pattern.contains(j) { 1.0 } else { 0.0 }).collect();
    let hi = (0..n).map(|j| if pattern.contains(j) { 2.0 } else { 1.0 }).collect();
    (lo, hi)
}

#[test]
fn pairwise_exponent_matches_active_set_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let sigma = 0.8;
    for (m, n) in [(2, 3), (3, 4), (4, 4), (5, 3)] {
        for _ in 0..10 {
            let h = sample_channel(m, n, FadingDistribution::Gaussian, &mut rng);
            let pattern = ErrorPattern::new(n, vec![0, n - 1]).unwrap();
            let (lo, hi) = pattern_box(&pattern);
            let e = pairwise_exponent(&h, &pattern, sigma).unwrap();
            let exact = active_set_min(&h, &lo, &hi);
            let scale = h.norm_squared();
            assert!((e.min_norm_sq - exact).abs() <= 1e-7 * scale, "{} vs {exact}", e.min_norm_sq);
            assert!((e.value - e.min_norm_sq / (8.0 * sigma * sigma)).abs() <= 1e-15 * (1.0 + e.value));
        }
    }
}

#[test]
fn pairwise_exponent_against_dense_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let sigma = 0.5;
    let pattern = ErrorPattern::new(3, vec![0, 2]).unwrap();
    let spacing = 1.0 / 50.0;
    for _ in 0..20 {
        let h = sample_channel(2, 3, FadingDistribution::Gaussian, &mut rng);
        let e = pairwise_exponent(&h, &pattern, sigma).unwrap();
        assert!(e.converged);
        let grid = dense_grid_min(&h, &pattern, 51);
        // No grid point beats the continuous minimum.
        assert!(e.min_norm_sq <= grid * (1.0 + 1e-9) + 1e-12);
        // The grid point nearest the minimizer is within half a pitch per
        // coordinate, which caps how much worse the grid can be.
        let grad = (h.transpose() * (&h * &e.c)) * 2.0;
        let half = spacing / 2.0;
        let slack = grad.abs().sum() * half + h.norm_squared() * 3.0 * half * half;
        assert!(grid - e.min_norm_sq <= slack + 1e-12, "{grid} vs {}", e.min_norm_sq);
    }
}

#[test]
fn pairwise_exponent_scales_quadratically() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let pattern = ErrorPattern::new(4, vec![1, 3]).unwrap();
    for s in [0.5, 2.0, 3.0] {
        let h = sample_channel(3, 4, FadingDistribution::Gaussian, &mut rng);
        let a = pairwise_exponent(&h, &pattern, 1.0).unwrap().value;
        let b = pairwise_exponent(&(&h * s), &pattern, 1.0).unwrap().value;
        assert!((b - s * s * a).abs() <= 1e-6 * (1.0 + b));
    }
}

#[test]
fn relaxing_a_coordinate_never_raises_the_exponent() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..20 {
        let h = sample_channel(3, 5, FadingDistribution::Gaussian, &mut rng);
        let mut lo = vec![1.0, 1.0, 1.0, 0.0, 0.0];
        let mut hi = vec![2.0, 2.0, 2.0, 1.0, 1.0];
        let mut last = box_exponent(&h, &lo, &hi, 1.0).unwrap().value;
        for j in 0..3 {
            // Remove j from the error set; it may now also sit at 0.
            lo[j] = 0.0;
            hi[j] = 2.0;
            let next = box_exponent(&h, &lo, &hi, 1.0).unwrap().value;
            assert!(next <= last + 1e-9 * (1.0 + last));
            last = next;
        }
    }
}

#[test]
fn chi_square_mgf_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let (t, c, m) = (1.0, [1.0, 0.5], 4);
    let samples = 100_000;
    let mut acc = 0.0;
    for _ in 0..samples {
        let mut norm = 0.0;
        for _ in 0..m {
            let v: f64 = c
                .iter()
                .map(|cj| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    cj * g
                })
                .sum();
            norm += v * v;
        }
        acc += (-t * norm).exp();
    }
    let empirical = acc / samples as f64;
    let formula = chi_sq_mgf_bound(t, &c, m).unwrap();
    assert!(((empirical - formula) / formula).abs() < 0.02, "{empirical} vs {formula}");
}

#[test]
fn lemma1_arithmetic() {
    let b = lemma1_tail_bound(10, 0.4, 1.0, 1.0).unwrap();
    assert!((b.threshold - 0.1 * 10.0 * 10f64.ln()).abs() < 1e-12);
    assert!((b.threshold - 0.1 * 10.0 * 10f64.ln()).abs() < 1e-12);

    let (n, alpha, kp) = (40usize, 1.0, 0.5);
    let b = lemma1_tail_bound(n, alpha, 1.0, kp * n as f64).unwrap();
    let rhs = (-(alpha / 4.0) * n as f64 * (n as f64).ln()).exp();
    assert!(b.probability <= rhs, "{} vs {rhs}", b.probability);
}

#[test]
fn entropy_arithmetic() {
    let x: f64 = 0.11;
    let oracle = -x * x.log2() - (1.0 - x) * (1.0 - x).log2();
    let h = binary_entropy(x).unwrap();
    assert!((h - oracle).abs() <= 1e-12);
    assert!((h - 0.49993).abs() < 1e-4);
}

/// Exact rational value of `sum_{i >= start} binom(n, i) / 2 * (1 + 2i)^(-5)`.
fn union_oracle(n: u64, start: u64) -> f64 {
    let mut total = BigRational::from_integer(BigInt::from(0));
    for i in start..=n {
        let mut binom = BigInt::from(1);
        for k in 0..i {
            binom = binom * BigInt::from(n - k) / BigInt::from(k + 1);
        }
        let denom = BigInt::from(2) * BigInt::from(1 + 2 * i).pow(5);
        total += BigRational::new(binom, denom);
    }
    let (num, den) = (total.numer().clone(), total.denom().clone());
    let scale = BigInt::from(10).pow(30);
    let scaled: BigInt = num * &scale / den;
    scaled.to_string().parse::<f64>().unwrap() / 1e30
}

#[test]
fn union_bound_high_precision_oracle() {
    let n = 10;
    // p_i from the chi-square MGF with t = 1, sum c^2 = i, m = alpha n = 10.
    let p: Vec<f64> = (0..=n)
        .map(|i| chi_sq_mgf_bound(1.0, &vec![1.0; i], n).unwrap())
        .collect();
    for (kp, start) in [(0.1, 1), (0.3, 3), (0.55, 6), (1.0, 10)] {
        let got = union_bound(n, kp, &p).unwrap();
        let oracle = union_oracle(n as u64, start);
        assert!(((got - oracle) / oracle).abs() < 1e-10, "k' = {kp}: {got} vs {oracle}");
    }
}

#[test]
fn grid_union_bound_arithmetic() {
    let b = grid_union_bound(16, 0.25, 0.25, 2.0, LogBase::Two).unwrap();
    let oracle = 16.0 * 2f64.powi(-80);
    assert!(((b - oracle) / oracle).abs() < 1e-12);
}

proptest! {
    #[test]
    fn chi_square_bound_is_monotone(t in 0.01f64..5.0, s in 0.0f64..10.0, m in 1usize..50, bump in 0.01f64..2.0) {
        let base = chi_sq_mgf_bound(t, &[s.sqrt()], m).unwrap();
        prop_assert!(chi_sq_mgf_bound(t + bump, &[s.sqrt()], m).unwrap() <= base);
        prop_assert!(chi_sq_mgf_bound(t, &[(s + bump).sqrt()], m).unwrap() <= base);
        prop_assert!(chi_sq_mgf_bound(t, &[s.sqrt()], m + 1).unwrap() <= base);
        prop_assert!(base > 0.0 && base <= 1.0);
    }

    #[test]
    fn union_bound_monotonicity(
        p in proptest::collection::vec(0.0f64..1.0, 13),
        k1 in 0.01f64..1.0,
        k2 in 0.01f64..1.0,
        i in 1usize..13,
        bump in 0.0f64..1.0,
    ) {
        let n = 12;
        let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        prop_assert!(union_bound(n, hi, &p).unwrap() <= union_bound(n, lo, &p).unwrap());
        let mut q = p.clone();
        q[i] = (q[i] + bump).min(1.0);
        prop_assert!(union_bound(n, lo, &q).unwrap() >= union_bound(n, lo, &p).unwrap());
    }

    #[test]
    fn grid_union_bound_decreases_in_a(n in 2usize..200, kp in 0.01f64..1.0, eps in 0.01f64..0.99, a in 0.01f64..5.0, bump in 0.01f64..5.0) {
        let lo = grid_union_bound(n, kp, eps, a, LogBase::Two).unwrap();
        let hi = grid_union_bound(n, kp, eps, a + bump, LogBase::Two).unwrap();
        prop_assert!(hi <= lo);
        prop_assert!((0.0..=1.0).contains(&lo));
    }

    #[test]
    fn q_upper_bound_property(x in 0.0f64..30.0) {
        prop_assert!(q_upper(x).unwrap() >= q_function(x));
    }
}
