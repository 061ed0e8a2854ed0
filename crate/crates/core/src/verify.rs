//! Built-in property suites run at fixed seeds.
//!
//! Each suite checks an invariant of the decoders or bounds on many random
//! instances and reports one [`PropertyResult`] per property, with the worst
//! observed margin in `detail`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::chi_sq_mgf_bound;
use crate::decoders::{decode_grid, decode_ml, grid_build, solution_set, DecoderId, DecoderOptions};
use crate::error::{invalid, Error, Result};
use crate::model::{sample_channel, sample_codeword, transmit, AntennaSpec, Constellation, FadingDistribution};
use crate::numerics::{box_ls, linf_project};
use crate::par::{with_threads, Execution};
use crate::sim::{run_experiment, ExperimentConfig, SerStats};

const SUITE_SEED: u64 = 0x5EED_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Box-LS objective never exceeds the ML residual.
    Relaxation,
    /// The grid minimizer lies within `epsilon` of the minimizer set.
    Lemma2,
    /// Monte Carlo check of the chi-square MGF identity.
    Mgf,
    /// l-infinity projection lands in the set and beats sampled members.
    Projection,
    /// Experiments are reproducible across runs and thread counts.
    Determinism,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Relaxation,
        Suite::Lemma2,
        Suite::Mgf,
        Suite::Projection,
        Suite::Determinism,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Relaxation => "relaxation",
            Suite::Lemma2 => "lemma2",
            Suite::Mgf => "mgf",
            Suite::Projection => "projection",
            Suite::Determinism => "determinism",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| invalid("suite", format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    /// Number of instances checked.
    pub checked: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub properties: Vec<PropertyResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }
}

pub fn run_suite(suite: Suite) -> Result<SuiteReport> {
    let properties = match suite {
        Suite::Relaxation => vec![relaxation(500)?],
        Suite::Lemma2 => vec![lemma2(200)?],
        Suite::Mgf => mgf(100_000),
        Suite::Projection => projection(100)?,
        Suite::Determinism => determinism()?,
    };
    Ok(SuiteReport { suite, properties })
}

/// `min over the box <= ML residual + 1e-6` on `count` instances with
/// `n <= 12`, `m in [ceil(n/2), n]`, `sigma in {0, 0.3}`.
pub fn relaxation(count: usize) -> Result<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let c = Constellation::bpsk();
    let opts = DecoderOptions::default();
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for _ in 0..count {
        let n = rng.random_range(1..=12usize);
        let m = rng.random_range(n.div_ceil(2)..=n);
        let sigma = if rng.random_bool(0.5) { 0.0 } else { 0.3 };
        let h = sample_channel(m, n, FadingDistribution::Gaussian, &mut rng);
        let x0 = sample_codeword(&c, n, &mut rng);
        let y = transmit(&h, &x0, sigma, &mut rng)?;
        let relaxed = box_ls(&h, &y, 1.0, opts.box_tol, opts.box_max_iter)?.objective;
        let ml = decode_ml(&h, &y, &c, &opts)?.residual(&h, &y);
        let margin = relaxed - ml;
        worst = worst.max(margin);
        if margin > 1e-6 {
            failures += 1;
        }
    }
    Ok(PropertyResult {
        name: "box_ls objective <= ML residual + 1e-6".into(),
        passed: failures == 0,
        checked: count,
        detail: format!("failures {failures}, worst objective - residual {worst:.3e}"),
    })
}

/// `||x_grid - P_S(x_grid)||_inf <= epsilon + 1e-6` on `count` instances with
/// `m = ceil(0.6 n)`, `epsilon in {0.1, 0.25}` and `n` as large as the default
/// exhaustive guard allows (5 and 7 respectively, capped at 10).
pub fn lemma2(count: usize) -> Result<PropertyResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED + 1);
    let c = Constellation::bpsk();
    let opts = DecoderOptions::default();
    let mut worst_slack = f64::NEG_INFINITY;
    let mut failures = 0;
    for _ in 0..count {
        let epsilon = if rng.random_bool(0.5) { 0.1 } else { 0.25 };
        let per_user = grid_build(&c, epsilon, &[0.0], 1)?.bits();
        let n_max = ((f64::from(opts.max_exhaustive_bits) / per_user).floor() as usize).clamp(2, 10);
        let n = rng.random_range(2..=n_max);
        let m = (0.6 * n as f64).ceil() as usize;
        let delta = rng.random_range(0.0..epsilon);
        let sigma = if rng.random_bool(0.5) { 0.0 } else { 0.3 };
        let h = sample_channel(m, n, FadingDistribution::Gaussian, &mut rng);
        let x0 = sample_codeword(&c, n, &mut rng);
        let y = transmit(&h, &x0, sigma, &mut rng)?;
        let grid = grid_build(&c, epsilon, &[delta], n)?;
        let xg = decode_grid(&h, &y, &grid, &c, &opts)?
            .relaxed_point
            .expect("grid decoder reports its minimizer");
        let s = solution_set(&h, &y, &c, &opts)?;
        let p = linf_project(&s, &xg)?;
        let dist = (&xg - &p).amax();
        worst_slack = worst_slack.max(dist - epsilon);
        if dist > epsilon + 1e-6 {
            failures += 1;
        }
    }
    Ok(PropertyResult {
        name: "grid minimizer within epsilon + 1e-6 of S (l-inf)".into(),
        passed: failures == 0,
        checked: count,
        detail: format!("failures {failures}, worst distance - epsilon {worst_slack:.3e}"),
    })
}

/// The `(m, t, c)` triples of the MGF suite.
pub const MGF_CASES: [(usize, f64, &[f64]); 3] = [
    (2, 0.5, &[1.0]),
    (4, 1.0, &[1.0, 0.5]),
    (8, 0.25, &[1.0, 1.0, 1.0]),
];

/// Monte Carlo mean of `exp(-t ||sum_j c_j h_j||^2)` with `h_j` i.i.d.
/// standard Gaussian in `R^m`.
pub fn mgf_monte_carlo<R: Rng + ?Sized>(m: usize, t: f64, c: &[f64], samples: usize, rng: &mut R) -> f64 {
    let mut acc = 0.0;
    for _ in 0..samples {
        let mut norm_sq = 0.0;
        for _ in 0..m {
            let mut v = 0.0;
            for cj in c {
                let g: f64 = StandardNormal.sample(rng);
                v += cj * g;
            }
            norm_sq += v * v;
        }
        acc += (-t * norm_sq).exp();
    }
    acc / samples as f64
}

/// Monte Carlo against `(1 + 2t sum c^2)^(-m/2)` within 2% relative.
pub fn mgf(samples: usize) -> Vec<PropertyResult> {
    MGF_CASES
        .iter()
        .enumerate()
        .map(|(k, &(m, t, c))| {
            let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED + 10 + k as u64);
            let empirical = mgf_monte_carlo(m, t, c, samples, &mut rng);
            let formula = chi_sq_mgf_bound(t, c, m).expect("suite parameters are valid");
            let rel = (empirical - formula).abs() / formula;
            PropertyResult {
                name: format!("mgf m={m} t={t} c={c:?}"),
                passed: rel <= 0.02,
                checked: samples,
                detail: format!("monte carlo {empirical:.6}, formula {formula:.6}, relative error {rel:.3e}"),
            }
        })
        .collect()
}

/// Projection membership, optimality against sampled members of S, and
/// repeatability.
pub fn projection(count: usize) -> Result<Vec<PropertyResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED + 2);
    let c = Constellation::bpsk();
    let opts = DecoderOptions::default();
    let (mut outside, mut beaten, mut unstable) = (0, 0, 0);
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..count {
        let n = rng.random_range(3..=10usize);
        let m = rng.random_range(1..n);
        let h = sample_channel(m, n, FadingDistribution::Gaussian, &mut rng);
        let x0 = sample_codeword(&c, n, &mut rng);
        let sigma = if rng.random_bool(0.5) { 0.0 } else { 0.3 };
        let y = transmit(&h, &x0, sigma, &mut rng)?;
        let s = solution_set(&h, &y, &c, &opts)?;
        let x_r = DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0));
        let p = linf_project(&s, &x_r)?;
        if !s.contains(&p) {
            outside += 1;
        }
        if linf_project(&s, &x_r)? != p {
            unstable += 1;
        }
        let d = (&x_r - &p).amax();
        for _ in 0..50 {
            let Some(q) = sample_member(&s, &mut rng) else { continue };
            let gap = d - (&x_r - &q).amax();
            worst_gap = worst_gap.max(gap);
            if gap > 1e-7 {
                beaten += 1;
            }
        }
    }
    Ok(vec![
        PropertyResult {
            name: "projection lies in S".into(),
            passed: outside == 0,
            checked: count,
            detail: format!("outside {outside}"),
        },
        PropertyResult {
            name: "no sampled member of S is closer in l-inf".into(),
            passed: beaten == 0,
            checked: count,
            detail: format!("violations {beaten}, worst gap {worst_gap:.3e}"),
        },
        PropertyResult {
            name: "projection is repeatable".into(),
            passed: unstable == 0,
            checked: count,
            detail: format!("mismatches {unstable}"),
        },
    ])
}

/// A random point of S: a random null direction from the base point, scaled
/// to stay in the box.
fn sample_member<R: Rng + ?Sized>(s: &crate::numerics::SolutionSet, rng: &mut R) -> Option<DVector<f64>> {
    let k = s.null_rank();
    if k == 0 {
        return Some(s.x_hat.clone());
    }
    let beta = DVector::from_fn(k, |_, _| rng.random_range(-1.0..=1.0));
    let dir = &s.z * &beta;
    // Largest step keeping x_hat + step * dir inside the box.
    let b = s.box_bound;
    let mut max_step = f64::INFINITY;
    for (xi, di) in s.x_hat.iter().zip(dir.iter()) {
        if *di > 1e-15 {
            max_step = max_step.min((b - xi) / di);
        } else if *di < -1e-15 {
            max_step = max_step.min((-b - xi) / di);
        }
    }
    if !max_step.is_finite() {
        return None;
    }
    let step = rng.random_range(0.0..=max_step.max(0.0));
    let q = &s.x_hat + dir * step;
    s.contains(&q).then_some(q)
}

/// Serialized stats with the wall time removed.
fn fingerprint(stats: &[SerStats]) -> String {
    stats
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.wall_time_s = 0.0;
            serde_json::to_string(&s).expect("stats serialize")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Same experiment twice sequentially and on 1 and 4 threads.
pub fn determinism() -> Result<Vec<PropertyResult>> {
    let mut cfg = ExperimentConfig {
        n_values: vec![8, 12],
        antennas: AntennaSpec::Alpha(0.6),
        sigma_values: vec![0.2],
        decoders: vec![DecoderId::Isq, DecoderId::Risq, DecoderId::Amp],
        trials: 30,
        master_seed: SUITE_SEED,
        execution: Execution::Sequential,
        ..ExperimentConfig::default()
    };
    let a = fingerprint(&run_experiment(&cfg)?.stats);
    let b = fingerprint(&run_experiment(&cfg)?.stats);
    cfg.execution = Execution::Parallel;
    let one = fingerprint(&with_threads(1, || run_experiment(&cfg))?.stats);
    let four = fingerprint(&with_threads(4, || run_experiment(&cfg))?.stats);
    Ok(vec![
        PropertyResult {
            name: "repeated runs identical".into(),
            passed: a == b,
            checked: 2,
            detail: String::new(),
        },
        PropertyResult {
            name: "1 and 4 threads match sequential".into(),
            passed: a == one && a == four,
            checked: 3,
            detail: String::new(),
        },
    ])
}
