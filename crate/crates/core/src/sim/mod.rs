//! Reproducible Monte Carlo over `(n, sigma)` grids.
//!
//! Each trial draws its instance from a ChaCha8 stream keyed by
//! `(master_seed, grid point, trial)`, so trials can run in any order or on
//! any number of threads. The grid point enters through a hash of
//! `(n, m, sigma)` rather than its position, so a single-point run
//! reproduces the matching row of a larger sweep. Per-trial results are folded with integer-only,
//! commutative merges; the reported statistics are therefore identical for
//! every schedule. Only `wall_time_s` depends on the machine.

mod stats;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use stats::{sweep_summaries, sweep_summary, wilson_interval, SerStats, SweepSummary, TrendRow, Z_95};

use crate::bounds::min_errors;
use crate::decoders::{
    decode_amp, decode_grid, decode_isq, decode_ml, decode_risq, grid_build, DecodeOutput, DecoderId,
    DecoderOptions, GridSpec, DEFAULT_AMP_ITERS, DEFAULT_MAX_EXHAUSTIVE_BITS,
};
use crate::error::{invalid, Result};
use crate::model::{
    antennas_for, symbol_errors, AntennaSpec, Constellation, ConstellationKind, Dimensions, FadingDistribution,
    SystemInstance,
};
use crate::par::{self, Execution};

/// Default error-fraction threshold for counting `P_e^k` events.
pub const DEFAULT_K_FRACTION: f64 = 0.02;

/// Keeps the r-ISQ reference draws off the instance stream.
const RISQ_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// A full experiment description. Missing JSON keys take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_values: Vec<usize>,
    /// `{"alpha": a}` or `{"xi": x}`.
    pub antennas: AntennaSpec,
    pub sigma_values: Vec<f64>,
    pub fading: FadingDistribution,
    pub constellation: ConstellationKind,
    pub decoders: Vec<DecoderId>,
    pub trials: u64,
    pub master_seed: u64,
    pub k_fraction: f64,
    pub max_exhaustive_bits: u32,
    /// Grid decoder pitch.
    pub epsilon: f64,
    /// Grid decoder offset.
    pub delta: f64,
    pub amp_iters: usize,
    /// Trial scheduling; not part of the serialized config.
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_values: vec![8],
            antennas: AntennaSpec::Alpha(1.0),
            sigma_values: vec![0.0],
            fading: FadingDistribution::Gaussian,
            constellation: ConstellationKind::Bpsk,
            decoders: vec![DecoderId::Isq],
            trials: 100,
            master_seed: 0,
            k_fraction: DEFAULT_K_FRACTION,
            max_exhaustive_bits: DEFAULT_MAX_EXHAUSTIVE_BITS,
            epsilon: 0.25,
            delta: 0.0,
            amp_iters: DEFAULT_AMP_ITERS,
            execution: Execution::Parallel,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(invalid("n_values", "must be a nonempty list of positive integers"));
        }
        if self.sigma_values.is_empty() || self.sigma_values.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(invalid("sigma_values", "must be a nonempty list of finite nonnegative reals"));
        }
        if self.decoders.is_empty() {
            return Err(invalid("decoders", "must not be empty"));
        }
        for (i, d) in self.decoders.iter().enumerate() {
            if self.decoders[..i].contains(d) {
                return Err(invalid("decoders", format!("{d} listed twice")));
            }
        }
        if self.trials == 0 || self.trials > u64::from(u32::MAX) {
            return Err(invalid("trials", format!("must lie in [1, 2^32), got {}", self.trials)));
        }
        if !(self.k_fraction > 0.0 && self.k_fraction <= 1.0) {
            return Err(invalid("k_fraction", format!("must lie in (0, 1], got {}", self.k_fraction)));
        }
        if self.max_exhaustive_bits > 62 {
            return Err(invalid("max_exhaustive_bits", "must be at most 62"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if !self.delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        if self.decoders.contains(&DecoderId::Grid) {
            let c = self.constellation.build();
            // Reject a bad (epsilon, delta) before any trial runs.
            grid_build(&c, self.epsilon, &[self.delta], 1)?;
        }
        for &n in &self.n_values {
            antennas_for(n, self.antennas)?;
        }
        Ok(())
    }

    /// Grid points in output order: `n` outer, `sigma` inner.
    pub fn grid_points(&self) -> Result<Vec<GridPoint>> {
        let mut out = Vec::with_capacity(self.n_values.len() * self.sigma_values.len());
        for &n in &self.n_values {
            let dims = antennas_for(n, self.antennas)?;
            for &sigma in &self.sigma_values {
                out.push(GridPoint {
                    index: out.len() as u64,
                    dims,
                    sigma,
                });
            }
        }
        Ok(out)
    }

    pub fn decoder_options(&self) -> DecoderOptions {
        DecoderOptions {
            max_exhaustive_bits: self.max_exhaustive_bits,
            amp_iters: self.amp_iters,
            // Parallelism lives at the trial level.
            execution: Execution::Sequential,
            ..DecoderOptions::default()
        }
    }
}

/// One `(n, m, sigma)` setting of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    /// Position in [`ExperimentConfig::grid_points`].
    pub index: u64,
    pub dims: Dimensions,
    pub sigma: f64,
}

impl GridPoint {
    /// 32-bit stream key derived from `(n, m, sigma)`.
    pub fn key(&self) -> u64 {
        let mut h = splitmix64(self.dims.n as u64);
        h = splitmix64(h ^ self.dims.m as u64);
        h = splitmix64(h ^ self.sigma.to_bits());
        h >> 32
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG for the instance of `trial` at the grid point with key `point_key`.
pub fn trial_rng(master_seed: u64, point_key: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((point_key << 32) | (trial & 0xFFFF_FFFF));
    rng
}

/// RNG for the r-ISQ reference point of `trial`.
pub fn risq_rng(master_seed: u64, point_key: u64, trial: u64) -> ChaCha8Rng {
    trial_rng(master_seed ^ RISQ_SEED_SALT, point_key, trial)
}

/// Why a decoder cannot run at a grid point, decided before any trial.
pub fn guard_skip(decoder: DecoderId, point: &GridPoint, config: &ExperimentConfig) -> Option<String> {
    let c = config.constellation.build();
    let n = point.dims.n;
    let limit = config.max_exhaustive_bits;
    match decoder {
        DecoderId::Ml => {
            let bits = n as f64 * (c.len() as f64).log2();
            (bits > f64::from(limit) + 1e-9)
                .then(|| format!("exhaustive search needs {bits:.1} bits, guard is {limit}"))
        }
        DecoderId::Grid => {
            let bits = grid_build(&c, config.epsilon, &[config.delta], n).ok()?.bits();
            (bits > f64::from(limit) + 1e-9 && point.dims.m < n).then(|| {
                format!("grid search needs {bits:.1} bits, guard is {limit}, and m < n rules out branch and bound")
            })
        }
        DecoderId::Amp => (!c.is_bpsk()).then(|| "amp supports BPSK only".to_string()),
        DecoderId::Isq | DecoderId::Risq => None,
    }
}

/// Outcome of one decoder on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderTrial {
    pub symbol_errors: usize,
    /// `||y - H x_est||^2`.
    pub residual: f64,
    pub elapsed_ns: u64,
}

/// Per-decoder results of one trial, in `decoders` order. `Err` holds the
/// decoder's error message.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: u64,
    pub results: Vec<(DecoderId, std::result::Result<DecoderTrial, String>)>,
}

/// Draws one instance at `point` and applies each of `decoders` to it.
///
/// `grid` is required when `decoders` contains the grid decoder.
pub fn run_trial(
    config: &ExperimentConfig,
    point: &GridPoint,
    decoders: &[DecoderId],
    grid: Option<&GridSpec>,
    trial: u64,
) -> Result<TrialOutcome> {
    let c = config.constellation.build();
    let opts = config.decoder_options();
    let mut rng = trial_rng(config.master_seed, point.key(), trial);
    let inst = SystemInstance::generate(&point.dims, &c, config.fading, point.sigma, &mut rng)?;
    let results = decoders
        .iter()
        .map(|&d| {
            let start = Instant::now();
            let out = decode_one(d, &inst, &c, grid, config, point, trial, &opts);
            let elapsed_ns = u64::try_from(start.elapsed().as_nanos()).unwrap_or(u64::MAX);
            let r = out
                .map(|o| DecoderTrial {
                    symbol_errors: symbol_errors(c.dim(), &o.estimate, &inst.x0),
                    residual: o.residual(&inst.h, &inst.y),
                    elapsed_ns,
                })
                .map_err(|e| e.to_string());
            (d, r)
        })
        .collect();
    Ok(TrialOutcome { trial, results })
}

#[allow(clippy::too_many_arguments)]
fn decode_one(
    d: DecoderId,
    inst: &SystemInstance,
    c: &Constellation,
    grid: Option<&GridSpec>,
    config: &ExperimentConfig,
    point: &GridPoint,
    trial: u64,
    opts: &DecoderOptions,
) -> Result<DecodeOutput> {
    let (h, y) = (&inst.h, &inst.y);
    match d {
        DecoderId::Ml => decode_ml(h, y, c, opts),
        DecoderId::Isq => decode_isq(h, y, c, opts),
        DecoderId::Risq => {
            let mut rng = risq_rng(config.master_seed, point.key(), trial);
            decode_risq(h, y, c, &mut rng, opts)
        }
        DecoderId::Grid => {
            let g = grid.ok_or_else(|| invalid("grid", "grid decoder requested without a grid"))?;
            decode_grid(h, y, g, c, opts)
        }
        DecoderId::Amp => decode_amp(h, y, c, opts.amp_iters),
    }
}

/// A decoder that produced no statistics at a grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub decoder_id: DecoderId,
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    pub reason: String,
}

/// Everything [`run_experiment`] produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// One entry per `(grid point, decoder)` that ran, grid points in
    /// [`ExperimentConfig::grid_points`] order, decoders in config order.
    pub stats: Vec<SerStats>,
    pub skips: Vec<SkipRecord>,
    /// Stats failing [`SerStats::per_user_bound_ok`].
    pub bound_violations: Vec<SerStats>,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    trials: u64,
    symbol_errors: u64,
    block_ge_k: u64,
    elapsed_ns: u64,
    /// Lowest failing trial and its message.
    first_failure: Option<(u64, String)>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        self.symbol_errors += other.symbol_errors;
        self.block_ge_k += other.block_ge_k;
        self.elapsed_ns = self.elapsed_ns.saturating_add(other.elapsed_ns);
        self.first_failure = match (self.first_failure, other.first_failure) {
            (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

/// Runs every trial at every grid point and pools the symbol errors.
///
/// A decoder that is guarded out, or that fails on any trial, yields a
/// [`SkipRecord`] for that grid point instead of statistics.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let c = config.constellation.build();
    let mut report = ExperimentReport {
        stats: Vec::new(),
        skips: Vec::new(),
        bound_violations: Vec::new(),
    };
    for point in config.grid_points()? {
        let n = point.dims.n;
        let mut active = Vec::new();
        let mut guarded = BTreeMap::new();
        for &d in &config.decoders {
            match guard_skip(d, &point, config) {
                Some(reason) => {
                    guarded.insert(d, reason);
                }
                None => active.push(d),
            }
        }
        let grid = if active.contains(&DecoderId::Grid) {
            Some(grid_build(&c, config.epsilon, &[config.delta], n)?)
        } else {
            None
        };
        let k_errors = min_errors(n, config.k_fraction);
        let tallies = par::map_reduce(
            config.execution,
            0..config.trials,
            || Ok(vec![Tally::default(); active.len()]),
            |t| -> Result<Vec<Tally>> {
                let outcome = run_trial(config, &point, &active, grid.as_ref(), t)?;
                Ok(outcome
                    .results
                    .into_iter()
                    .map(|(_, r)| match r {
                        Ok(dt) => Tally {
                            trials: 1,
                            symbol_errors: dt.symbol_errors as u64,
                            block_ge_k: u64::from(dt.symbol_errors >= k_errors),
                            elapsed_ns: dt.elapsed_ns,
                            first_failure: None,
                        },
                        Err(msg) => Tally {
                            first_failure: Some((t, msg)),
                            ..Tally::default()
                        },
                    })
                    .collect())
            },
            |a, b| match (a, b) {
                (Ok(a), Ok(b)) => Ok(a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect()),
                (Err(e), _) | (_, Err(e)) => Err(e),
            },
        )?;
        let mut tallies: BTreeMap<DecoderId, Tally> = active.iter().copied().zip(tallies).collect();
        for &d in &config.decoders {
            let skip = |reason: String| SkipRecord {
                decoder_id: d,
                n,
                m: point.dims.m,
                sigma: point.sigma,
                reason,
            };
            if let Some(reason) = guarded.remove(&d) {
                report.skips.push(skip(reason));
                continue;
            }
            let tally = tallies.remove(&d).expect("every active decoder has a tally");
            if let Some((trial, msg)) = tally.first_failure {
                report.skips.push(skip(format!("trial {trial}: {msg}")));
                continue;
            }
            let stats = finish(d, &point, &tally);
            if !stats.per_user_bound_ok(config.k_fraction) {
                report.bound_violations.push(stats.clone());
            }
            report.stats.push(stats);
        }
    }
    Ok(report)
}

fn finish(d: DecoderId, point: &GridPoint, t: &Tally) -> SerStats {
    let n = point.dims.n;
    let total = t.trials * n as u64;
    let (lo, hi) = wilson_interval(t.symbol_errors, total, Z_95);
    SerStats {
        decoder_id: d,
        n,
        m: point.dims.m,
        sigma: point.sigma,
        trials: t.trials,
        symbol_errors: t.symbol_errors,
        symbols_total: total,
        ser_point: t.symbol_errors as f64 / total as f64,
        ser_ci_low: lo,
        ser_ci_high: hi,
        block_ge_k_count: t.block_ge_k,
        p_e_k_point: t.block_ge_k as f64 / t.trials as f64,
        wall_time_s: t.elapsed_ns as f64 * 1e-9,
    }
}

/// Regenerates the instance that [`run_trial`] decodes.
pub fn instance(config: &ExperimentConfig, point: &GridPoint, trial: u64) -> Result<SystemInstance> {
    let c = config.constellation.build();
    let mut rng = trial_rng(config.master_seed, point.key(), trial);
    SystemInstance::generate(&point.dims, &c, config.fading, point.sigma, &mut rng)
}
