use serde::{Deserialize, Serialize};

use crate::decoders::DecoderId;
use crate::error::{invalid, Result};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

/// Wilson score interval for `successes` out of `total` at quantile `z`.
/// Returns `(0, 1)` when `total == 0`.
pub fn wilson_interval(successes: u64, total: u64, z: f64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let nt = total as f64;
    let p = successes as f64 / nt;
    let z2 = z * z;
    let denom = 1.0 + z2 / nt;
    let center = (p + z2 / (2.0 * nt)) / denom;
    let half = z * (p * (1.0 - p) / nt + z2 / (4.0 * nt * nt)).sqrt() / denom;
    // Rounding can push an endpoint past p when p is 0 or 1.
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Pooled symbol-error statistics for one decoder at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerStats {
    pub decoder_id: DecoderId,
    pub n: usize,
    pub m: usize,
    pub sigma: f64,
    /// Trials executed.
    pub trials: u64,
    pub symbol_errors: u64,
    pub symbols_total: u64,
    pub ser_point: f64,
    pub ser_ci_low: f64,
    pub ser_ci_high: f64,
    /// Trials with at least `ceil(k n)` symbol errors.
    pub block_ge_k_count: u64,
    pub p_e_k_point: f64,
    pub wall_time_s: f64,
}

impl SerStats {
    pub fn ci_width(&self) -> f64 {
        self.ser_ci_high - self.ser_ci_low
    }

    /// Empirical per-user bound `SER <= k + P_e^k + 3 * CI width`.
    pub fn per_user_bound_ok(&self, k_fraction: f64) -> bool {
        self.ser_point <= k_fraction + self.p_e_k_point + 3.0 * self.ci_width()
    }
}

/// One line of a sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendRow {
    pub n: usize,
    pub ser_point: f64,
    pub ser_ci_low: f64,
    pub ser_ci_high: f64,
}

/// SER against `n` for one decoder and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub decoder_id: DecoderId,
    pub sigma: f64,
    /// Sorted by increasing `n`.
    pub rows: Vec<TrendRow>,
    /// False only if some step to a larger `n` has an interval lying
    /// entirely above the previous one.
    pub non_increasing_within_ci: bool,
}

impl SweepSummary {
    pub fn verdict_line(&self) -> String {
        format!(
            "{} sigma={}: non-increasing within CI: {}",
            self.decoder_id, self.sigma, self.non_increasing_within_ci
        )
    }
}

/// Trend table over `n` for stats sharing one decoder and one `sigma`.
pub fn sweep_summary(stats: &[SerStats]) -> Result<SweepSummary> {
    let first = stats.first().ok_or_else(|| invalid("stats", "empty"))?;
    if stats
        .iter()
        .any(|s| s.decoder_id != first.decoder_id || s.sigma != first.sigma)
    {
        return Err(invalid("stats", "all entries must share decoder and sigma"));
    }
    let mut rows: Vec<TrendRow> = stats
        .iter()
        .map(|s| TrendRow {
            n: s.n,
            ser_point: s.ser_point,
            ser_ci_low: s.ser_ci_low,
            ser_ci_high: s.ser_ci_high,
        })
        .collect();
    rows.sort_by_key(|r| r.n);
    let ok = rows.windows(2).all(|w| w[1].ser_ci_low <= w[0].ser_ci_high);
    Ok(SweepSummary {
        decoder_id: first.decoder_id,
        sigma: first.sigma,
        rows,
        non_increasing_within_ci: ok,
    })
}

/// [`sweep_summary`] for every `(decoder, sigma)` group, in order of first
/// appearance.
pub fn sweep_summaries(stats: &[SerStats]) -> Vec<SweepSummary> {
    let mut keys: Vec<(DecoderId, f64)> = Vec::new();
    for s in stats {
        if !keys.iter().any(|&(d, sg)| d == s.decoder_id && sg == s.sigma) {
            keys.push((s.decoder_id, s.sigma));
        }
    }
    keys.into_iter()
        .map(|(d, sg)| {
            let group: Vec<SerStats> = stats
                .iter()
                .filter(|s| s.decoder_id == d && s.sigma == sg)
                .cloned()
                .collect();
            sweep_summary(&group).expect("group is nonempty and homogeneous")
        })
        .collect()
}
