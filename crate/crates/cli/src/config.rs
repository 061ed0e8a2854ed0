use std::str::FromStr;

use clap::Args;
use serde_json::{Map, Value};
use simo_isq::decoders::DecoderId;
use simo_isq::model::{AntennaSpec, ConstellationKind, FadingDistribution};
use simo_isq::sim::ExperimentConfig;

use crate::error::{io_error, CliError};

/// Experiment flags shared by `simulate` and `sweep`. Flags override the
/// values read from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// JSON config whose keys are the experiment field names.
    #[arg(long)]
    pub config: Option<String>,
    /// Comma-separated user counts.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Fixed antenna ratio m / n.
    #[arg(long, conflicts_with = "xi")]
    pub alpha: Option<f64>,
    /// Vanishing ratio alpha_n = 1 / (ln n)^xi.
    #[arg(long)]
    pub xi: Option<f64>,
    /// Comma-separated noise standard deviations.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<f64>>,
    /// Comma-separated decoders: ml, isq, risq, grid, amp.
    #[arg(long, value_delimiter = ',')]
    pub decoder: Option<Vec<String>>,
    /// bpsk, pam4 or psk4.
    #[arg(long)]
    pub constellation: Option<String>,
    /// gaussian, rademacher or uniform.
    #[arg(long)]
    pub fading: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Error-fraction threshold k for the P_e^k counts.
    #[arg(long)]
    pub k_fraction: Option<f64>,
    /// Grid decoder pitch.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Grid decoder offset.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Exhaustive-search guard in bits.
    #[arg(long)]
    pub max_bits: Option<u32>,
    #[arg(long)]
    pub amp_iters: Option<usize>,
}

/// Parses a JSON config, checking one key at a time so errors name the key.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(CliError::Config("top level must be a JSON object".into()));
    };
    let known = match serde_json::to_value(ExperimentConfig::default()) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("config serializes to an object"),
    };
    for (key, v) in &map {
        if !known.contains_key(key) {
            let names: Vec<&str> = known.keys().map(String::as_str).collect();
            return Err(CliError::Config(format!(
                "unknown key `{key}` (expected one of: {})",
                names.join(", ")
            )));
        }
        let single = Value::Object(Map::from_iter([(key.clone(), v.clone())]));
        serde_json::from_value::<ExperimentConfig>(single)
            .map_err(|e| CliError::Config(format!("key `{key}`: {e}")))?;
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Config(e.to_string()))
}

fn parse_flag<T: FromStr<Err = simo_isq::Error>>(s: &str) -> Result<T, CliError> {
    s.parse().map_err(|e: simo_isq::Error| CliError::Config(e.to_string()))
}

impl ExperimentArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => parse_config(&std::fs::read_to_string(path).map_err(io_error(path))?)?,
            None => ExperimentConfig::default(),
        };
        if let Some(n) = &self.n {
            cfg.n_values = n.clone();
        }
        if let Some(a) = self.alpha {
            cfg.antennas = AntennaSpec::Alpha(a);
        }
        if let Some(x) = self.xi {
            cfg.antennas = AntennaSpec::Xi(x);
        }
        if let Some(s) = &self.sigma {
            cfg.sigma_values = s.clone();
        }
        if let Some(ds) = &self.decoder {
            cfg.decoders = ds.iter().map(|d| parse_flag::<DecoderId>(d.trim())).collect::<Result<_, _>>()?;
        }
        if let Some(c) = &self.constellation {
            cfg.constellation = parse_flag::<ConstellationKind>(c)?;
        }
        if let Some(f) = &self.fading {
            cfg.fading = parse_flag::<FadingDistribution>(f)?;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(k) = self.k_fraction {
            cfg.k_fraction = k;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        if let Some(b) = self.max_bits {
            cfg.max_exhaustive_bits = b;
        }
        if let Some(i) = self.amp_iters {
            cfg.amp_iters = i;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
