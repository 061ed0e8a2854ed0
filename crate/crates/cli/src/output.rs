use std::fmt::Write as _;

use simo_isq::model::{antennas_for, AntennaSpec};
use simo_isq::sim::{ExperimentConfig, ExperimentReport, SerStats, SkipRecord};

/// Version recorded in every row.
pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// Result columns in output order. `wall_time_s` is appended only with
/// `--timing`, since it differs between runs.
pub const COLUMNS: [&str; 23] = [
    "decoder",
    "n",
    "m",
    "alpha",
    "xi",
    "sigma",
    "fading",
    "constellation",
    "trials",
    "master_seed",
    "k_fraction",
    "epsilon",
    "delta",
    "amp_iters",
    "symbol_errors",
    "symbols_total",
    "ser_point",
    "ser_ci_low",
    "ser_ci_high",
    "block_ge_k_count",
    "p_e_k_point",
    "per_user_bound_ok",
    "version",
];

pub const TIMING_COLUMN: &str = "wall_time_s";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Int(u64),
    Num(f64),
    Bool(bool),
    Empty,
}

/// Nine significant digits, locale independent.
pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => num(*x),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Str(s) => serde_json::to_string(s).expect("strings serialize"),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) if x.is_finite() => num(*x),
            Cell::Num(_) | Cell::Empty => "null".into(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

/// One output record: the stats of a decoder at a grid point together with
/// the configuration that reproduces them.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub cells: Vec<(&'static str, Cell)>,
}

impl ResultRow {
    pub fn new(cfg: &ExperimentConfig, s: &SerStats, timing: bool) -> Self {
        let (alpha, xi) = match cfg.antennas {
            AntennaSpec::Alpha(a) => (Cell::Num(a), Cell::Empty),
            AntennaSpec::Xi(x) => {
                let a = antennas_for(s.n, cfg.antennas).map_or(f64::NAN, |d| d.alpha);
                (Cell::Num(a), Cell::Num(x))
            }
        };
        let values = vec![
            Cell::Str(s.decoder_id.to_string()),
            Cell::Int(s.n as u64),
            Cell::Int(s.m as u64),
            alpha,
            xi,
            Cell::Num(s.sigma),
            Cell::Str(cfg.fading.to_string()),
            Cell::Str(cfg.constellation.to_string()),
            Cell::Int(s.trials),
            Cell::Int(cfg.master_seed),
            Cell::Num(cfg.k_fraction),
            Cell::Num(cfg.epsilon),
            Cell::Num(cfg.delta),
            Cell::Int(cfg.amp_iters as u64),
            Cell::Int(s.symbol_errors),
            Cell::Int(s.symbols_total),
            Cell::Num(s.ser_point),
            Cell::Num(s.ser_ci_low),
            Cell::Num(s.ser_ci_high),
            Cell::Int(s.block_ge_k_count),
            Cell::Num(s.p_e_k_point),
            Cell::Bool(s.per_user_bound_ok(cfg.k_fraction)),
            Cell::Str(VERSION.into()),
        ];
        let mut cells: Vec<(&'static str, Cell)> = COLUMNS.into_iter().zip(values).collect();
        if timing {
            cells.push((TIMING_COLUMN, Cell::Num(s.wall_time_s)));
        }
        Self { cells }
    }

    pub fn csv(&self) -> String {
        self.cells.iter().map(|(_, c)| c.csv()).collect::<Vec<_>>().join(",")
    }

    pub fn json(&self) -> String {
        let fields: Vec<String> = self
            .cells
            .iter()
            .map(|(k, c)| format!("\"{k}\":{}", c.json()))
            .collect();
        format!("{{{}}}", fields.join(","))
    }
}

pub fn header(timing: bool) -> String {
    let mut h = COLUMNS.join(",");
    if timing {
        h.push(',');
        h.push_str(TIMING_COLUMN);
    }
    h
}

fn skip_line(s: &SkipRecord) -> String {
    format!(
        "# skip decoder={} n={} m={} sigma={} reason={}",
        s.decoder_id,
        s.n,
        s.m,
        num(s.sigma),
        serde_json::to_string(&s.reason).expect("strings serialize")
    )
}

/// Full CSV document: header, rows, one comment line per skip and a final
/// `# rows=N skips=K` line.
pub fn csv_document(cfg: &ExperimentConfig, report: &ExperimentReport, timing: bool) -> String {
    let mut out = String::new();
    writeln!(out, "{}", header(timing)).unwrap();
    for s in &report.stats {
        writeln!(out, "{}", ResultRow::new(cfg, s, timing).csv()).unwrap();
    }
    for s in &report.skips {
        writeln!(out, "{}", skip_line(s)).unwrap();
    }
    writeln!(out, "# rows={} skips={}", report.stats.len(), report.skips.len()).unwrap();
    out
}

/// JSON-lines mirror of the CSV rows.
pub fn jsonl_document(cfg: &ExperimentConfig, report: &ExperimentReport, timing: bool) -> String {
    let mut out = String::new();
    for s in &report.stats {
        writeln!(out, "{}", ResultRow::new(cfg, s, timing).json()).unwrap();
    }
    out
}

/// Gnuplot script plotting SER with Wilson error bars against `n`, one
/// curve per decoder and noise level, read from `csv_path`.
pub fn gnuplot_script(csv_path: &str, cfg: &ExperimentConfig) -> String {
    let col = |name: &str| COLUMNS.iter().position(|c| *c == name).expect("known column") + 1;
    let (dec, n, sigma, ser, lo, hi) = (
        col("decoder"),
        col("n"),
        col("sigma"),
        col("ser_point"),
        col("ser_ci_low"),
        col("ser_ci_high"),
    );
    let decoders: Vec<String> = cfg.decoders.iter().map(|d| d.to_string()).collect();
    let sigmas: Vec<String> = cfg.sigma_values.iter().map(|s| num(*s)).collect();
    let mut out = String::new();
    writeln!(out, "set datafile separator ','").unwrap();
    writeln!(out, "set logscale xy").unwrap();
    writeln!(out, "set xlabel 'n (users)'").unwrap();
    writeln!(out, "set ylabel 'symbol error rate'").unwrap();
    writeln!(out, "set key outside").unwrap();
    writeln!(out, "file = '{}'", csv_path.replace('\'', "''")).unwrap();
    writeln!(out, "decoders = '{}'", decoders.join(" ")).unwrap();
    writeln!(out, "sigmas = '{}'", sigmas.join(" ")).unwrap();
    writeln!(
        out,
        "plot for [d in decoders] for [s in sigmas] file every ::1 \\\n    using {n}:((strcol({dec}) eq d && strcol({sigma}) eq s) ? ${ser} : 1/0):{lo}:{hi} \\\n    with yerrorlines title sprintf('%s sigma=%g', d, s + 0)"
    )
    .unwrap();
    out
}
