//! Constellations, fading laws and the forward model `y = Hx + v`.
//!
//! Multi-dimensional constellations (4-PSK) are lifted to real coordinates:
//! a user with a `d`-dimensional symbol owns `d` consecutive entries of the
//! codeword and `d` independent columns of the real channel matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A finite set of distinct `d`-dimensional real symbol points.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<f64>,
    dim: usize,
    d_min: f64,
    box_radius: f64,
}

impl Constellation {
    /// Builds a constellation from `points`, each of length `dim`.
    pub fn new(points: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConstellation("dimension must be positive".into()));
        }
        if points.len() < 2 {
            return Err(Error::InvalidConstellation("need at least two points".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::InvalidConstellation(format!(
                "point {p:?} does not have dimension {dim}"
            )));
        }
        let mut d_min = f64::INFINITY;
        for (i, a) in points.iter().enumerate() {
            for b in &points[i + 1..] {
                d_min = d_min.min(dist(a, b));
            }
        }
        if !(d_min > 0.0) {
            return Err(Error::InvalidConstellation("points must be distinct".into()));
        }
        let box_radius = points.iter().map(|p| norm(p)).fold(0.0, f64::max);
        Ok(Self {
            points: points.concat(),
            dim,
            d_min,
            box_radius,
        })
    }

    /// Unit-energy BPSK, ordered `(-1, +1)`.
    pub fn bpsk() -> Self {
        Self::new(vec![vec![-1.0], vec![1.0]], 1).expect("valid")
    }

    /// Unit-average-energy 4-PAM, `{-3, -1, 1, 3} / sqrt(5)`.
    pub fn pam4() -> Self {
        let s = 5f64.sqrt();
        Self::new(vec![vec![-3.0 / s], vec![-1.0 / s], vec![1.0 / s], vec![3.0 / s]], 1).expect("valid")
    }

    /// 4-PSK on the axes, `(1,0), (0,1), (-1,0), (0,-1)`, lifted to two real
    /// coordinates per user.
    pub fn psk4() -> Self {
        Self::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
            2,
        )
        .expect("valid")
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Real dimensions per user symbol.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    /// `max_i ||m_i||_2`, the per-coordinate bound of the relaxed search box.
    pub fn box_radius(&self) -> f64 {
        self.box_radius
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Index of the nearest point to `v` in Euclidean distance; ties go to
    /// the lowest index.
    pub fn nearest(&self, v: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points().enumerate() {
            let d: f64 = p.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn is_bpsk(&self) -> bool {
        self.dim == 1 && self.points == [-1.0, 1.0]
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Named constellations selectable from configs and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    Bpsk,
    Pam4,
    Psk4,
}

impl ConstellationKind {
    pub fn build(self) -> Constellation {
        match self {
            ConstellationKind::Bpsk => Constellation::bpsk(),
            ConstellationKind::Pam4 => Constellation::pam4(),
            ConstellationKind::Psk4 => Constellation::psk4(),
        }
    }
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstellationKind::Bpsk => "bpsk",
            ConstellationKind::Pam4 => "pam4",
            ConstellationKind::Psk4 => "psk4",
        })
    }
}

impl FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bpsk" => Ok(Self::Bpsk),
            "pam4" => Ok(Self::Pam4),
            "psk4" => Ok(Self::Psk4),
            _ => Err(invalid("constellation", format!("unknown constellation `{s}`"))),
        }
    }
}

/// Zero-mean, unit-variance law of the i.i.d. channel entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingDistribution {
    #[default]
    Gaussian,
    /// Uniform on `{-1, +1}`.
    Rademacher,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
}

impl FadingDistribution {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            FadingDistribution::Gaussian => StandardNormal.sample(rng),
            FadingDistribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            FadingDistribution::Uniform => {
                let s = 3f64.sqrt();
                rng.random_range(-s..s)
            }
        }
    }

    /// `E|U|^3`.
    pub fn third_abs_moment(self) -> f64 {
        match self {
            FadingDistribution::Gaussian => 2.0 * (2.0 / std::f64::consts::PI).sqrt(),
            FadingDistribution::Rademacher => 1.0,
            FadingDistribution::Uniform => 3f64.powf(1.5) / 4.0,
        }
    }
}

impl fmt::Display for FadingDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FadingDistribution::Gaussian => "gaussian",
            FadingDistribution::Rademacher => "rademacher",
            FadingDistribution::Uniform => "uniform",
        })
    }
}

impl FromStr for FadingDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "rademacher" => Ok(Self::Rademacher),
            "uniform" => Ok(Self::Uniform),
            _ => Err(invalid("fading", format!("unknown fading distribution `{s}`"))),
        }
    }
}

/// How the number of receive antennas follows from the number of users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntennaSpec {
    /// Constant `m / n`.
    Alpha(f64),
    /// Vanishing ratio `alpha_n = 1 / (ln n)^xi`, `0 < xi < 1`.
    Xi(f64),
}

/// Users `n`, receive antennas `m` and the ratio that produced `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimensions {
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub xi: Option<f64>,
}

impl Dimensions {
    /// Direct construction with `alpha = m / n`.
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(invalid("n", "user and antenna counts must be positive"));
        }
        Ok(Self {
            n,
            m,
            alpha: m as f64 / n as f64,
            xi: None,
        })
    }
}

/// Resolves the antenna count: `m = max(1, round_half_up(alpha * n))`.
pub fn antennas_for(n: usize, spec: AntennaSpec) -> Result<Dimensions> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    let (alpha, xi) = match spec {
        AntennaSpec::Alpha(a) => {
            if !(a > 0.0) || !a.is_finite() {
                return Err(invalid("alpha", format!("must be positive, got {a}")));
            }
            (a, None)
        }
        AntennaSpec::Xi(xi) => {
            if !(xi > 0.0 && xi < 1.0) {
                return Err(invalid("xi", format!("must lie in (0, 1), got {xi}")));
            }
            if n < 2 {
                return Err(invalid("n", "the xi schedule needs n >= 2"));
            }
            (1.0 / (n as f64).ln().powf(xi), Some(xi))
        }
    };
    let m = ((alpha * n as f64 + 0.5).floor() as usize).max(1);
    Ok(Dimensions { n, m, alpha, xi })
}

/// `rows x cols` matrix of i.i.d. draws from `dist`.
pub fn sample_channel<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    dist: FadingDistribution,
    rng: &mut R,
) -> DMatrix<f64> {
    // Row-major draw order, independent of nalgebra's storage layout.
    let mut h = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            h[(i, j)] = dist.sample(rng);
        }
    }
    h
}

/// `n` uniformly chosen constellation points, concatenated.
pub fn sample_codeword<R: Rng + ?Sized>(c: &Constellation, n: usize, rng: &mut R) -> DVector<f64> {
    let d = c.dim();
    let mut x = DVector::zeros(n * d);
    for u in 0..n {
        let p = c.point(rng.random_range(0..c.len()));
        x.rows_mut(u * d, d).copy_from_slice(p);
    }
    x
}

/// `y = Hx + v` with `v` i.i.d. `N(0, sigma^2)`. With `sigma = 0` no noise is
/// drawn and `y = Hx` exactly.
pub fn transmit<R: Rng + ?Sized>(
    h: &DMatrix<f64>,
    x: &DVector<f64>,
    sigma: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if h.ncols() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "channel has {} columns but codeword has length {}",
            h.ncols(),
            x.len()
        )));
    }
    if !(sigma >= 0.0) {
        return Err(invalid("sigma", "must be nonnegative"));
    }
    let mut y = h * x;
    if sigma > 0.0 {
        for yi in y.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *yi += sigma * z;
        }
    }
    Ok(y)
}

/// Replaces every `d`-block of `v` with its nearest constellation point.
pub fn quantize(c: &Constellation, v: &DVector<f64>) -> Result<DVector<f64>> {
    let d = c.dim();
    if !v.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch(format!(
            "length {} is not a multiple of the symbol dimension {d}",
            v.len()
        )));
    }
    let mut out = DVector::zeros(v.len());
    for (block, dst) in v.as_slice().chunks_exact(d).zip(out.as_mut_slice().chunks_exact_mut(d)) {
        dst.copy_from_slice(c.point(c.nearest(block)));
    }
    Ok(out)
}

/// Coordinatewise sign with `sgn(0) = -1`.
pub fn sgn(v: &DVector<f64>) -> DVector<f64> {
    v.map(|x| if x > 0.0 { 1.0 } else { -1.0 })
}

/// Block-diagonal matrix with `t` copies of `h`: a channel held constant over
/// `t` slots acting on the stacked per-slot codewords.
pub fn lift_block_fading(h: &DMatrix<f64>, t: usize) -> Result<DMatrix<f64>> {
    if t == 0 {
        return Err(invalid("T", "must be at least 1"));
    }
    let (r, c) = h.shape();
    let mut out = DMatrix::zeros(r * t, c * t);
    for s in 0..t {
        out.view_mut((s * r, s * c), (r, c)).copy_from(h);
    }
    Ok(out)
}

/// Number of users whose `d`-block differs between `a` and `b`.
pub fn symbol_errors(d: usize, a: &DVector<f64>, b: &DVector<f64>) -> usize {
    a.as_slice()
        .chunks_exact(d)
        .zip(b.as_slice().chunks_exact(d))
        .filter(|(p, q)| p != q)
        .count()
}

/// One realized channel problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemInstance {
    pub h: DMatrix<f64>,
    pub x0: DVector<f64>,
    pub sigma: f64,
    pub y: DVector<f64>,
}

impl SystemInstance {
    /// Draws channel, codeword and noise, in that order, from `rng`.
    pub fn generate<R: Rng + ?Sized>(
        dims: &Dimensions,
        c: &Constellation,
        fading: FadingDistribution,
        sigma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let d = c.dim();
        let h = sample_channel(dims.m * d, dims.n * d, fading, rng);
        let x0 = sample_codeword(c, dims.n, rng);
        let y = transmit(&h, &x0, sigma, rng)?;
        Ok(Self { h, x0, sigma, y })
    }

    pub fn users(&self, c: &Constellation) -> usize {
        self.x0.len() / c.dim()
    }
}
