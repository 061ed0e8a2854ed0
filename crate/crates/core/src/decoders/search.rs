//! Exact minimization of `||y - Hx||^2` over a product of per-block
//! candidate lists.
//!
//! Candidates are ranked lexicographically by their index sequence, block 0
//! most significant; among equal residuals the lowest rank wins.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::par::{map_reduce, Execution};

/// Suffix enumerations per task are capped at this many candidates.
const SUFFIX_CAP: u64 = 4096;

/// Per-block candidates: `points[b]` is a flat list of `d`-vectors.
pub(crate) struct Blocks<'a> {
    pub points: Vec<&'a [f64]>,
    pub d: usize,
}

impl Blocks<'_> {
    fn radix(&self, b: usize) -> usize {
        self.points[b].len() / self.d
    }

    fn candidate(&self, b: usize, j: usize) -> &[f64] {
        &self.points[b][j * self.d..(j + 1) * self.d]
    }

    pub fn bits(&self) -> f64 {
        (0..self.points.len()).map(|b| (self.radix(b) as f64).log2()).sum()
    }

    fn assemble(&self, idx: &[usize]) -> DVector<f64> {
        let mut x = DVector::zeros(idx.len() * self.d);
        for (b, &j) in idx.iter().enumerate() {
            x.rows_mut(b * self.d, self.d).copy_from_slice(self.candidate(b, j));
        }
        x
    }
}

pub(crate) struct SearchResult {
    pub x: DVector<f64>,
    pub cost: f64,
    /// Candidates evaluated (exhaustive) or tree nodes expanded (branch and bound).
    pub work: u64,
}

/// Enumerates every candidate. Fails if the search space exceeds
/// `2^max_bits`.
pub(crate) fn exhaustive(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    blocks: &Blocks<'_>,
    max_bits: u32,
    exec: Execution,
) -> Result<SearchResult> {
    let nb = blocks.points.len();
    let bits = blocks.bits();
    if bits > f64::from(max_bits.min(62)) + 1e-9 {
        return Err(Error::SearchTooLarge { bits, limit: max_bits });
    }
    let radix: Vec<usize> = (0..nb).map(|b| blocks.radix(b)).collect();
    if radix.contains(&0) {
        return Err(Error::EmptyGrid("a block has no candidates".into()));
    }
    // contrib[b][j] = H_b * candidate(b, j).
    let d = blocks.d;
    let contrib: Vec<Vec<DVector<f64>>> = (0..nb)
        .map(|b| {
            let hb = h.columns(b * d, d);
            (0..radix[b])
                .map(|j| hb * DVector::from_row_slice(blocks.candidate(b, j)))
                .collect()
        })
        .collect();

    let mut split = nb;
    let mut suffix_size = 1u64;
    while split > 0 && suffix_size * radix[split - 1] as u64 <= SUFFIX_CAP {
        split -= 1;
        suffix_size *= radix[split] as u64;
    }
    if split == nb {
        split = nb - 1;
        suffix_size = radix[split] as u64;
    }
    let prefix_count: u64 = radix[..split].iter().map(|&r| r as u64).product();

    let task = |p: u64| -> (f64, u64) {
        let mut r = y.clone();
        let mut rem = p;
        for b in (0..split).rev() {
            let j = (rem % radix[b] as u64) as usize;
            rem /= radix[b] as u64;
            r -= &contrib[b][j];
        }
        let mut idx = vec![0usize; nb - split];
        for block in &contrib[split..] {
            r -= &block[0];
        }
        let mut best = (f64::INFINITY, u64::MAX);
        for s in 0..suffix_size {
            let cost = r.norm_squared();
            if cost < best.0 {
                best = (cost, p * suffix_size + s);
            }
            // Odometer step, last block fastest.
            let mut b = nb;
            while b > split {
                b -= 1;
                let k = b - split;
                let old = idx[k];
                if old + 1 < radix[b] {
                    r += &contrib[b][old];
                    r -= &contrib[b][old + 1];
                    idx[k] = old + 1;
                    break;
                }
                r += &contrib[b][old];
                r -= &contrib[b][0];
                idx[k] = 0;
            }
        }
        best
    };
    let reduce = |a: (f64, u64), b: (f64, u64)| match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    };
    let (_, rank) = map_reduce(exec, 0..prefix_count, || (f64::INFINITY, u64::MAX), task, reduce);

    let mut idx = vec![0usize; nb];
    let mut rem = rank;
    for b in (0..nb).rev() {
        idx[b] = (rem % radix[b] as u64) as usize;
        rem /= radix[b] as u64;
    }
    let x = blocks.assemble(&idx);
    Ok(SearchResult {
        cost: (y - h * &x).norm_squared(),
        x,
        work: prefix_count * suffix_size,
    })
}

/// Depth-first branch and bound on the QR factor of a full-column-rank `H`,
/// children visited in order of increasing partial cost and pruned only when
/// strictly worse than the incumbent. Fails after `2^max_bits` node
/// expansions or if `H` is column-rank deficient.
pub(crate) fn branch_and_bound(
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    blocks: &Blocks<'_>,
    max_bits: u32,
    rank_tol: f64,
) -> Result<SearchResult> {
    let (m, cols) = h.shape();
    let bits = blocks.bits();
    let too_large = Error::SearchTooLarge { bits, limit: max_bits };
    if m < cols {
        return Err(too_large);
    }
    let qr = h.clone().qr();
    let r = qr.r();
    let qty = qr.q().tr_mul(y);
    let diag_max = r.diagonal().amax();
    if !(diag_max > 0.0) || r.diagonal().iter().any(|v| v.abs() <= rank_tol * diag_max) {
        return Err(too_large);
    }
    let nb = blocks.points.len();
    let mut state = Bnb {
        r: &r,
        qty: &qty,
        blocks,
        x: vec![0.0; cols],
        idx: vec![0; nb],
        best_cost: f64::INFINITY,
        best_idx: Vec::new(),
        nodes: 0,
        budget: 1u64 << max_bits.min(62),
    };
    if !state.visit(nb - 1, 0.0) {
        return Err(too_large);
    }
    let x = blocks.assemble(&state.best_idx);
    Ok(SearchResult {
        cost: (y - h * &x).norm_squared(),
        x,
        work: state.nodes,
    })
}

struct Bnb<'a> {
    r: &'a DMatrix<f64>,
    qty: &'a DVector<f64>,
    blocks: &'a Blocks<'a>,
    x: Vec<f64>,
    idx: Vec<usize>,
    best_cost: f64,
    best_idx: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl Bnb<'_> {
    /// Returns false once the node budget is exhausted.
    fn visit(&mut self, b: usize, partial: f64) -> bool {
        let d = self.blocks.d;
        let lo = b * d;
        let cols = self.x.len();
        // Contribution of the already-fixed later blocks to this block's rows.
        let fixed: Vec<f64> = (lo..lo + d)
            .map(|row| (lo + d..cols).map(|c| self.r[(row, c)] * self.x[c]).sum::<f64>())
            .collect();
        let radix = self.blocks.radix(b);
        let mut children: Vec<(f64, usize)> = (0..radix)
            .map(|j| {
                let v = self.blocks.candidate(b, j);
                let mut cost = partial;
                for (k, row) in (lo..lo + d).enumerate() {
                    let own: f64 = (row..lo + d).map(|c| self.r[(row, c)] * v[c - lo]).sum();
                    let e = self.qty[row] - fixed[k] - own;
                    cost += e * e;
                }
                (cost, j)
            })
            .collect();
        children.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        for (cost, j) in children {
            if cost > self.best_cost {
                break;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                return false;
            }
            self.idx[b] = j;
            self.x[lo..lo + d].copy_from_slice(self.blocks.candidate(b, j));
            if b == 0 {
                if cost < self.best_cost || (cost == self.best_cost && self.idx < self.best_idx) {
                    self.best_cost = cost;
                    self.best_idx = self.idx.clone();
                }
            } else if !self.visit(b - 1, cost) {
                return false;
            }
        }
        true
    }
}
