//! The TwoDOS nonlinear readback model.
//!
//! Readback intensity for a cell depends only on its central bit and on how
//! many of its six hexagonal neighbors store a 1, giving 14 noiseless signal
//! levels. The shipped default table corresponds to a 165 nm lattice
//! parameter with 120 nm pit holes; other operating points can be loaded
//! from a key-value config file at runtime.

use crate::error::{Error, Result};
use crate::lattice::{Coord, HexGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Binomial coefficients C(6, n) for the six-neighbor shell.
pub const CHOOSE_6: [f64; 7] = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0];

/// The 14 noiseless readback intensities, indexed by central bit and number
/// of nonzero neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalLevelTable {
    s0: [f64; 7],
    s1: [f64; 7],
}

/// Default TwoDOS signal levels (dimensionless optical intensity).
const TWODOS_S0: [f64; 7] = [0.95, 0.80, 0.70, 0.55, 0.45, 0.35, 0.25];
const TWODOS_S1: [f64; 7] = [0.50, 0.35, 0.30, 0.20, 0.15, 0.10, 0.05];

impl SignalLevelTable {
    /// The shipped default operating point.
    pub fn twodos_default() -> Self {
        SignalLevelTable {
            s0: TWODOS_S0,
            s1: TWODOS_S1,
        }
    }

    /// Build a table, validating the invariants every downstream consumer
    /// relies on: values in [0,1], strictly decreasing in the neighbor
    /// count, and `s0[n] > s1[n]` for all n.
    pub fn new(s0: [f64; 7], s1: [f64; 7]) -> Result<Self> {
        for (name, vals) in [("s0", &s0), ("s1", &s1)] {
            for (n, &v) in vals.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::domain(format!(
                        "{name}[{n}] = {v} outside [0, 1]"
                    )));
                }
            }
            for n in 1..7 {
                if vals[n] >= vals[n - 1] {
                    return Err(Error::domain(format!(
                        "{name} not strictly decreasing at n = {n}: {} >= {}",
                        vals[n],
                        vals[n - 1]
                    )));
                }
            }
        }
        for n in 0..7 {
            if s0[n] <= s1[n] {
                return Err(Error::domain(format!(
                    "s0[{n}] = {} must exceed s1[{n}] = {}",
                    s0[n], s1[n]
                )));
            }
        }
        Ok(SignalLevelTable { s0, s1 })
    }

    /// Noiseless intensity for a central bit with `n` nonzero neighbors.
    pub fn level(&self, central: u8, n: usize) -> Result<f64> {
        if central > 1 {
            return Err(Error::domain(format!("central bit {central} not in {{0,1}}")));
        }
        if n > 6 {
            return Err(Error::domain(format!("neighbor count {n} not in [0, 6]")));
        }
        Ok(if central == 0 { self.s0[n] } else { self.s1[n] })
    }

    /// `level` without the bounds checks, for hot loops that index by
    /// construction-valid values.
    #[inline]
    pub(crate) fn level_unchecked(&self, central: u8, n: usize) -> f64 {
        if central == 0 {
            self.s0[n]
        } else {
            self.s1[n]
        }
    }

    /// Average signal energy over the 2^7 equiprobable local configurations:
    /// `sum_n C(6,n) (s0[n]^2 + s1[n]^2) / 2^7`.
    pub fn mean_signal_energy(&self) -> f64 {
        let sum: f64 = (0..7)
            .map(|n| CHOOSE_6[n] * (self.s0[n] * self.s0[n] + self.s1[n] * self.s1[n]))
            .sum();
        sum / 128.0
    }

    /// Parse a key-value config with exactly the 14 entries
    /// `s0_0..s0_6, s1_0..s1_6`. Missing or extra keys are rejected.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut s0 = [f64::NAN; 7];
        let mut s1 = [f64::NAN; 7];
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::Parse(format!("line {}: invalid number for `{key}`", lineno + 1))
            })?;
            let (prefix, idx) = key
                .split_once('_')
                .ok_or_else(|| Error::Parse(format!("unknown key `{key}`")))?;
            let n: usize = idx
                .parse()
                .map_err(|_| Error::Parse(format!("unknown key `{key}`")))?;
            if n > 6 {
                return Err(Error::Parse(format!("unknown key `{key}`")));
            }
            match prefix {
                "s0" => s0[n] = value,
                "s1" => s1[n] = value,
                _ => return Err(Error::Parse(format!("unknown key `{key}`"))),
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse(format!("duplicate key `{key}`")));
            }
        }
        if seen.len() != 14 {
            let missing: Vec<String> = (0..7)
                .flat_map(|n| [format!("s0_{n}"), format!("s1_{n}")])
                .filter(|k| !seen.contains(k))
                .collect();
            return Err(Error::Parse(format!(
                "signal table needs 14 entries, missing: {}",
                missing.join(", ")
            )));
        }
        Self::new(s0, s1)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }

    /// Serialize in the `from_config_str` format.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for n in 0..7 {
            out.push_str(&format!("s0_{n} = {}\n", self.s0[n]));
        }
        for n in 0..7 {
            out.push_str(&format!("s1_{n} = {}\n", self.s1[n]));
        }
        out
    }
}

/// Noisy readback intensities, one per grid cell.
#[derive(Debug, Clone)]
pub struct NoisyReadback {
    rows: usize,
    cols: usize,
    intensities: Vec<f64>,
    sigma2: f64,
}

impl NoisyReadback {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn intensity(&self, coord: Coord) -> f64 {
        self.intensities[coord.row * self.cols + coord.col]
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }
}

/// Noiseless readback level of one cell.
fn cell_level(grid: &HexGrid, table: &SignalLevelTable, coord: Coord) -> f64 {
    let n = grid
        .count_nonzero_neighbors(coord)
        .expect("coord in bounds by construction");
    table.level_unchecked(grid.bit(coord), n)
}

/// Simulate readback of `grid`: per-cell signal level plus white Gaussian
/// noise of variance `sigma2`.
///
/// Noise rows are seeded independently (ChaCha stream = row index), so the
/// output is bit-identical whether rows are generated sequentially or in
/// parallel, and is fully determined by `seed`.
pub fn readback(
    grid: &HexGrid,
    table: &SignalLevelTable,
    sigma2: f64,
    seed: u64,
) -> Result<NoisyReadback> {
    if sigma2 < 0.0 || !sigma2.is_finite() {
        return Err(Error::domain(format!("noise variance {sigma2} must be >= 0")));
    }
    let sigma = sigma2.sqrt();
    let (rows, cols) = (grid.rows(), grid.cols());
    let mut intensities = vec![0.0; rows * cols];
    for (r, chunk) in intensities.chunks_mut(cols).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        for (c, slot) in chunk.iter_mut().enumerate() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *slot = cell_level(grid, table, Coord::new(r, c)) + sigma * noise;
        }
    }
    Ok(NoisyReadback {
        rows,
        cols,
        intensities,
        sigma2,
    })
}

/// Gaussian likelihood of observing intensity `r` given the central bit and
/// neighbor count: a normal pdf with mean `table.level(central, n)` and
/// variance `sigma2`.
pub fn likelihood(
    r: f64,
    central: u8,
    n: usize,
    table: &SignalLevelTable,
    sigma2: f64,
) -> Result<f64> {
    if sigma2 <= 0.0 || !sigma2.is_finite() {
        return Err(Error::domain(format!("noise variance {sigma2} must be > 0")));
    }
    let mean = table.level(central, n)?;
    Ok(gaussian_pdf(r, mean, sigma2))
}

#[inline]
pub(crate) fn gaussian_pdf(x: f64, mean: f64, sigma2: f64) -> f64 {
    let d = x - mean;
    (-d * d / (2.0 * sigma2)).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt()
}

/// SNR in decibels: average signal energy over rate-scaled noise power,
/// `10 log10( mean_signal_energy / (rate * 2 * sigma2) )`.
pub fn snr_db(table: &SignalLevelTable, rate: f64, sigma2: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::domain(format!("rate {rate} must be in (0, 1]")));
    }
    if sigma2 <= 0.0 || !sigma2.is_finite() {
        return Err(Error::domain(format!("noise variance {sigma2} must be > 0")));
    }
    Ok(10.0 * (table.mean_signal_energy() / (rate * 2.0 * sigma2)).log10())
}

/// Noise variance that realizes a target SNR at the given rate (inverse of
/// [`snr_db`] in `sigma2`).
pub fn sigma2_for_snr_db(table: &SignalLevelTable, rate: f64, snr_db: f64) -> Result<f64> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::domain(format!("rate {rate} must be in (0, 1]")));
    }
    Ok(table.mean_signal_energy() / (rate * 2.0 * 10f64.powf(snr_db / 10.0)))
}
