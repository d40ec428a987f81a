//! Quantized LLR densities: the unit of density evolution.
//!
//! A density lives on a uniform symmetric grid of `bins` cells spanning
//! `[-half_range, half_range)`, with bin centers at `(i - bins/2) * delta`
//! so that 0 is exactly a center and the sum of two centers is again a
//! center. Mass that leaves the grid is held in explicit point masses at
//! +/- infinity (saturation cells).

use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::cell::RefCell;

/// Uniform symmetric LLR grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrGrid {
    bins: usize,
    half_range: f64,
}

/// Where a real value lands on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinIdx {
    NegInf,
    Bin(usize),
    PosInf,
}

impl LlrGrid {
    pub fn new(bins: usize, half_range: f64) -> Result<Self> {
        if bins < 4 || bins % 2 != 0 {
            return Err(Error::domain(format!("bins = {bins} must be even and >= 4")));
        }
        if !(half_range > 0.0) || !half_range.is_finite() {
            return Err(Error::domain(format!("half_range = {half_range} must be positive")));
        }
        Ok(LlrGrid { bins, half_range })
    }

    /// Conventional settings: [-30, 30] with 2^12 bins.
    pub fn default_de() -> Self {
        LlrGrid {
            bins: 1 << 12,
            half_range: 30.0,
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn llr_min(&self) -> f64 {
        -self.half_range
    }

    pub fn llr_max(&self) -> f64 {
        self.half_range
    }

    pub fn delta(&self) -> f64 {
        2.0 * self.half_range / self.bins as f64
    }

    /// Center of bin `i`.
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 - (self.bins / 2) as f64) * self.delta()
    }

    /// The bin whose center is exactly 0.
    pub fn zero_bin(&self) -> usize {
        self.bins / 2
    }

    pub fn quantize(&self, v: f64) -> BinIdx {
        if v.is_nan() {
            return BinIdx::Bin(self.zero_bin());
        }
        if !v.is_finite() {
            return if v > 0.0 { BinIdx::PosInf } else { BinIdx::NegInf };
        }
        let idx = (v / self.delta()).round() + (self.bins / 2) as f64;
        if idx < 0.0 {
            BinIdx::NegInf
        } else if idx >= self.bins as f64 {
            BinIdx::PosInf
        } else {
            BinIdx::Bin(idx as usize)
        }
    }
}

/// A probability density over quantized LLR values, plus saturation masses.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDensity {
    grid: LlrGrid,
    mass: Vec<f64>,
    neg_inf: f64,
    pos_inf: f64,
}

impl QuantizedDensity {
    pub fn empty(grid: LlrGrid) -> Self {
        QuantizedDensity {
            grid,
            mass: vec![0.0; grid.bins()],
            neg_inf: 0.0,
            pos_inf: 0.0,
        }
    }

    /// Unit point mass at the bin containing `v` (or a saturation cell).
    pub fn point_mass(grid: LlrGrid, v: f64) -> Self {
        let mut d = Self::empty(grid);
        d.add_mass(v, 1.0);
        d
    }

    /// Normalized discrete density from (value, weight) atoms.
    pub fn from_atoms(grid: LlrGrid, atoms: &[(f64, f64)]) -> Result<Self> {
        let mut d = Self::empty(grid);
        for &(v, w) in atoms {
            if w < 0.0 {
                return Err(Error::domain(format!("negative atom weight {w}")));
            }
            d.add_mass(v, w);
        }
        d.normalize()?;
        Ok(d)
    }

    /// Gaussian density sampled onto the grid: pdf at bin centers,
    /// normalized over the grid (tails beyond the range are truncated).
    pub fn gaussian(grid: LlrGrid, mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::domain(format!("variance {variance} must be > 0")));
        }
        let mut d = Self::empty(grid);
        for i in 0..grid.bins() {
            d.mass[i] = crate::channel::gaussian_pdf(grid.center(i), mean, variance);
        }
        d.normalize()?;
        Ok(d)
    }

    pub fn grid(&self) -> LlrGrid {
        self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_mut(&mut self) -> &mut [f64] {
        &mut self.mass
    }

    pub fn neg_inf_mass(&self) -> f64 {
        self.neg_inf
    }

    pub fn pos_inf_mass(&self) -> f64 {
        self.pos_inf
    }

    pub fn set_saturations(&mut self, neg_inf: f64, pos_inf: f64) {
        self.neg_inf = neg_inf;
        self.pos_inf = pos_inf;
    }

    pub fn add_mass(&mut self, v: f64, w: f64) {
        match self.grid.quantize(v) {
            BinIdx::NegInf => self.neg_inf += w,
            BinIdx::PosInf => self.pos_inf += w,
            BinIdx::Bin(i) => self.mass[i] += w,
        }
    }

    /// Total mass including the saturation cells.
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.neg_inf + self.pos_inf
    }

    pub fn normalize(&mut self) -> Result<()> {
        let total = self.total_mass();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::domain(format!("cannot normalize density of mass {total}")));
        }
        for m in &mut self.mass {
            *m /= total;
        }
        self.neg_inf /= total;
        self.pos_inf /= total;
        Ok(())
    }

    /// Probability that the message is in error: mass strictly below zero
    /// plus half the mass of the bin centered at zero, plus the negative
    /// saturation mass.
    pub fn error_probability(&self) -> f64 {
        let z = self.grid.zero_bin();
        let below: f64 = self.mass[..z].iter().sum();
        self.neg_inf + below + 0.5 * self.mass[z]
    }

    /// Mean of |LLR| over the finite part (saturations excluded), for
    /// diagnostics.
    pub fn mean_abs_finite(&self) -> f64 {
        let finite: f64 = self.mass.iter().sum();
        if finite == 0.0 {
            return 0.0;
        }
        let s: f64 = self
            .mass
            .iter()
            .enumerate()
            .map(|(i, &m)| m * self.grid.center(i).abs())
            .sum();
        s / finite
    }

    /// Total-variation distance (half the L1 distance, including
    /// saturations).
    pub fn total_variation(&self, other: &QuantizedDensity) -> f64 {
        let finite: f64 = self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .sum();
        0.5 * (finite
            + (self.neg_inf - other.neg_inf).abs()
            + (self.pos_inf - other.pos_inf).abs())
    }

    /// Density of the sum of two independent LLRs, by FFT convolution of
    /// the finite parts. Sums that leave the grid saturate; opposite
    /// saturations cancel to the zero bin.
    pub fn convolve(&self, other: &QuantizedDensity) -> Result<QuantizedDensity> {
        self.check_same_grid(other)?;
        let mut out = self.convolve_saturations(other);
        let full = fft_convolve(&self.mass, &other.mass);
        self.fold_full_convolution(&full, &mut out);
        Ok(out)
    }

    /// Direct O(bins^2) convolution: the independent reference route for
    /// validating the FFT path.
    pub fn convolve_direct(&self, other: &QuantizedDensity) -> Result<QuantizedDensity> {
        self.check_same_grid(other)?;
        let n = self.grid.bins();
        let mut out = self.convolve_saturations(other);
        let mut full = vec![0.0f64; 2 * n - 1];
        for (i, &a) in self.mass.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.mass.iter().enumerate() {
                full[i + j] += a * b;
            }
        }
        self.fold_full_convolution(&full, &mut out);
        Ok(out)
    }

    fn check_same_grid(&self, other: &QuantizedDensity) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::domain("density grid mismatch".to_string()));
        }
        Ok(())
    }

    /// Saturation bookkeeping shared by both convolution routes.
    fn convolve_saturations(&self, other: &QuantizedDensity) -> QuantizedDensity {
        let mut out = QuantizedDensity::empty(self.grid);
        let a_fin: f64 = self.mass.iter().sum();
        let b_fin: f64 = other.mass.iter().sum();
        out.pos_inf = self.pos_inf * (other.pos_inf + b_fin) + other.pos_inf * a_fin;
        out.neg_inf = self.neg_inf * (other.neg_inf + b_fin) + other.neg_inf * a_fin;
        // Contradictory certainties cancel to "no information".
        out.mass[self.grid.zero_bin()] +=
            self.pos_inf * other.neg_inf + self.neg_inf * other.pos_inf;
        out
    }

    /// Map full-length convolution coefficients (index `s = i + j`) back
    /// onto the grid: center sums land exactly on centers at `s - bins/2`.
    fn fold_full_convolution(&self, full: &[f64], out: &mut QuantizedDensity) {
        let n = self.grid.bins();
        for (s, &w) in full.iter().enumerate() {
            if w <= 0.0 {
                continue; // clamp FFT round-off dust
            }
            let k = s as i64 - (n / 2) as i64;
            if k < 0 {
                out.neg_inf += w;
            } else if k >= n as i64 {
                out.pos_inf += w;
            } else {
                out.mass[k as usize] += w;
            }
        }
    }

    /// Cumulative distribution for inverse-CDF sampling, ordered
    /// (-inf, bins ascending, +inf).
    pub fn sampler(&self) -> DensitySampler {
        let mut cdf = Vec::with_capacity(self.grid.bins() + 2);
        let mut acc = self.neg_inf;
        cdf.push(acc);
        for &m in &self.mass {
            acc += m;
            cdf.push(acc);
        }
        acc += self.pos_inf;
        cdf.push(acc);
        DensitySampler {
            grid: self.grid,
            cdf,
        }
    }
}

/// Inverse-CDF sampler over a quantized density. Samples are bin centers
/// or +/- infinity for the saturation cells.
#[derive(Debug, Clone)]
pub struct DensitySampler {
    grid: LlrGrid,
    cdf: Vec<f64>,
}

impl DensitySampler {
    pub fn sample(&self, u: f64) -> f64 {
        let target = u * self.cdf[self.cdf.len() - 1];
        // First index with cdf > target.
        let idx = self.cdf.partition_point(|&c| c <= target);
        if idx == 0 {
            f64::NEG_INFINITY
        } else if idx > self.grid.bins() {
            f64::INFINITY
        } else {
            self.grid.center(idx - 1)
        }
    }
}

thread_local! {
    static FFT_PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Linear convolution of two equal-length nonnegative sequences.
fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let out_len = 2 * n - 1;
    let size = out_len.next_power_of_two();
    let (fft, ifft) = FFT_PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(size), p.plan_fft_inverse(size))
    });
    let mut fa: Vec<Complex<f64>> = a
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut fb: Vec<Complex<f64>> = b
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    fft.process(&mut fa);
    fft.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    ifft.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Quantized two-input check-node operation `2 atanh(tanh(x/2) tanh(y/2))`
/// as a precomputed bin-index table. The output magnitude never exceeds
/// either input's, so finite inputs always map to finite bins.
pub struct CheckTable {
    grid: LlrGrid,
    /// Row-major `bins x bins` output bin indices.
    idx: Vec<u16>,
    /// Output bin for a finite bin combined with a negative saturation:
    /// the mirrored bin, except the extreme negative center mirrors past
    /// the grid top into the positive saturation.
    mirror: Vec<BinIdx>,
}

impl CheckTable {
    pub fn new(grid: LlrGrid) -> Result<Self> {
        let n = grid.bins();
        if n > u16::MAX as usize {
            return Err(Error::domain(format!(
                "check table supports at most {} bins, got {n}",
                u16::MAX
            )));
        }
        let tanh_half: Vec<f64> = (0..n).map(|i| (grid.center(i) / 2.0).tanh()).collect();
        let mut idx = vec![0u16; n * n];
        for i in 0..n {
            for j in i..n {
                let t = tanh_half[i] * tanh_half[j];
                let out = 2.0 * t.atanh();
                let bin = match grid.quantize(out) {
                    BinIdx::Bin(b) => b as u16,
                    // atanh can overflow to +/-inf when |t| rounds to 1.
                    BinIdx::PosInf => (n - 1) as u16,
                    BinIdx::NegInf => 0u16,
                };
                idx[i * n + j] = bin;
                idx[j * n + i] = bin;
            }
        }
        let mirror = (0..n).map(|j| grid.quantize(-grid.center(j))).collect();
        Ok(CheckTable { grid, idx, mirror })
    }

    pub fn grid(&self) -> LlrGrid {
        self.grid
    }

    /// Density of the check-combined LLR of two independent inputs.
    ///
    /// Positive saturation acts as the identity (`tanh = 1`); negative
    /// saturation negates the other operand; two saturations combine by
    /// sign.
    pub fn apply(&self, a: &QuantizedDensity, b: &QuantizedDensity) -> Result<QuantizedDensity> {
        if a.grid() != self.grid || b.grid() != self.grid {
            return Err(Error::domain("density grid mismatch".to_string()));
        }
        let n = self.grid.bins();
        let mut out = QuantizedDensity::empty(self.grid);

        out.pos_inf = a.pos_inf * b.pos_inf + a.neg_inf * b.neg_inf;
        out.neg_inf = a.pos_inf * b.neg_inf + a.neg_inf * b.pos_inf;
        // Saturation x finite: identity or mirror on the finite operand.
        for (sat_mass_pos, sat_mass_neg, fin) in
            [(a.pos_inf, a.neg_inf, &b.mass), (b.pos_inf, b.neg_inf, &a.mass)]
        {
            if sat_mass_pos > 0.0 {
                for (j, &w) in fin.iter().enumerate() {
                    out.mass[j] += sat_mass_pos * w;
                }
            }
            if sat_mass_neg > 0.0 {
                for (j, &w) in fin.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    match self.mirror[j] {
                        BinIdx::Bin(mj) => out.mass[mj] += sat_mass_neg * w,
                        BinIdx::PosInf => out.pos_inf += sat_mass_neg * w,
                        BinIdx::NegInf => out.neg_inf += sat_mass_neg * w,
                    }
                }
            }
        }

        // Finite x finite through the table, parallelized over fixed row
        // blocks and reduced in block order so the result is independent of
        // the worker count.
        const BLOCKS: usize = 64;
        let block_len = n.div_ceil(BLOCKS);
        let partials: Vec<Vec<f64>> = {
            use rayon::prelude::*;
            (0..BLOCKS)
                .into_par_iter()
                .map(|blk| {
                    let lo = blk * block_len;
                    let hi = (lo + block_len).min(n);
                    let mut part = vec![0.0f64; n];
                    for i in lo..hi {
                        let ai = a.mass[i];
                        if ai <= 0.0 {
                            continue;
                        }
                        let row = &self.idx[i * n..(i + 1) * n];
                        for (j, &bj) in b.mass.iter().enumerate() {
                            if bj != 0.0 {
                                part[row[j] as usize] += ai * bj;
                            }
                        }
                    }
                    part
                })
                .collect()
        };
        for part in partials {
            for (o, p) in out.mass.iter_mut().zip(part) {
                *o += p;
            }
        }
        Ok(out)
    }

    /// Density of the check-node output with `dc - 1` i.i.d. inputs: the
    /// two-input table applied `dc - 2` times.
    pub fn fold(&self, input: &QuantizedDensity, dc: usize) -> Result<QuantizedDensity> {
        if dc < 2 {
            return Err(Error::domain(format!("check degree {dc} must be >= 2")));
        }
        let mut acc = input.clone();
        for _ in 0..dc - 2 {
            acc = self.apply(&acc, input)?;
        }
        Ok(acc)
    }
}
