//! Density evolution for the joint decoder: evolves the pdf of
//! correct-message LLRs through the four-step schedule and searches for
//! the noise tolerance threshold.
//!
//! Messages are tracked as sign-adjusted LLRs `(1 - 2x) L`, where `x` is
//! the true stored bit, so "correct" always means positive. The channel is
//! asymmetric (signal levels differ for 0 and 1 central bits), which rules
//! out the all-zero-codeword shortcut; the sign adjustment handles both
//! message polarities in one density.
//!
//! Per iteration, mirroring the decoder's schedule:
//! 1. variable-to-check density: FFT convolution of 7 measured-side and
//!    `dv - 1` check-side LLR densities; the error probability is read off
//!    this density.
//! 2. check-to-variable density: quantized two-input table applied
//!    `dc - 2` times.
//! 3. variable-to-measured density: convolution of `dv` check-side and 6
//!    measured-side densities.
//! 4. measured-to-variable density: Monte Carlo — simulate a random bit
//!    lattice with readback, draw the incoming messages i.i.d. from the
//!    current density, run the decoder's exact measured-node update, and
//!    histogram the outgoing sign-adjusted LLRs.
//!
//! The incoming-message independence at the measured node is the standard
//! cycle-free idealization; the channel graph has short cycles at any
//! block length, so computed thresholds are upper-bound estimates.

use crate::channel::{gaussian_pdf, readback, SignalLevelTable};
use crate::density::{CheckTable, LlrGrid, QuantizedDensity};
use crate::error::{Error, Result};
use crate::factor_graph::measured_node_update;
use crate::lattice::{HexGrid, NEIGHBOR_OFFSETS};
use crate::ldpc::mix_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Interior variables see one measured node as central bit and six as
/// neighbor bit.
pub const CHANNEL_DEGREE: usize = 7;

/// Density-evolution configuration for one (dv, dc, sigma2) point.
#[derive(Debug, Clone)]
pub struct DeConfig {
    pub dv: usize,
    pub dc: usize,
    pub sigma2: f64,
    /// Monte Carlo lattice dimensions for the measured-node stage.
    pub mc_rows: usize,
    pub mc_cols: usize,
    pub max_de_iters: usize,
    /// Error probability below which the evolution is declared convergent.
    pub pe_target: f64,
    pub grid: LlrGrid,
    /// Declare non-convergence early when the error probability improves
    /// by less than `stall_rel_decrease` over `stall_window` iterations
    /// while still above target. 0 disables the stall cut-off.
    pub stall_window: usize,
    pub stall_rel_decrease: f64,
    pub seed: u64,
}

impl DeConfig {
    pub fn new(dv: usize, dc: usize, sigma2: f64) -> Self {
        DeConfig {
            dv,
            dc,
            sigma2,
            mc_rows: 1000,
            mc_cols: 1000,
            max_de_iters: 200,
            pe_target: 1e-6,
            grid: LlrGrid::default_de(),
            stall_window: 15,
            stall_rel_decrease: 0.02,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dv < 2 || self.dc < 2 {
            return Err(Error::domain("dv and dc must be >= 2".to_string()));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::domain(format!("sigma2 {} must be > 0", self.sigma2)));
        }
        if !(self.pe_target > 0.0) {
            return Err(Error::domain(format!(
                "pe_target {} must be > 0",
                self.pe_target
            )));
        }
        if self.mc_rows == 0 || self.mc_cols == 0 {
            return Err(Error::domain("Monte Carlo lattice must be nonempty".to_string()));
        }
        Ok(())
    }
}

/// Density of a sum of i.i.d. check-side and measured-side LLRs at a
/// variable node, by repeated FFT convolution on the shared grid.
pub fn var_node_density(
    check_in: &QuantizedDensity,
    measured_in: &QuantizedDensity,
    check_count: usize,
    measured_count: usize,
) -> Result<QuantizedDensity> {
    if check_in.grid() != measured_in.grid() {
        return Err(Error::domain("density grid mismatch".to_string()));
    }
    let mut acc = QuantizedDensity::point_mass(check_in.grid(), 0.0);
    for _ in 0..measured_count {
        acc = acc.convolve(measured_in)?;
    }
    for _ in 0..check_count {
        acc = acc.convolve(check_in)?;
    }
    Ok(acc)
}

/// Check-node output density for `dc - 1` i.i.d. inputs. Builds a fresh
/// lookup table; prefer [`DeEngine`] when applying repeatedly on one grid.
pub fn check_node_density(input: &QuantizedDensity, dc: usize) -> Result<QuantizedDensity> {
    CheckTable::new(input.grid())?.fold(input, dc)
}

/// Error probability of a density per the decision rule (mass below zero
/// plus half the zero bin).
pub fn error_probability(d: &QuantizedDensity) -> f64 {
    d.error_probability()
}

fn llr_to_pair(llr: f64) -> [f64; 2] {
    if llr == f64::INFINITY {
        return [1.0, 0.0];
    }
    if llr == f64::NEG_INFINITY {
        return [0.0, 1.0];
    }
    let p0 = 1.0 / (1.0 + (-llr).exp());
    [p0, 1.0 - p0]
}

fn pair_to_llr(pair: [f64; 2]) -> f64 {
    (pair[0] / pair[1]).ln()
}

/// Counts histogram for one worker; exactly associative to merge.
struct CountHist {
    bins: Vec<u64>,
    neg_inf: u64,
    pos_inf: u64,
}

impl CountHist {
    fn new(n: usize) -> Self {
        CountHist {
            bins: vec![0; n],
            neg_inf: 0,
            pos_inf: 0,
        }
    }

    fn add(&mut self, grid: &LlrGrid, v: f64) {
        match grid.quantize(v) {
            crate::density::BinIdx::Bin(i) => self.bins[i] += 1,
            crate::density::BinIdx::NegInf => self.neg_inf += 1,
            crate::density::BinIdx::PosInf => self.pos_inf += 1,
        }
    }

    fn merge(mut self, other: CountHist) -> CountHist {
        for (a, b) in self.bins.iter_mut().zip(other.bins) {
            *a += b;
        }
        self.neg_inf += other.neg_inf;
        self.pos_inf += other.pos_inf;
        self
    }

    fn total(&self) -> u64 {
        self.bins.iter().sum::<u64>() + self.neg_inf + self.pos_inf
    }
}

/// Monte Carlo measured-node density update.
///
/// Simulates a guardless lattice of uniform random bits, generates its
/// readback at `sigma2`, draws each incoming variable-to-measured message
/// i.i.d. from `var_to_measured` (sign-adjusted onto the stored-bit axis),
/// runs the decoder's exact measured-node update at every cell, and
/// histograms every outgoing message's sign-adjusted LLR. Deterministic
/// per seed, independent of worker count.
pub fn measured_node_density_mc(
    var_to_measured: &QuantizedDensity,
    table: &SignalLevelTable,
    sigma2: f64,
    mc_rows: usize,
    mc_cols: usize,
    seed: u64,
) -> Result<QuantizedDensity> {
    if !(sigma2 > 0.0) {
        return Err(Error::domain(format!("sigma2 {sigma2} must be > 0")));
    }
    let grid = var_to_measured.grid();

    // Random stored bits, row-seeded for reproducibility.
    let bits: Vec<u8> = {
        let mut bits = vec![0u8; mc_rows * mc_cols];
        for (r, chunk) in bits.chunks_mut(mc_cols).enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 1));
            rng.set_stream(r as u64);
            for b in chunk.iter_mut() {
                *b = rng.gen_range(0..2u8);
            }
        }
        bits
    };
    let lattice = HexGrid::from_bits(mc_rows, mc_cols, None, bits)?;
    let rb = readback(&lattice, table, sigma2, mix_seed(seed, 2))?;

    let sampler = var_to_measured.sampler();
    let llr_seed = mix_seed(seed, 3);

    let hist = (0..mc_rows)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(llr_seed);
            rng.set_stream(r as u64);
            let mut h = CountHist::new(grid.bins());
            let mut neighbors_in = [[0.0f64; 2]; 6];
            let mut neighbor_bits = [0u8; 6];
            let mut out_neighbors = [[0.0f64; 2]; 6];
            let mut degenerate = 0u64;
            for c in 0..mc_cols {
                let center_bit = lattice.bit(crate::lattice::Coord::new(r, c));
                // Central incoming message.
                let s = sampler.sample(rng.gen::<f64>());
                let central_in = llr_to_pair((1.0 - 2.0 * center_bit as f64) * s);
                // In-bounds neighbors in fixed offset order.
                let mut d = 0;
                for (dr, dc) in NEIGHBOR_OFFSETS {
                    let nr = r as i64 + dr as i64;
                    let nc = c as i64 + dc as i64;
                    if nr < 0 || nc < 0 || nr as usize >= mc_rows || nc as usize >= mc_cols {
                        continue;
                    }
                    let nb = lattice.bit(crate::lattice::Coord::new(nr as usize, nc as usize));
                    let s = sampler.sample(rng.gen::<f64>());
                    neighbors_in[d] = llr_to_pair((1.0 - 2.0 * nb as f64) * s);
                    neighbor_bits[d] = nb;
                    d += 1;
                }
                // Likelihoods for this cell's observation.
                let rv = rb.intensity(crate::lattice::Coord::new(r, c));
                let mut pdf = [[0.0f64; 7]; 2];
                for b in 0..2u8 {
                    for n in 0..7 {
                        pdf[b as usize][n] =
                            gaussian_pdf(rv, table.level_unchecked(b, n), sigma2);
                    }
                }
                let mut out_central = [0.5f64, 0.5];
                measured_node_update(
                    &pdf,
                    Some(central_in),
                    &neighbors_in[..d],
                    &mut out_central,
                    &mut out_neighbors[..d],
                    &mut degenerate,
                );
                h.add(
                    &grid,
                    (1.0 - 2.0 * center_bit as f64) * pair_to_llr(out_central),
                );
                for i in 0..d {
                    h.add(
                        &grid,
                        (1.0 - 2.0 * neighbor_bits[i] as f64) * pair_to_llr(out_neighbors[i]),
                    );
                }
            }
            h
        })
        .reduce(|| CountHist::new(grid.bins()), CountHist::merge);

    let total = hist.total();
    if total < 1000 {
        return Err(Error::Sampling(format!(
            "histogram has only {total} samples (need at least 100 per decile); \
             raise mc_samples"
        )));
    }
    let mut out = QuantizedDensity::empty(grid);
    let scale = 1.0 / total as f64;
    {
        let slots = out.mass_mut();
        for (slot, &c) in slots.iter_mut().zip(&hist.bins) {
            *slot = c as f64 * scale;
        }
    }
    out.set_saturations(hist.neg_inf as f64 * scale, hist.pos_inf as f64 * scale);
    Ok(out)
}

/// Outcome of one density-evolution run.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub converged: bool,
    /// Error probability after each iteration's variable-to-check stage.
    pub pe_trajectory: Vec<f64>,
    pub iterations: usize,
    /// True when the run was cut short by the stall detector rather than
    /// the iteration cap.
    pub stalled: bool,
}

/// Density-evolution engine: caches the check lookup table for a grid.
pub struct DeEngine {
    grid: LlrGrid,
    check_table: CheckTable,
}

impl DeEngine {
    pub fn new(grid: LlrGrid) -> Result<Self> {
        Ok(DeEngine {
            grid,
            check_table: CheckTable::new(grid)?,
        })
    }

    /// Run the four-stage density pipeline until the error probability
    /// drops below `pe_target` (convergent) or the iteration budget or
    /// stall detector trips (non-convergent).
    pub fn evolve(&self, cfg: &DeConfig, table: &SignalLevelTable) -> Result<EvolveOutcome> {
        cfg.validate()?;
        if cfg.grid != self.grid {
            return Err(Error::domain("config grid does not match engine grid".to_string()));
        }
        let delta0 = QuantizedDensity::point_mass(self.grid, 0.0);
        let mut f_cv = delta0.clone();
        let mut f_rv = delta0;
        let mut trajectory = Vec::new();
        for iter in 1..=cfg.max_de_iters {
            // Every stage conserves mass to around machine precision, but a
            // relative drift epsilon would compound by a factor of roughly
            // (dv - 1) * (dc - 1) per iteration through the convolution
            // powers, so each stage output is renormalized.
            let mut f_vc = var_node_density(&f_cv, &f_rv, cfg.dv - 1, CHANNEL_DEGREE)?;
            debug_assert!((f_vc.total_mass() - 1.0).abs() < 1e-9);
            f_vc.normalize()?;
            let pe = f_vc.error_probability();
            trajectory.push(pe);
            if pe < cfg.pe_target {
                return Ok(EvolveOutcome {
                    converged: true,
                    pe_trajectory: trajectory,
                    iterations: iter,
                    stalled: false,
                });
            }
            if cfg.stall_window > 0 && trajectory.len() > cfg.stall_window {
                let before = trajectory[trajectory.len() - 1 - cfg.stall_window];
                if pe > before * (1.0 - cfg.stall_rel_decrease) {
                    return Ok(EvolveOutcome {
                        converged: false,
                        pe_trajectory: trajectory,
                        iterations: iter,
                        stalled: true,
                    });
                }
            }
            f_cv = self.check_table.fold(&f_vc, cfg.dc)?;
            debug_assert!((f_cv.total_mass() - 1.0).abs() < 1e-9);
            f_cv.normalize()?;
            let mut f_xr = var_node_density(&f_cv, &f_rv, cfg.dv, CHANNEL_DEGREE - 1)?;
            debug_assert!((f_xr.total_mass() - 1.0).abs() < 1e-9);
            f_xr.normalize()?;
            f_rv = measured_node_density_mc(
                &f_xr,
                table,
                cfg.sigma2,
                cfg.mc_rows,
                cfg.mc_cols,
                mix_seed(cfg.seed, 1000 + iter as u64),
            )?;
            debug_assert!((f_rv.total_mass() - 1.0).abs() < 1e-9);
        }
        Ok(EvolveOutcome {
            converged: false,
            pe_trajectory: trajectory,
            iterations: cfg.max_de_iters,
            stalled: false,
        })
    }

    /// Bisect sigma2 for the largest convergent value.
    ///
    /// `lo` must be convergent and `hi` non-convergent (bracketing is
    /// verified first). The search narrows to a relative width of 1% and
    /// returns the largest sigma2 observed to converge.
    pub fn threshold_search(
        &self,
        dv: usize,
        dc: usize,
        sigma2_lo: f64,
        sigma2_hi: f64,
        base: &DeConfig,
        table: &SignalLevelTable,
    ) -> Result<ThresholdResult> {
        if !(sigma2_lo > 0.0 && sigma2_hi > sigma2_lo) {
            return Err(Error::domain(format!(
                "invalid bracket [{sigma2_lo}, {sigma2_hi}]"
            )));
        }
        let run = |sigma2: f64, salt: u64| -> Result<EvolveOutcome> {
            let mut cfg = base.clone();
            cfg.dv = dv;
            cfg.dc = dc;
            cfg.sigma2 = sigma2;
            cfg.seed = mix_seed(base.seed, salt);
            self.evolve(&cfg, table)
        };

        let mut evolutions = 0usize;
        let lo_run = run(sigma2_lo, 0)?;
        evolutions += 1;
        if !lo_run.converged {
            return Err(Error::Bracketing(format!(
                "lower bound sigma2 = {sigma2_lo} does not converge (p_e stuck at {:.3e})",
                lo_run.pe_trajectory.last().copied().unwrap_or(f64::NAN)
            )));
        }
        let hi_run = run(sigma2_hi, 1)?;
        evolutions += 1;
        if hi_run.converged {
            return Err(Error::Bracketing(format!(
                "upper bound sigma2 = {sigma2_hi} converges; raise it"
            )));
        }

        let mut lo = sigma2_lo;
        let mut hi = sigma2_hi;
        let mut salt = 2u64;
        while hi - lo > 0.01 * hi {
            let mid = 0.5 * (lo + hi);
            let out = run(mid, salt)?;
            evolutions += 1;
            salt += 1;
            if out.converged {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(ThresholdResult {
            dv,
            dc,
            sigma2_star: lo,
            bracket: (lo, hi),
            evolutions,
        })
    }
}

/// Result of a threshold search for one ensemble.
#[derive(Debug, Clone)]
pub struct ThresholdResult {
    pub dv: usize,
    pub dc: usize,
    /// Largest noise variance observed to converge.
    pub sigma2_star: f64,
    /// Final bisection bracket (convergent, non-convergent).
    pub bracket: (f64, f64),
    /// Number of evolution runs spent.
    pub evolutions: usize,
}

/// One-shot evolution with a throwaway engine.
pub fn evolve(cfg: &DeConfig, table: &SignalLevelTable) -> Result<EvolveOutcome> {
    DeEngine::new(cfg.grid)?.evolve(cfg, table)
}

/// One-shot threshold search with a throwaway engine.
pub fn threshold_search(
    dv: usize,
    dc: usize,
    sigma2_lo: f64,
    sigma2_hi: f64,
    base: &DeConfig,
    table: &SignalLevelTable,
) -> Result<ThresholdResult> {
    DeEngine::new(base.grid)?.threshold_search(dv, dc, sigma2_lo, sigma2_hi, base, table)
}
