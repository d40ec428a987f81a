//! Sum-product message passing on the joint code/channel factor graph.
//!
//! The graph has three node levels: variable nodes (one per codeword bit,
//! positioned on the hex lattice), check nodes (one per parity row), and
//! measured-data nodes (one per readback sample, adjacent to its central
//! bit and up to six neighbor bits). Messages are normalized probability
//! pairs `(p(0), p(1))`.
//!
//! One decoding iteration runs four update families in a fixed order:
//! variables to checks, checks to variables, variables to measured nodes,
//! measured nodes to variables. Each family is stored in its own array and
//! a step only writes the family it owns while reading the others, so every
//! step is data-parallel over its nodes and a full iteration is
//! deterministic regardless of evaluation order.
//!
//! Guard-band rows and out-of-bounds lattice positions hold known zeros;
//! they carry no messages and are folded directly into the likelihood
//! counting at the measured nodes. Per-iteration cost is linear in the
//! number of bits and quadratic in the neighborhood size.

use crate::channel::{gaussian_pdf, NoisyReadback, SignalLevelTable};
use crate::error::{Error, Result};
use crate::lattice::{HexGrid, NEIGHBOR_OFFSETS};
use crate::ldpc::ParityCheckMatrix;

/// Lower clamp applied to stored message components. Prevents hard zero
/// products from extreme likelihoods while keeping pairs within 1e-9 of
/// normalized.
pub const MIN_MESSAGE_PROB: f64 = 1e-30;

/// Normalize a nonnegative pair into a clamped probability pair. A pair
/// whose sum underflows to zero (or is not finite) resolves to uniform and
/// bumps the degeneracy counter.
#[inline]
fn normalize(pair: [f64; 2], degenerate: &mut u64) -> [f64; 2] {
    let s = pair[0] + pair[1];
    if !(s > 0.0 && s.is_finite()) {
        *degenerate += 1;
        return [0.5, 0.5];
    }
    [
        (pair[0] / s).max(MIN_MESSAGE_PROB),
        (pair[1] / s).max(MIN_MESSAGE_PROB),
    ]
}

/// The exact measured-data node update shared by the decoder and the
/// density-evolution Monte Carlo stage.
///
/// `pdf[b][n]` is the likelihood of the node's observed intensity given
/// central bit `b` and `n` nonzero neighbors among all six neighbor
/// positions; positions holding known zeros simply never contribute a one,
/// so only the `neighbors_in.len() <= 6` data neighbors appear here.
///
/// The counting distribution over the number of ones is the coefficient
/// sequence of `prod_i (q_i(0) + q_i(1) z)`; leave-one-out distributions
/// come from prefix/suffix polynomial products.
pub(crate) fn measured_node_update(
    pdf: &[[f64; 7]; 2],
    central_in: Option<[f64; 2]>,
    neighbors_in: &[[f64; 2]],
    out_central: &mut [f64; 2],
    out_neighbors: &mut [[f64; 2]],
    degenerate: &mut u64,
) {
    let d = neighbors_in.len();
    debug_assert!(d <= 6);
    debug_assert_eq!(out_neighbors.len(), d);

    // prefix[i][t]: coefficient of z^t in prod_{j<i} (q_j(0) + q_j(1) z).
    let mut prefix = [[0.0f64; 7]; 8];
    prefix[0][0] = 1.0;
    for i in 0..d {
        let q = neighbors_in[i];
        let (lo, hi) = prefix.split_at_mut(i + 1);
        let src = &lo[i];
        let dst = &mut hi[0];
        dst[0] = src[0] * q[0];
        for t in 1..=i + 1 {
            dst[t] = src[t] * q[0] + src[t - 1] * q[1];
        }
        for t in (i + 2)..7 {
            dst[t] = 0.0;
        }
    }
    // suffix[i][t]: same for prod_{j>=i}.
    let mut suffix = [[0.0f64; 7]; 8];
    suffix[d][0] = 1.0;
    for i in (0..d).rev() {
        let q = neighbors_in[i];
        let len = d - i; // factors i+1..d contributed degree d-i-1
        let (lo, hi) = suffix.split_at_mut(i + 1);
        let src = &hi[0];
        let dst = &mut lo[i];
        dst[0] = src[0] * q[0];
        for t in 1..=len {
            dst[t] = src[t] * q[0] + src[t - 1] * q[1];
        }
        for t in (len + 1)..7 {
            dst[t] = 0.0;
        }
    }

    if central_in.is_some() {
        let full = &prefix[d];
        let mut pair = [0.0; 2];
        for b in 0..2 {
            let mut s = 0.0;
            for t in 0..=d {
                s += full[t] * pdf[b][t];
            }
            pair[b] = s;
        }
        *out_central = normalize(pair, degenerate);
    }

    let central = central_in.unwrap_or([1.0, 0.0]);
    for i in 0..d {
        // Leave-one-out counting distribution over the other d-1 neighbors.
        let mut counts = [0.0f64; 7];
        let pre = &prefix[i];
        let suf = &suffix[i + 1];
        for a in 0..=i {
            if pre[a] == 0.0 {
                continue;
            }
            for b in 0..=(d - 1 - i) {
                counts[a + b] += pre[a] * suf[b];
            }
        }
        let mut pair = [0.0; 2];
        for b in 0..2 {
            let mut s = 0.0;
            for (a, &ca) in central.iter().enumerate() {
                if ca == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for t in 0..d {
                    inner += counts[t] * pdf[a][t + b];
                }
                s += ca * inner;
            }
            pair[b] = s;
        }
        out_neighbors[i] = normalize(pair, degenerate);
    }
}

/// Outcome of a decoding run.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    /// Hard-decision word, one bit per variable in codeword (raster) order.
    pub word: Vec<u8>,
    /// True when the word satisfies every parity check.
    pub converged: bool,
    /// Iterations actually executed (early stop counts the final one).
    pub iterations_used: usize,
    /// Hamming distance to the reference word after each iteration, when a
    /// reference was supplied.
    pub per_iteration_bit_errors: Option<Vec<usize>>,
    /// Number of zero-product degeneracies resolved to uniform.
    pub degenerate_products: u64,
}

/// Joint code/channel factor graph with per-edge message storage.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    rows: usize,
    cols: usize,
    track_height: Option<usize>,
    n_vars: usize,
    n_checks: usize,
    n_cells: usize,

    // Code-side adjacency. Code edge e lies in check c for
    // check_off[c] <= e < check_off[c+1].
    check_off: Vec<u32>,
    var_code_off: Vec<u32>,
    var_code_edge: Vec<u32>,

    // Channel-side adjacency. Channel edge e belongs to measured cell r for
    // meas_off[r] <= e < meas_off[r+1]; the central edge (if the cell is a
    // data cell) is listed first.
    meas_off: Vec<u32>,
    central_edge: Vec<i32>,
    var_ch_off: Vec<u32>,
    var_ch_edge: Vec<u32>,

    // Evidence: pdf[cell][b][n], set by `set_evidence`.
    sigma2: f64,
    pdf: Vec<[[f64; 7]; 2]>,

    // Directed message families.
    m_vc: Vec<[f64; 2]>,
    m_cv: Vec<[f64; 2]>,
    m_vr: Vec<[f64; 2]>,
    m_rv: Vec<[f64; 2]>,

    degenerate_products: u64,
}

impl FactorGraph {
    /// Build the graph topology for code `h` laid out on a
    /// `rows` x `cols` lattice with the given guard-band convention.
    pub fn build(
        h: &ParityCheckMatrix,
        rows: usize,
        cols: usize,
        track_height: Option<usize>,
    ) -> Result<Self> {
        let probe = HexGrid::new(rows, cols, track_height)?;
        let n_cells = rows * cols;
        if h.n() != probe.data_cell_count() {
            return Err(Error::domain(format!(
                "code block length {} does not match the {} data cells of a {}x{} grid",
                h.n(),
                probe.data_cell_count(),
                rows,
                cols
            )));
        }
        let n_vars = h.n();
        let n_checks = h.m();

        // Cell <-> variable maps, raster order over non-guard cells.
        let mut var_of_cell = vec![-1i32; n_cells];
        let mut next = 0u32;
        for r in 0..rows {
            if probe.is_guard_row(r) {
                continue;
            }
            for c in 0..cols {
                var_of_cell[r * cols + c] = next as i32;
                next += 1;
            }
        }

        // Code-side CSR.
        let mut check_off = Vec::with_capacity(n_checks + 1);
        let mut check_edge_var = Vec::with_capacity(h.edge_count());
        check_off.push(0u32);
        for c in 0..n_checks {
            check_edge_var.extend_from_slice(h.check_vars(c));
            check_off.push(check_edge_var.len() as u32);
        }
        let (var_code_off, var_code_edge) = group_edges_by_var(n_vars, &check_edge_var);

        // Channel-side CSR: walk cells in raster order; for each cell add
        // its central edge first (if a data cell), then its in-bounds data
        // neighbors in the fixed offset order.
        let mut meas_off = Vec::with_capacity(n_cells + 1);
        let mut meas_edge_var: Vec<u32> = Vec::with_capacity(n_cells * 7);
        let mut central_edge = vec![-1i32; n_cells];
        meas_off.push(0u32);
        for r in 0..rows {
            for c in 0..cols {
                let cell = r * cols + c;
                if var_of_cell[cell] >= 0 {
                    central_edge[cell] = meas_edge_var.len() as i32;
                    meas_edge_var.push(var_of_cell[cell] as u32);
                }
                for (dr, dc) in NEIGHBOR_OFFSETS {
                    let nr = r as i64 + dr as i64;
                    let nc = c as i64 + dc as i64;
                    if nr < 0 || nc < 0 || nr as usize >= rows || nc as usize >= cols {
                        continue;
                    }
                    let ncell = nr as usize * cols + nc as usize;
                    if var_of_cell[ncell] >= 0 {
                        meas_edge_var.push(var_of_cell[ncell] as u32);
                    }
                }
                meas_off.push(meas_edge_var.len() as u32);
            }
        }
        let (var_ch_off, var_ch_edge) = group_edges_by_var(n_vars, &meas_edge_var);

        let code_edges = check_edge_var.len();
        let ch_edges = meas_edge_var.len();
        Ok(FactorGraph {
            rows,
            cols,
            track_height,
            n_vars,
            n_checks,
            n_cells,
            check_off,
            var_code_off,
            var_code_edge,
            meas_off,
            central_edge,
            var_ch_off,
            var_ch_edge,
            sigma2: 0.0,
            pdf: Vec::new(),
            m_vc: vec![[0.5, 0.5]; code_edges],
            m_cv: vec![[0.5, 0.5]; code_edges],
            m_vr: vec![[0.5, 0.5]; ch_edges],
            m_rv: vec![[0.5, 0.5]; ch_edges],
            degenerate_products: 0,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_checks(&self) -> usize {
        self.n_checks
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn track_height(&self) -> Option<usize> {
        self.track_height
    }

    pub fn degenerate_products(&self) -> u64 {
        self.degenerate_products
    }

    /// Precompute the 14 per-cell Gaussian likelihood values for one
    /// readback realization.
    pub fn set_evidence(
        &mut self,
        readback: &NoisyReadback,
        table: &SignalLevelTable,
        sigma2: f64,
    ) -> Result<()> {
        if sigma2 <= 0.0 || !sigma2.is_finite() {
            return Err(Error::domain(format!("noise variance {sigma2} must be > 0")));
        }
        if readback.rows() != self.rows || readback.cols() != self.cols {
            return Err(Error::domain(format!(
                "readback is {}x{}, graph is {}x{}",
                readback.rows(),
                readback.cols(),
                self.rows,
                self.cols
            )));
        }
        self.sigma2 = sigma2;
        self.pdf = readback
            .intensities()
            .iter()
            .map(|&r| {
                let mut cell = [[0.0; 7]; 2];
                for b in 0..2u8 {
                    for n in 0..7 {
                        cell[b as usize][n] =
                            gaussian_pdf(r, table.level_unchecked(b, n), sigma2);
                    }
                }
                cell
            })
            .collect();
        Ok(())
    }

    /// Reset all four message families to uniform and clear diagnostics.
    pub fn init_messages(&mut self) {
        for m in self
            .m_vc
            .iter_mut()
            .chain(self.m_cv.iter_mut())
            .chain(self.m_vr.iter_mut())
            .chain(self.m_rv.iter_mut())
        {
            *m = [0.5, 0.5];
        }
        self.degenerate_products = 0;
    }

    /// Variable-to-check messages: product of all incoming measured
    /// messages and all incoming check messages except the target edge.
    pub fn update_var_to_check(&mut self) {
        let mut degenerate = 0u64;
        for v in 0..self.n_vars {
            let ch = &self.var_ch_edge
                [self.var_ch_off[v] as usize..self.var_ch_off[v + 1] as usize];
            let mut base = [1.0f64, 1.0];
            for &e in ch {
                let m = self.m_rv[e as usize];
                base[0] *= m[0];
                base[1] *= m[1];
            }
            let code = &self.var_code_edge
                [self.var_code_off[v] as usize..self.var_code_off[v + 1] as usize];
            leave_one_out_product(code, &self.m_cv, base, &mut self.m_vc, &mut degenerate);
        }
        self.degenerate_products += degenerate;
    }

    /// Check-to-variable messages via the parity marginalization in its
    /// product form: with delta_i = p_i(0) - p_i(1), the outgoing pair is
    /// ((1 + prod delta)/2, (1 - prod delta)/2) over the other edges.
    pub fn update_check_to_var(&mut self) {
        for c in 0..self.n_checks {
            let lo = self.check_off[c] as usize;
            let hi = self.check_off[c + 1] as usize;
            let mut acc = 1.0f64;
            for e in lo..hi {
                self.m_cv[e][0] = acc;
                acc *= self.m_vc[e][0] - self.m_vc[e][1];
            }
            let mut acc = 1.0f64;
            for e in (lo..hi).rev() {
                let delta = self.m_cv[e][0] * acc;
                acc *= self.m_vc[e][0] - self.m_vc[e][1];
                self.m_cv[e] = [
                    ((1.0 + delta) / 2.0).max(MIN_MESSAGE_PROB),
                    ((1.0 - delta) / 2.0).max(MIN_MESSAGE_PROB),
                ];
            }
        }
    }

    /// Variable-to-measured messages: product of all incoming check
    /// messages and all incoming measured messages except the target edge.
    pub fn update_var_to_measured(&mut self) {
        let mut degenerate = 0u64;
        for v in 0..self.n_vars {
            let code = &self.var_code_edge
                [self.var_code_off[v] as usize..self.var_code_off[v + 1] as usize];
            let mut base = [1.0f64, 1.0];
            for &e in code {
                let m = self.m_cv[e as usize];
                base[0] *= m[0];
                base[1] *= m[1];
            }
            let ch = &self.var_ch_edge
                [self.var_ch_off[v] as usize..self.var_ch_off[v + 1] as usize];
            leave_one_out_product(ch, &self.m_rv, base, &mut self.m_vr, &mut degenerate);
        }
        self.degenerate_products += degenerate;
    }

    /// Measured-to-variable messages via the counting convolution over
    /// neighbor messages, with known-zero positions contributing nothing.
    pub fn update_measured_to_var(&mut self) {
        assert!(!self.pdf.is_empty(), "set_evidence must run before decoding");
        let mut degenerate = 0u64;
        let mut neighbors_in = [[0.0f64; 2]; 6];
        let mut out_neighbors = [[0.0f64; 2]; 6];
        for cell in 0..self.n_cells {
            let lo = self.meas_off[cell] as usize;
            let hi = self.meas_off[cell + 1] as usize;
            if lo == hi {
                continue;
            }
            let has_central = self.central_edge[cell] >= 0;
            let nb_lo = if has_central { lo + 1 } else { lo };
            let d = hi - nb_lo;
            for (i, e) in (nb_lo..hi).enumerate() {
                neighbors_in[i] = self.m_vr[e];
            }
            let central_in = has_central.then(|| self.m_vr[lo]);
            let mut out_central = [0.5f64, 0.5];
            measured_node_update(
                &self.pdf[cell],
                central_in,
                &neighbors_in[..d],
                &mut out_central,
                &mut out_neighbors[..d],
                &mut degenerate,
            );
            if has_central {
                self.m_rv[lo] = out_central;
            }
            self.m_rv[nb_lo..hi].copy_from_slice(&out_neighbors[..d]);
        }
        self.degenerate_products += degenerate;
    }

    /// Pseudo-posterior pairs: normalized product of every incoming check
    /// and measured message at each variable.
    pub fn pseudo_posteriors(&self) -> Vec<[f64; 2]> {
        let mut degenerate = 0u64;
        (0..self.n_vars)
            .map(|v| {
                let mut acc = [1.0f64, 1.0];
                for &e in &self.var_ch_edge
                    [self.var_ch_off[v] as usize..self.var_ch_off[v + 1] as usize]
                {
                    let m = self.m_rv[e as usize];
                    acc[0] *= m[0];
                    acc[1] *= m[1];
                }
                for &e in &self.var_code_edge
                    [self.var_code_off[v] as usize..self.var_code_off[v + 1] as usize]
                {
                    let m = self.m_cv[e as usize];
                    acc[0] *= m[0];
                    acc[1] *= m[1];
                }
                normalize(acc, &mut degenerate)
            })
            .collect()
    }

    /// Largest deviation of any stored message pair from summing to one.
    pub fn max_normalization_error(&self) -> f64 {
        self.m_vc
            .iter()
            .chain(&self.m_cv)
            .chain(&self.m_vr)
            .chain(&self.m_rv)
            .map(|p| (p[0] + p[1] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Run the four-step schedule for up to `max_iters` iterations.
    ///
    /// With `early_stop`, decoding halts as soon as the hard decision
    /// satisfies every parity check. `max_iters = 0` produces the
    /// channel-evidence-only decision (one measured-to-variable pass with
    /// uniform priors). A `reference` word enables per-iteration bit-error
    /// accounting.
    pub fn decode_with(
        &mut self,
        h: &ParityCheckMatrix,
        max_iters: usize,
        early_stop: bool,
        reference: Option<&[u8]>,
    ) -> Result<DecodeResult> {
        if h.n() != self.n_vars || h.m() != self.n_checks {
            return Err(Error::domain(
                "parity-check matrix does not match graph topology".to_string(),
            ));
        }
        if self.pdf.is_empty() {
            return Err(Error::domain(
                "no channel evidence; call set_evidence first".to_string(),
            ));
        }
        self.init_messages();
        let mut per_iter = reference.map(|_| Vec::with_capacity(max_iters));

        if max_iters == 0 {
            self.update_measured_to_var();
            let word = hard_decision_word(&self.pseudo_posteriors());
            let converged = h.syndrome_is_zero(&word)?;
            return Ok(DecodeResult {
                word,
                converged,
                iterations_used: 0,
                per_iteration_bit_errors: per_iter,
                degenerate_products: self.degenerate_products,
            });
        }

        let mut word = vec![0u8; self.n_vars];
        let mut converged = false;
        let mut iterations_used = 0;
        for _iter in 0..max_iters {
            self.update_var_to_check();
            self.update_check_to_var();
            self.update_var_to_measured();
            self.update_measured_to_var();
            iterations_used += 1;
            word = hard_decision_word(&self.pseudo_posteriors());
            if let (Some(per_iter), Some(reference)) = (per_iter.as_mut(), reference) {
                per_iter.push(hamming(&word, reference));
            }
            if h.syndrome_is_zero(&word)? {
                converged = true;
                if early_stop {
                    break;
                }
            } else {
                converged = false;
            }
        }
        Ok(DecodeResult {
            word,
            converged,
            iterations_used,
            per_iteration_bit_errors: per_iter,
            degenerate_products: self.degenerate_products,
        })
    }
}

/// Hard decision per the decision rule: 1 iff q(1) > q(0), ties decide 0.
pub fn hard_decision(q: [f64; 2]) -> u8 {
    if q[1] > q[0] {
        1
    } else {
        0
    }
}

fn hard_decision_word(posteriors: &[[f64; 2]]) -> Vec<u8> {
    posteriors.iter().map(|&q| hard_decision(q)).collect()
}

fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// For each edge in `edges`, write `base * prod of msgs over the other
/// edges`, normalized, into `out[edge]`.
fn leave_one_out_product(
    edges: &[u32],
    msgs: &[[f64; 2]],
    base: [f64; 2],
    out: &mut [[f64; 2]],
    degenerate: &mut u64,
) {
    let mut acc = base;
    for &e in edges {
        out[e as usize] = acc;
        let m = msgs[e as usize];
        acc[0] *= m[0];
        acc[1] *= m[1];
    }
    let mut acc = [1.0f64, 1.0];
    for &e in edges.iter().rev() {
        let o = &mut out[e as usize];
        o[0] *= acc[0];
        o[1] *= acc[1];
        let m = msgs[e as usize];
        acc[0] *= m[0];
        acc[1] *= m[1];
        *o = normalize(*o, degenerate);
    }
}

fn group_edges_by_var(n_vars: usize, edge_var: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut counts = vec![0u32; n_vars + 1];
    for &v in edge_var {
        counts[v as usize + 1] += 1;
    }
    for i in 0..n_vars {
        counts[i + 1] += counts[i];
    }
    let off = counts.clone();
    let mut slots: Vec<u32> = off[..n_vars].to_vec();
    let mut grouped = vec![0u32; edge_var.len()];
    for (e, &v) in edge_var.iter().enumerate() {
        grouped[slots[v as usize] as usize] = e as u32;
        slots[v as usize] += 1;
    }
    (off, grouped)
}

/// One-shot decoding: build the graph for `h` on the readback's lattice,
/// install the evidence, and run up to `max_iters` iterations with early
/// stopping.
pub fn decode(
    h: &ParityCheckMatrix,
    readback: &NoisyReadback,
    table: &SignalLevelTable,
    sigma2: f64,
    track_height: Option<usize>,
    max_iters: usize,
) -> Result<DecodeResult> {
    let mut graph = FactorGraph::build(h, readback.rows(), readback.cols(), track_height)?;
    graph.set_evidence(readback, table, sigma2)?;
    graph.decode_with(h, max_iters, true, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{likelihood, readback, CHOOSE_6};
    use crate::lattice::codeword_to_grid;
    use crate::ldpc::{construct_regular, SystematicEncoder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pair(rng: &mut impl Rng) -> [f64; 2] {
        let p: f64 = rng.gen_range(0.01..0.99);
        [p, 1.0 - p]
    }

    fn small_graph() -> (crate::ldpc::ParityCheckMatrix, FactorGraph) {
        let h = construct_regular(24, 3, 6, 1).unwrap();
        let g = FactorGraph::build(&h, 4, 6, None).unwrap();
        (h, g)
    }

    #[test]
    fn init_sets_every_pair_uniform() {
        let (_h, mut g) = small_graph();
        g.init_messages();
        for m in g.m_vc.iter().chain(&g.m_cv).chain(&g.m_vr).chain(&g.m_rv) {
            assert_eq!(*m, [0.5, 0.5]);
        }
    }

    #[test]
    fn first_var_to_check_is_uniform_after_init() {
        let (_h, mut g) = small_graph();
        g.init_messages();
        g.update_var_to_check();
        for m in &g.m_vc {
            assert!((m[0] - 0.5).abs() < 1e-15 && (m[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn lone_prior_passes_through_var_updates() {
        // One variable, no checks, two measured edges: the var-to-measured
        // message toward one node equals the message in from the other.
        let h = crate::ldpc::ParityCheckMatrix::from_rows(1, vec![], 0, 0).unwrap();
        let mut g = FactorGraph::build(&h, 1, 1, None).unwrap();
        // 1x1 grid: single cell, central edge only.
        g.init_messages();
        let prior = [0.9, 0.1];
        g.m_rv[0] = prior;
        g.update_var_to_check(); // no-op, no code edges
        g.update_var_to_measured();
        // Leave-one-out over the single channel edge: the outgoing message
        // excludes the only incoming one, so it is uniform.
        assert_eq!(g.m_vr[0], [0.5, 0.5]);
    }

    #[test]
    fn var_to_check_single_channel_prior_forwarded() {
        // Grid 1x2, two variables, one check over both; each variable has
        // channel edges. Set one variable's channel messages and verify its
        // var-to-check output equals their product with no check input.
        let h = crate::ldpc::ParityCheckMatrix::from_rows(2, vec![vec![0, 1]], 1, 2).unwrap();
        let mut g = FactorGraph::build(&h, 1, 2, None).unwrap();
        g.init_messages();
        // Variable 0 channel edges: find them.
        let edges: Vec<usize> = (g.var_ch_off[0] as usize..g.var_ch_off[1] as usize)
            .map(|i| g.var_ch_edge[i] as usize)
            .collect();
        let prior = [0.8, 0.2];
        g.m_rv[edges[0]] = prior;
        g.update_var_to_check();
        let e0 = g.var_code_edge[g.var_code_off[0] as usize] as usize;
        assert!((g.m_vc[e0][0] - prior[0]).abs() < 1e-12);
        assert!((g.m_vc[e0][1] - prior[1]).abs() < 1e-12);
    }

    #[test]
    fn var_updates_match_direct_product_oracle() {
        let (_h, mut g) = small_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in g.m_rv.iter_mut().chain(g.m_cv.iter_mut()) {
            *m = random_pair(&mut rng);
        }
        g.update_var_to_check();
        for v in 0..g.n_vars {
            let code: Vec<usize> = (g.var_code_off[v] as usize..g.var_code_off[v + 1] as usize)
                .map(|i| g.var_code_edge[i] as usize)
                .collect();
            let ch: Vec<usize> = (g.var_ch_off[v] as usize..g.var_ch_off[v + 1] as usize)
                .map(|i| g.var_ch_edge[i] as usize)
                .collect();
            for &target in &code {
                let mut expect = [1.0f64, 1.0];
                for &e in &ch {
                    expect[0] *= g.m_rv[e][0];
                    expect[1] *= g.m_rv[e][1];
                }
                for &e in &code {
                    if e != target {
                        expect[0] *= g.m_cv[e][0];
                        expect[1] *= g.m_cv[e][1];
                    }
                }
                let s = expect[0] + expect[1];
                expect = [expect[0] / s, expect[1] / s];
                assert!((g.m_vc[target][0] - expect[0]).abs() < 1e-12);
                assert!((g.m_vc[target][1] - expect[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn var_to_measured_matches_direct_product_oracle() {
        let (_h, mut g) = small_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for m in g.m_rv.iter_mut().chain(g.m_cv.iter_mut()) {
            *m = random_pair(&mut rng);
        }
        g.update_var_to_measured();
        for v in 0..g.n_vars {
            let code: Vec<usize> = (g.var_code_off[v] as usize..g.var_code_off[v + 1] as usize)
                .map(|i| g.var_code_edge[i] as usize)
                .collect();
            let ch: Vec<usize> = (g.var_ch_off[v] as usize..g.var_ch_off[v + 1] as usize)
                .map(|i| g.var_ch_edge[i] as usize)
                .collect();
            for &target in &ch {
                let mut expect = [1.0f64, 1.0];
                for &e in &code {
                    expect[0] *= g.m_cv[e][0];
                    expect[1] *= g.m_cv[e][1];
                }
                for &e in &ch {
                    if e != target {
                        expect[0] *= g.m_rv[e][0];
                        expect[1] *= g.m_rv[e][1];
                    }
                }
                let s = expect[0] + expect[1];
                expect = [expect[0] / s, expect[1] / s];
                assert!((g.m_vr[target][0] - expect[0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degree_two_check_repeats_the_other_message() {
        let h = crate::ldpc::ParityCheckMatrix::from_rows(2, vec![vec![0, 1]], 1, 2).unwrap();
        let mut g = FactorGraph::build(&h, 1, 2, None).unwrap();
        g.init_messages();
        g.m_vc[0] = [0.7, 0.3];
        g.m_vc[1] = [0.6, 0.4];
        g.update_check_to_var();
        // Toward edge 0 the product has one factor: delta of edge 1.
        let d1 = 0.6 - 0.4;
        assert!((g.m_cv[0][0] - (1.0 + d1) / 2.0).abs() < 1e-15);
        let d0 = 0.7 - 0.3;
        assert!((g.m_cv[1][0] - (1.0 + d0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_neighbor_makes_check_output_uniform() {
        let h = crate::ldpc::ParityCheckMatrix::from_rows(3, vec![vec![0, 1, 2]], 1, 3).unwrap();
        let mut g = FactorGraph::build(&h, 1, 3, None).unwrap();
        g.init_messages();
        g.m_vc[0] = [0.9, 0.1];
        g.m_vc[1] = [0.5, 0.5]; // kills the product toward edge 2 and 0
        g.m_vc[2] = [0.8, 0.2];
        g.update_check_to_var();
        assert!((g.m_cv[0][0] - 0.5).abs() < 1e-15);
        assert!((g.m_cv[2][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn check_update_matches_parity_enumeration() {
        // Brute-force oracle over even-parity configurations, dc in 3..=8.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for dc in 3..=8usize {
            let n = dc;
            let h =
                crate::ldpc::ParityCheckMatrix::from_rows(n, vec![(0..n as u32).collect()], 1, dc)
                    .unwrap();
            let mut g = FactorGraph::build(&h, 1, n, None).unwrap();
            for _rep in 0..50 {
                g.init_messages();
                let msgs: Vec<[f64; 2]> = (0..dc).map(|_| random_pair(&mut rng)).collect();
                g.m_vc.copy_from_slice(&msgs);
                g.update_check_to_var();
                for target in 0..dc {
                    let mut out = [0.0f64; 2];
                    for (b, slot) in out.iter_mut().enumerate() {
                        // Sum over configurations of the other dc-1 bits
                        // whose parity equals b.
                        for mask in 0..(1u32 << (dc - 1)) {
                            if (mask.count_ones() as usize) % 2 != b {
                                continue;
                            }
                            let mut prod = 1.0;
                            let mut pos = 0;
                            for (i, m) in msgs.iter().enumerate() {
                                if i == target {
                                    continue;
                                }
                                let bit = (mask >> pos) & 1;
                                prod *= m[bit as usize];
                                pos += 1;
                            }
                            *slot += prod;
                        }
                    }
                    let s = out[0] + out[1];
                    out = [out[0] / s, out[1] / s];
                    assert!(
                        (g.m_cv[target][0] - out[0]).abs() < 1e-10
                            && (g.m_cv[target][1] - out[1]).abs() < 1e-10,
                        "dc={dc} target={target}"
                    );
                }
            }
        }
    }

    /// Exhaustive-enumeration oracle for one measured node: sum the
    /// likelihood over all 2^d neighbor patterns weighted by the incoming
    /// messages.
    fn measured_oracle(
        pdf: &[[f64; 7]; 2],
        central_in: Option<[f64; 2]>,
        neighbors_in: &[[f64; 2]],
    ) -> (Option<[f64; 2]>, Vec<[f64; 2]>) {
        let d = neighbors_in.len();
        let central = measured_oracle_central(pdf, central_in, neighbors_in);
        let mut neigh = Vec::with_capacity(d);
        let cen = central_in.unwrap_or([1.0, 0.0]);
        for target in 0..d {
            let mut out = [0.0f64; 2];
            for (b, slot) in out.iter_mut().enumerate() {
                for a in 0..2usize {
                    if cen[a] == 0.0 {
                        continue;
                    }
                    for mask in 0..(1u32 << (d - 1)) {
                        let mut prod = 1.0;
                        let mut ones = b; // the target bit contributes b ones
                        let mut pos = 0;
                        for (i, m) in neighbors_in.iter().enumerate() {
                            if i == target {
                                continue;
                            }
                            let bit = ((mask >> pos) & 1) as usize;
                            ones += bit;
                            prod *= m[bit];
                            pos += 1;
                        }
                        *slot += cen[a] * prod * pdf[a][ones];
                    }
                }
            }
            let s = out[0] + out[1];
            neigh.push([out[0] / s, out[1] / s]);
        }
        (central, neigh)
    }

    fn measured_oracle_central(
        pdf: &[[f64; 7]; 2],
        central_in: Option<[f64; 2]>,
        neighbors_in: &[[f64; 2]],
    ) -> Option<[f64; 2]> {
        central_in?;
        let d = neighbors_in.len();
        let mut out = [0.0f64; 2];
        for (b, slot) in out.iter_mut().enumerate() {
            for mask in 0..(1u32 << d) {
                let mut prod = 1.0;
                let mut ones = 0usize;
                for (i, m) in neighbors_in.iter().enumerate() {
                    let bit = ((mask >> i) & 1) as usize;
                    ones += bit;
                    prod *= m[bit];
                }
                *slot += prod * pdf[b][ones];
            }
        }
        let s = out[0] + out[1];
        Some([out[0] / s, out[1] / s])
    }

    fn random_pdf(rng: &mut impl Rng) -> [[f64; 7]; 2] {
        let table = SignalLevelTable::twodos_default();
        let r: f64 = rng.gen_range(-0.2..1.2);
        let sigma2: f64 = rng.gen_range(0.005..0.1);
        let mut pdf = [[0.0; 7]; 2];
        for b in 0..2u8 {
            for n in 0..7 {
                pdf[b as usize][n] = likelihood(r, b, n, &table, sigma2).unwrap();
            }
        }
        pdf
    }

    #[test]
    fn measured_update_uniform_inputs_give_binomial_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let pdf = random_pdf(&mut rng);
        let neighbors = [[0.5, 0.5]; 6];
        let mut out_c = [0.0; 2];
        let mut out_n = [[0.0; 2]; 6];
        let mut deg = 0;
        measured_node_update(&pdf, Some([0.5, 0.5]), &neighbors, &mut out_c, &mut out_n, &mut deg);
        let mut expect = [0.0f64; 2];
        for (b, slot) in expect.iter_mut().enumerate() {
            for n in 0..7 {
                *slot += CHOOSE_6[n] / 64.0 * pdf[b][n];
            }
        }
        let s = expect[0] + expect[1];
        assert!((out_c[0] - expect[0] / s).abs() < 1e-12);
    }

    #[test]
    fn measured_update_known_zero_neighbors_reduce_to_two_level_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pdf = random_pdf(&mut rng);
        let neighbors = [[1.0, 0.0]; 6];
        let mut out_c = [0.0; 2];
        let mut out_n = [[0.0; 2]; 6];
        let mut deg = 0;
        measured_node_update(&pdf, Some([0.5, 0.5]), &neighbors, &mut out_c, &mut out_n, &mut deg);
        let s = pdf[0][0] + pdf[1][0];
        assert!((out_c[0] - pdf[0][0] / s).abs() < 1e-12);
        assert!((out_c[1] - pdf[1][0] / s).abs() < 1e-12);
    }

    #[test]
    fn measured_update_matches_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _rep in 0..200 {
            let pdf = random_pdf(&mut rng);
            let d = rng.gen_range(0..=6usize);
            let neighbors: Vec<[f64; 2]> = (0..d).map(|_| random_pair(&mut rng)).collect();
            let central = if rng.gen_bool(0.8) {
                Some(random_pair(&mut rng))
            } else {
                None
            };
            let mut out_c = [0.0; 2];
            let mut out_n = vec![[0.0; 2]; d];
            let mut deg = 0;
            measured_node_update(&pdf, central, &neighbors, &mut out_c, &mut out_n, &mut deg);
            let (oc, on) = measured_oracle(&pdf, central, &neighbors);
            if let Some(oc) = oc {
                assert!((out_c[0] - oc[0]).abs() < 1e-12 && (out_c[1] - oc[1]).abs() < 1e-12);
            }
            for i in 0..d {
                assert!(
                    (out_n[i][0] - on[i][0]).abs() < 1e-12
                        && (out_n[i][1] - on[i][1]).abs() < 1e-12,
                    "neighbor {i} of {d}"
                );
            }
        }
    }

    #[test]
    fn posterior_uniform_gives_tie_and_zero_decision() {
        let (_h, mut g) = small_graph();
        g.init_messages();
        let q = g.pseudo_posteriors();
        for &pair in &q {
            assert_eq!(pair, [0.5, 0.5]);
            assert_eq!(hard_decision(pair), 0);
        }
    }

    #[test]
    fn posterior_follows_dominant_likelihood_and_product_oracle() {
        let (_h, mut g) = small_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for m in g.m_rv.iter_mut().chain(g.m_cv.iter_mut()) {
            *m = random_pair(&mut rng);
        }
        // Dominant likelihood on variable 0's first channel edge.
        let e = g.var_ch_edge[g.var_ch_off[0] as usize] as usize;
        g.m_rv[e] = [1e-9, 1.0 - 1e-9];
        let q = g.pseudo_posteriors();
        assert_eq!(hard_decision(q[0]), 1);
        for v in 0..g.n_vars {
            let mut expect = [1.0f64, 1.0];
            for &e in
                &g.var_ch_edge[g.var_ch_off[v] as usize..g.var_ch_off[v + 1] as usize]
            {
                expect[0] *= g.m_rv[e as usize][0];
                expect[1] *= g.m_rv[e as usize][1];
            }
            for &e in
                &g.var_code_edge[g.var_code_off[v] as usize..g.var_code_off[v + 1] as usize]
            {
                expect[0] *= g.m_cv[e as usize][0];
                expect[1] *= g.m_cv[e as usize][1];
            }
            let s = expect[0] + expect[1];
            assert!((q[v][0] - expect[0] / s).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_decode_recovers_codeword_quickly() {
        let h = construct_regular(120, 3, 6, 2).unwrap();
        let enc = SystematicEncoder::from_matrix(&h);
        let table = SignalLevelTable::twodos_default();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..10 {
            let u: Vec<u8> = (0..enc.k()).map(|_| rng.gen_range(0..2u8)).collect();
            let cw = enc.encode(&u).unwrap();
            let grid = codeword_to_grid(&cw, 10, 12, None).unwrap();
            let rb = readback(&grid, &table, 1e-6, 100 + trial).unwrap();
            let res = decode(&h, &rb, &table, 1e-6, None, 10).unwrap();
            assert!(res.converged, "trial {trial} did not converge");
            assert!(res.iterations_used <= 2, "needed {} iterations", res.iterations_used);
            assert_eq!(res.word, cw);
        }
    }

    #[test]
    fn converged_implies_zero_syndrome() {
        let h = construct_regular(120, 3, 6, 2).unwrap();
        let enc = SystematicEncoder::from_matrix(&h);
        let table = SignalLevelTable::twodos_default();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for trial in 0..20 {
            let u: Vec<u8> = (0..enc.k()).map(|_| rng.gen_range(0..2u8)).collect();
            let cw = enc.encode(&u).unwrap();
            let grid = codeword_to_grid(&cw, 10, 12, None).unwrap();
            let rb = readback(&grid, &table, 0.03, 300 + trial).unwrap();
            let res = decode(&h, &rb, &table, 0.03, None, 8).unwrap();
            if res.converged {
                assert!(h.syndrome_is_zero(&res.word).unwrap());
            }
        }
    }

    #[test]
    fn zero_iterations_equal_symbolwise_likelihood_test() {
        let h = construct_regular(24, 3, 6, 4).unwrap();
        let enc = SystematicEncoder::from_matrix(&h);
        let table = SignalLevelTable::twodos_default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let u: Vec<u8> = (0..enc.k()).map(|_| rng.gen_range(0..2u8)).collect();
        let cw = enc.encode(&u).unwrap();
        let grid = codeword_to_grid(&cw, 4, 6, None).unwrap();
        let sigma2 = 0.02;
        let rb = readback(&grid, &table, sigma2, 7).unwrap();

        let mut g = FactorGraph::build(&h, 4, 6, None).unwrap();
        g.set_evidence(&rb, &table, sigma2).unwrap();
        let res = g.decode_with(&h, 0, true, None).unwrap();
        assert_eq!(res.iterations_used, 0);

        // Oracle: replay the single measured-to-variable pass with the
        // enumeration update, then take the hard decision per variable.
        let mut g2 = FactorGraph::build(&h, 4, 6, None).unwrap();
        g2.set_evidence(&rb, &table, sigma2).unwrap();
        g2.init_messages();
        for cell in 0..24usize {
            let lo = g2.meas_off[cell] as usize;
            let hi = g2.meas_off[cell + 1] as usize;
            let d = hi - lo - 1; // central is first on this guardless grid
            let neighbors = vec![[0.5, 0.5]; d];
            let (oc, on) = measured_oracle(&g2.pdf[cell], Some([0.5, 0.5]), &neighbors);
            g2.m_rv[lo] = oc.unwrap();
            g2.m_rv[lo + 1..hi].copy_from_slice(&on);
        }
        let expect = hard_decision_word(&g2.pseudo_posteriors());
        assert_eq!(res.word, expect);
    }

    #[test]
    fn schedule_is_deterministic() {
        let h = construct_regular(120, 3, 6, 2).unwrap();
        let enc = SystematicEncoder::from_matrix(&h);
        let table = SignalLevelTable::twodos_default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let u: Vec<u8> = (0..enc.k()).map(|_| rng.gen_range(0..2u8)).collect();
        let cw = enc.encode(&u).unwrap();
        let grid = codeword_to_grid(&cw, 10, 12, None).unwrap();
        let rb = readback(&grid, &table, 0.025, 55).unwrap();

        let run = || {
            let mut g = FactorGraph::build(&h, 10, 12, None).unwrap();
            g.set_evidence(&rb, &table, 0.025).unwrap();
            g.init_messages();
            for _ in 0..4 {
                g.update_var_to_check();
                g.update_check_to_var();
                g.update_var_to_measured();
                g.update_measured_to_var();
            }
            (g.m_vc.clone(), g.m_cv.clone(), g.m_vr.clone(), g.m_rv.clone())
        };
        let a = run();
        let b = run();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
        assert_eq!(a.3, b.3);
    }

    #[test]
    fn normalization_holds_through_decoding() {
        let h = construct_regular(120, 3, 6, 2).unwrap();
        let enc = SystematicEncoder::from_matrix(&h);
        let table = SignalLevelTable::twodos_default();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let u: Vec<u8> = (0..enc.k()).map(|_| rng.gen_range(0..2u8)).collect();
        let cw = enc.encode(&u).unwrap();
        let grid = codeword_to_grid(&cw, 10, 12, None).unwrap();
        let rb = readback(&grid, &table, 0.02, 77).unwrap();
        let mut g = FactorGraph::build(&h, 10, 12, None).unwrap();
        g.set_evidence(&rb, &table, 0.02).unwrap();
        g.init_messages();
        for _ in 0..5 {
            g.update_var_to_check();
            assert!(g.max_normalization_error() < 1e-9);
            g.update_check_to_var();
            assert!(g.max_normalization_error() < 1e-9);
            g.update_var_to_measured();
            assert!(g.max_normalization_error() < 1e-9);
            g.update_measured_to_var();
            assert!(g.max_normalization_error() < 1e-9);
        }
    }

    #[test]
    fn geometry_mismatch_is_domain_error() {
        let h = construct_regular(24, 3, 6, 1).unwrap();
        assert!(FactorGraph::build(&h, 5, 6, None).is_err());
        assert!(FactorGraph::build(&h, 4, 6, Some(1)).is_err());
    }

    #[test]
    fn guard_band_graph_decodes() {
        // 5 rows with track_height 4: row 4 is guard; 4*6=24 data cells.
        let h = construct_regular(24, 3, 6, 1).unwrap();
        let enc = SystematicEncoder::from_matrix(&h);
        let table = SignalLevelTable::twodos_default();
        let u: Vec<u8> = vec![1; enc.k()];
        let cw = enc.encode(&u).unwrap();
        let grid = codeword_to_grid(&cw, 5, 6, Some(4)).unwrap();
        let rb = readback(&grid, &table, 1e-6, 3).unwrap();
        let res = decode(&h, &rb, &table, 1e-6, Some(4), 5).unwrap();
        assert!(res.converged);
        assert_eq!(res.word, cw);
    }
}
