//! Regular LDPC codes over GF(2): construction, systematic encoding,
//! syndrome checking, and alist interchange.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, HashSet};

/// Sparse binary parity-check matrix, stored as per-check variable lists.
#[derive(Debug, Clone)]
pub struct ParityCheckMatrix {
    n: usize,
    m: usize,
    /// Declared regular degrees; construction guarantees them exactly,
    /// general matrices built via [`from_rows`](Self::from_rows) may not.
    dv: usize,
    dc: usize,
    check_vars: Vec<Vec<u32>>,
}

impl ParityCheckMatrix {
    /// Build from explicit per-check variable index lists.
    pub fn from_rows(n: usize, rows: Vec<Vec<u32>>, dv: usize, dc: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        for (c, vars) in rows.iter().enumerate() {
            for &v in vars {
                if v as usize >= n {
                    return Err(Error::domain(format!(
                        "check {c} references variable {v}, block length is {n}"
                    )));
                }
                if !seen.insert((c as u32, v)) {
                    return Err(Error::domain(format!("duplicate edge ({c}, {v})")));
                }
            }
        }
        Ok(ParityCheckMatrix {
            n,
            m: rows.len(),
            dv,
            dc,
            check_vars: rows,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dv(&self) -> usize {
        self.dv
    }

    pub fn dc(&self) -> usize {
        self.dc
    }

    pub fn edge_count(&self) -> usize {
        self.check_vars.iter().map(|r| r.len()).sum()
    }

    /// Variable indices participating in check `c`.
    pub fn check_vars(&self, c: usize) -> &[u32] {
        &self.check_vars[c]
    }

    /// Per-variable check lists (transpose adjacency).
    pub fn var_checks(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.n];
        for (c, vars) in self.check_vars.iter().enumerate() {
            for &v in vars {
                out[v as usize].push(c as u32);
            }
        }
        out
    }

    /// Verify exact (dv, dc)-regularity.
    pub fn validate_regular(&self) -> Result<()> {
        for (c, vars) in self.check_vars.iter().enumerate() {
            if vars.len() != self.dc {
                return Err(Error::domain(format!(
                    "check {c} has degree {}, expected {}",
                    vars.len(),
                    self.dc
                )));
            }
        }
        let mut col_weight = vec![0usize; self.n];
        for vars in &self.check_vars {
            for &v in vars {
                col_weight[v as usize] += 1;
            }
        }
        if let Some((v, &w)) = col_weight.iter().enumerate().find(|(_, &w)| w != self.dv) {
            return Err(Error::domain(format!(
                "variable {v} has degree {w}, expected {}",
                self.dv
            )));
        }
        Ok(())
    }

    /// Syndrome of `word`: one bit per check, XOR of the participating bits.
    pub fn syndrome(&self, word: &[u8]) -> Result<Vec<u8>> {
        if word.len() != self.n {
            return Err(Error::domain(format!(
                "word length {} does not match block length {}",
                word.len(),
                self.n
            )));
        }
        Ok(self
            .check_vars
            .iter()
            .map(|vars| vars.iter().fold(0u8, |acc, &v| acc ^ (word[v as usize] & 1)))
            .collect())
    }

    pub fn syndrome_is_zero(&self, word: &[u8]) -> Result<bool> {
        Ok(self.syndrome(word)?.iter().all(|&s| s == 0))
    }

    /// Export in alist format (dimensions, max degrees, per-node degree
    /// lists, then 1-indexed neighbor lists).
    pub fn to_alist(&self) -> String {
        let var_checks = self.var_checks();
        let dv_max = var_checks.iter().map(|c| c.len()).max().unwrap_or(0);
        let dc_max = self.check_vars.iter().map(|r| r.len()).max().unwrap_or(0);
        let mut out = format!("{} {}\n{} {}\n", self.n, self.m, dv_max, dc_max);
        out.push_str(
            &var_checks
                .iter()
                .map(|c| c.len().to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        out.push('\n');
        out.push_str(
            &self
                .check_vars
                .iter()
                .map(|r| r.len().to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        out.push('\n');
        for checks in &var_checks {
            let mut entries: Vec<String> = checks.iter().map(|&c| (c + 1).to_string()).collect();
            entries.resize(dv_max, "0".to_string());
            out.push_str(&entries.join(" "));
            out.push('\n');
        }
        for vars in &self.check_vars {
            let mut entries: Vec<String> = vars.iter().map(|&v| (v + 1).to_string()).collect();
            entries.resize(dc_max, "0".to_string());
            out.push_str(&entries.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parse alist text. Degrees are taken from the per-check lists; the
    /// declared (dv, dc) are the maximum degrees from the header.
    pub fn from_alist(text: &str) -> Result<Self> {
        let mut nums = text
            .split_whitespace()
            .map(|t| t.parse::<i64>().map_err(|_| Error::Parse(format!("bad alist token `{t}`"))));
        let mut next = |what: &str| -> Result<i64> {
            nums.next()
                .ok_or_else(|| Error::Parse(format!("alist truncated at {what}")))?
        };
        let n = next("n")? as usize;
        let m = next("m")? as usize;
        let dv_max = next("dv_max")? as usize;
        let dc_max = next("dc_max")? as usize;
        let var_degrees: Vec<usize> = (0..n)
            .map(|_| next("variable degree").map(|v| v as usize))
            .collect::<Result<_>>()?;
        let check_degrees: Vec<usize> = (0..m)
            .map(|_| next("check degree").map(|v| v as usize))
            .collect::<Result<_>>()?;
        // Variable neighbor lists are redundant with the check lists; read
        // and discard the padded entries.
        for _ in 0..n * dv_max {
            next("variable list")?;
        }
        let mut rows = Vec::with_capacity(m);
        for (c, &deg) in check_degrees.iter().enumerate() {
            let mut vars = Vec::with_capacity(deg);
            for slot in 0..dc_max {
                let raw = next("check list")?;
                if slot < deg {
                    if raw < 1 || raw as usize > n {
                        return Err(Error::Parse(format!(
                            "check {c} slot {slot}: variable {raw} out of range"
                        )));
                    }
                    vars.push((raw - 1) as u32);
                }
            }
            rows.push(vars);
        }
        let dv = var_degrees.iter().copied().max().unwrap_or(0);
        let dc = check_degrees.iter().copied().max().unwrap_or(0);
        Self::from_rows(n, rows, dv, dc)
    }
}

/// Construct a random (dv, dc)-regular code by the configuration model:
/// `n*dv` variable sockets matched to `m*dc` check sockets by a seeded
/// permutation, followed by edge swaps that remove duplicate edges and
/// (best effort, bounded by `swap_budget` passes) 4-cycles.
pub fn construct_regular(n: usize, dv: usize, dc: usize, seed: u64) -> Result<ParityCheckMatrix> {
    construct_regular_with_budget(n, dv, dc, seed, 50)
}

pub fn construct_regular_with_budget(
    n: usize,
    dv: usize,
    dc: usize,
    seed: u64,
    swap_budget: usize,
) -> Result<ParityCheckMatrix> {
    if n == 0 || dv == 0 || dc == 0 {
        return Err(Error::domain("n, dv, dc must all be positive".to_string()));
    }
    if (n * dv) % dc != 0 {
        return Err(Error::domain(format!(
            "n*dv = {} not divisible by dc = {dc}",
            n * dv
        )));
    }
    if dc > n {
        return Err(Error::Construction(format!(
            "check degree {dc} exceeds block length {n}"
        )));
    }
    // Duplicate-edge removal by pairwise swaps can deadlock for degenerate
    // near-complete graphs; retry with derived sub-seeds, deterministically.
    let mut last_err = None;
    for round in 0..32u64 {
        match construct_attempt(n, dv, dc, mix_seed(seed, round), swap_budget) {
            Ok(h) => return Ok(h),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap())
}

/// SplitMix64 step: derive decorrelated sub-seeds from a master seed.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn construct_attempt(
    n: usize,
    dv: usize,
    dc: usize,
    seed: u64,
    swap_budget: usize,
) -> Result<ParityCheckMatrix> {
    let m = n * dv / dc;
    let e = n * dv;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Socket permutation: edge i joins check i/dc with variable perm[i]/dv.
    let mut perm: Vec<u32> = (0..e as u32).collect();
    for i in (1..e).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let mut edge_var: Vec<u32> = perm.iter().map(|&s| s / dv as u32).collect();
    let edge_check = |i: usize| (i / dc) as u32;

    // Edge multiplicities; the graph is simple when every count is 1.
    let mut count: HashMap<(u32, u32), u32> = HashMap::with_capacity(e);
    for i in 0..e {
        *count.entry((edge_check(i), edge_var[i])).or_insert(0) += 1;
    }

    let swap = |i: usize, j: usize,
                    edge_var: &mut Vec<u32>,
                    count: &mut HashMap<(u32, u32), u32>| {
        let (ci, vi) = (edge_check(i), edge_var[i]);
        let (cj, vj) = (edge_check(j), edge_var[j]);
        for key in [(ci, vi), (cj, vj)] {
            let c = count.get_mut(&key).unwrap();
            *c -= 1;
            if *c == 0 {
                count.remove(&key);
            }
        }
        *count.entry((ci, vj)).or_insert(0) += 1;
        *count.entry((cj, vi)).or_insert(0) += 1;
        edge_var.swap(i, j);
    };

    // Swap duplicate edges with random partners until the multigraph is
    // simple. Degrees are preserved by every swap.
    for _pass in 0..200 {
        let dups: Vec<usize> = (0..e)
            .filter(|&i| count[&(edge_check(i), edge_var[i])] > 1)
            .collect();
        if dups.is_empty() {
            break;
        }
        for i in dups {
            if count[&(edge_check(i), edge_var[i])] == 1 {
                continue; // resolved earlier in this pass
            }
            for _try in 0..100 {
                let j = rng.gen_range(0..e);
                let (ci, vi) = (edge_check(i), edge_var[i]);
                let (cj, vj) = (edge_check(j), edge_var[j]);
                if ci == cj || vi == vj {
                    continue;
                }
                if count.contains_key(&(ci, vj)) || count.contains_key(&(cj, vi)) {
                    continue;
                }
                swap(i, j, &mut edge_var, &mut count);
                break;
            }
        }
    }
    if (0..e).any(|i| count[&(edge_check(i), edge_var[i])] > 1) {
        return Err(Error::Construction(
            "could not eliminate duplicate edges within the swap budget".to_string(),
        ));
    }

    // Best-effort girth-6 conditioning: a 4-cycle is a pair of checks
    // sharing two variables; break one of its edges by a random swap.
    for _pass in 0..swap_budget {
        let cycles = find_four_cycle_edges(e, dc, &edge_var);
        if cycles.is_empty() {
            break;
        }
        let mut progressed = false;
        for i in cycles {
            for _try in 0..50 {
                let j = rng.gen_range(0..e);
                let (ci, vi) = (edge_check(i), edge_var[i]);
                let (cj, vj) = (edge_check(j), edge_var[j]);
                if ci == cj || vi == vj {
                    continue;
                }
                if count.contains_key(&(ci, vj)) || count.contains_key(&(cj, vi)) {
                    continue;
                }
                swap(i, j, &mut edge_var, &mut count);
                progressed = true;
                break;
            }
        }
        if !progressed {
            break;
        }
    }

    let mut rows = vec![Vec::with_capacity(dc); m];
    for i in 0..e {
        rows[i / dc].push(edge_var[i]);
    }
    for row in &mut rows {
        row.sort_unstable();
    }
    let h = ParityCheckMatrix::from_rows(n, rows, dv, dc)?;
    h.validate_regular()?;
    Ok(h)
}

/// Edge indices participating in some 4-cycle (one representative edge per
/// offending check pair).
fn find_four_cycle_edges(e: usize, dc: usize, edge_var: &[u32]) -> Vec<usize> {
    // var -> list of (check, edge index), visited in variable order so the
    // offender list is deterministic.
    let n_vars = edge_var.iter().map(|&v| v as usize + 1).max().unwrap_or(0);
    let mut var_edges: Vec<Vec<(u32, usize)>> = vec![Vec::new(); n_vars];
    for i in 0..e {
        var_edges[edge_var[i] as usize].push(((i / dc) as u32, i));
    }
    let mut pair_seen: HashMap<(u32, u32), usize> = HashMap::new();
    let mut offenders = Vec::new();
    for edges in &var_edges {
        for a in 0..edges.len() {
            for b in (a + 1)..edges.len() {
                let (c1, i1) = edges[a];
                let (c2, _i2) = edges[b];
                let key = if c1 < c2 { (c1, c2) } else { (c2, c1) };
                if pair_seen.insert(key, i1).is_some() {
                    // Second variable sharing this check pair: 4-cycle.
                    offenders.push(i1);
                }
            }
        }
    }
    offenders.sort_unstable();
    offenders.dedup();
    offenders
}

/// Count of check pairs sharing at least two variables (0 means girth >= 6).
pub fn four_cycle_count(h: &ParityCheckMatrix) -> usize {
    let mut pair_count: HashMap<(u32, u32), usize> = HashMap::new();
    for v_checks in h.var_checks() {
        let mut checks = v_checks.clone();
        checks.sort_unstable();
        for a in 0..checks.len() {
            for b in (a + 1)..checks.len() {
                *pair_count.entry((checks[a], checks[b])).or_insert(0) += 1;
            }
        }
    }
    pair_count.values().filter(|&&c| c >= 2).count()
}

/// Dense GF(2) rows packed 64 bits per word.
#[derive(Debug, Clone)]
struct BitRow {
    words: Vec<u64>,
}

impl BitRow {
    fn zeros(nbits: usize) -> Self {
        BitRow {
            words: vec![0; nbits.div_ceil(64)],
        }
    }

    #[inline]
    fn get(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    fn xor_assign(&mut self, other: &BitRow) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    fn and_parity(&self, other: &BitRow) -> u8 {
        let mut acc = 0u64;
        for (a, b) in self.words.iter().zip(&other.words) {
            acc ^= a & b;
        }
        (acc.count_ones() & 1) as u8
    }
}

/// Systematic encoder derived from H by GF(2) Gaussian elimination with
/// column pivoting. Message bits occupy the non-pivot (free) columns;
/// each pivot column is the parity of the free bits its reduced row covers.
#[derive(Debug, Clone)]
pub struct SystematicEncoder {
    n: usize,
    rank: usize,
    /// Pivot column of reduced row i.
    pivot_cols: Vec<u32>,
    /// Free (message) columns, ascending: the column permutation metadata.
    free_cols: Vec<u32>,
    /// Reduced row i restricted to the free columns (k bits each).
    parity_rows: Vec<BitRow>,
}

impl SystematicEncoder {
    /// Run the elimination. Rank deficiency is tolerated: the message
    /// length is `n - rank(H)` and is reported via [`k`](Self::k) and
    /// [`rank_deficiency`](Self::rank_deficiency).
    pub fn from_matrix(h: &ParityCheckMatrix) -> Self {
        let n = h.n();
        let m = h.m();
        let mut rows: Vec<BitRow> = (0..m)
            .map(|c| {
                let mut row = BitRow::zeros(n);
                for &v in h.check_vars(c) {
                    row.set(v as usize);
                }
                row
            })
            .collect();

        let mut pivot_cols = Vec::new();
        let mut pivot_row_of_col: Vec<Option<usize>> = vec![None; n];
        let mut next_row = 0usize;
        for col in 0..n {
            if next_row >= m {
                break;
            }
            let Some(pivot) = (next_row..m).find(|&r| rows[r].get(col)) else {
                continue;
            };
            rows.swap(next_row, pivot);
            for r in 0..m {
                if r != next_row && rows[r].get(col) {
                    let (src, dst) = if r < next_row {
                        let (lo, hi) = rows.split_at_mut(next_row);
                        (&hi[0], &mut lo[r])
                    } else {
                        let (lo, hi) = rows.split_at_mut(r);
                        (&lo[next_row], &mut hi[0])
                    };
                    dst.xor_assign(src);
                }
            }
            pivot_cols.push(col as u32);
            pivot_row_of_col[col] = Some(next_row);
            next_row += 1;
        }
        let rank = pivot_cols.len();
        let is_pivot: HashSet<u32> = pivot_cols.iter().copied().collect();
        let free_cols: Vec<u32> = (0..n as u32).filter(|c| !is_pivot.contains(c)).collect();
        let k = free_cols.len();

        // Row i of the reduced system reads: c[pivot_i] = sum over free
        // columns j with H'[i][j] = 1 of c[j].
        let parity_rows: Vec<BitRow> = (0..rank)
            .map(|i| {
                let mut pr = BitRow::zeros(k);
                for (jj, &col) in free_cols.iter().enumerate() {
                    if rows[i].get(col as usize) {
                        pr.set(jj);
                    }
                }
                pr
            })
            .collect();

        SystematicEncoder {
            n,
            rank,
            pivot_cols,
            free_cols,
            parity_rows,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Message length `k = n - rank(H)`.
    pub fn k(&self) -> usize {
        self.n - self.rank
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of redundant checks discovered during elimination.
    pub fn rank_deficiency(&self, h: &ParityCheckMatrix) -> usize {
        h.m() - self.rank
    }

    /// Codeword positions carrying the message verbatim, ascending.
    pub fn message_positions(&self) -> &[u32] {
        &self.free_cols
    }

    /// Encode `message` into a codeword with zero syndrome.
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.k() {
            return Err(Error::domain(format!(
                "message length {} does not match k = {}",
                message.len(),
                self.k()
            )));
        }
        let mut msg_row = BitRow::zeros(self.k());
        for (j, &b) in message.iter().enumerate() {
            if b > 1 {
                return Err(Error::domain(format!("bit value {b} is not in {{0,1}}")));
            }
            if b == 1 {
                msg_row.set(j);
            }
        }
        let mut word = vec![0u8; self.n];
        for (j, &col) in self.free_cols.iter().enumerate() {
            word[col as usize] = message[j];
        }
        for (i, prow) in self.parity_rows.iter().enumerate() {
            word[self.pivot_cols[i] as usize] = prow.and_parity(&msg_row);
        }
        Ok(word)
    }

    /// Extract the message back out of a codeword.
    pub fn extract_message(&self, word: &[u8]) -> Result<Vec<u8>> {
        if word.len() != self.n {
            return Err(Error::domain(format!(
                "word length {} does not match n = {}",
                word.len(),
                self.n
            )));
        }
        Ok(self.free_cols.iter().map(|&c| word[c as usize] & 1).collect())
    }
}
