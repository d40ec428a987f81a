//! Oracle-equivalence suites: brute-force reference computations checked
//! against the production paths. These back the `validate` CLI mode and
//! the acceptance tests.
//!
//! Each oracle is deliberately implemented by direct enumeration or direct
//! summation, sharing no code with the implementation it checks.

use crate::channel::{likelihood, SignalLevelTable};
use crate::density::{LlrGrid, QuantizedDensity};
use crate::factor_graph::measured_node_update;
use crate::ldpc::mix_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one oracle suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SuiteResult {
    fn finish(name: &'static str, cases: usize, max_deviation: f64, tolerance: f64) -> Self {
        SuiteResult {
            name,
            cases,
            max_deviation,
            tolerance,
            passed: max_deviation <= tolerance,
        }
    }
}

/// Report over all suites.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub suites: Vec<SuiteResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

/// Run every oracle suite at its release tolerance.
pub fn run_validation(seed: u64) -> ValidationReport {
    ValidationReport {
        suites: vec![
            measured_node_suite(mix_seed(seed, 1), 1000),
            check_node_suite(mix_seed(seed, 2), 1000),
            fft_convolution_suite(mix_seed(seed, 3), 20),
        ],
    }
}

fn random_pair(rng: &mut impl Rng) -> [f64; 2] {
    let p: f64 = rng.gen_range(0.001..0.999);
    [p, 1.0 - p]
}

/// Counting-convolution measured-node update vs exhaustive enumeration
/// over all neighbor bit patterns, for both central-bit and neighbor-bit
/// messages. Tolerance 1e-12 max absolute deviation on normalized pairs.
pub fn measured_node_suite(seed: u64, reps: usize) -> SuiteResult {
    let table = SignalLevelTable::twodos_default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev: f64 = 0.0;
    for _ in 0..reps {
        let r: f64 = rng.gen_range(-0.2..1.2);
        let sigma2: f64 = rng.gen_range(0.005..0.1);
        let mut pdf = [[0.0f64; 7]; 2];
        for b in 0..2u8 {
            for n in 0..7 {
                pdf[b as usize][n] = likelihood(r, b, n, &table, sigma2).unwrap();
            }
        }
        let d = rng.gen_range(0..=6usize);
        let neighbors: Vec<[f64; 2]> = (0..d).map(|_| random_pair(&mut rng)).collect();
        let central = if rng.gen_bool(0.85) {
            Some(random_pair(&mut rng))
        } else {
            None
        };

        let mut out_central = [0.0; 2];
        let mut out_neighbors = vec![[0.0; 2]; d];
        let mut degenerate = 0;
        measured_node_update(
            &pdf,
            central,
            &neighbors,
            &mut out_central,
            &mut out_neighbors,
            &mut degenerate,
        );

        // Oracle: full pattern enumeration.
        if central.is_some() {
            let mut expect = [0.0f64; 2];
            for (b, slot) in expect.iter_mut().enumerate() {
                for mask in 0..(1u32 << d) {
                    let mut prod = 1.0;
                    let mut ones = 0usize;
                    for (i, q) in neighbors.iter().enumerate() {
                        let bit = ((mask >> i) & 1) as usize;
                        ones += bit;
                        prod *= q[bit];
                    }
                    *slot += prod * pdf[b][ones];
                }
            }
            let s = expect[0] + expect[1];
            max_dev = max_dev
                .max((out_central[0] - expect[0] / s).abs())
                .max((out_central[1] - expect[1] / s).abs());
        }
        let cen = central.unwrap_or([1.0, 0.0]);
        for target in 0..d {
            let mut expect = [0.0f64; 2];
            for (b, slot) in expect.iter_mut().enumerate() {
                for (a, &ca) in cen.iter().enumerate() {
                    if ca == 0.0 {
                        continue;
                    }
                    for mask in 0..(1u32 << (d - 1)) {
                        let mut prod = 1.0;
                        let mut ones = b;
                        let mut pos = 0;
                        for (i, q) in neighbors.iter().enumerate() {
                            if i == target {
                                continue;
                            }
                            let bit = ((mask >> pos) & 1) as usize;
                            ones += bit;
                            prod *= q[bit];
                            pos += 1;
                        }
                        *slot += ca * prod * pdf[a][ones];
                    }
                }
            }
            let s = expect[0] + expect[1];
            max_dev = max_dev
                .max((out_neighbors[target][0] - expect[0] / s).abs())
                .max((out_neighbors[target][1] - expect[1] / s).abs());
        }
    }
    SuiteResult::finish("measured-node enumeration", reps, max_dev, 1e-12)
}

/// Sum-product check update vs brute-force even-parity enumeration for
/// check degrees 3..=8. Tolerance 1e-10.
pub fn check_node_suite(seed: u64, reps_per_degree: usize) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev: f64 = 0.0;
    let mut cases = 0;
    for dc in 3..=8usize {
        for _ in 0..reps_per_degree {
            let msgs: Vec<[f64; 2]> = (0..dc).map(|_| random_pair(&mut rng)).collect();
            cases += 1;
            for target in 0..dc {
                // Production path: the tanh/delta product form.
                let mut delta = 1.0;
                for (i, m) in msgs.iter().enumerate() {
                    if i != target {
                        delta *= m[0] - m[1];
                    }
                }
                let got = [(1.0 + delta) / 2.0, (1.0 - delta) / 2.0];

                // Oracle: enumerate configurations of the other dc-1 bits
                // with parity matching the target bit.
                let mut expect = [0.0f64; 2];
                for (b, slot) in expect.iter_mut().enumerate() {
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
                            prod *= m[((mask >> pos) & 1) as usize];
                            pos += 1;
                        }
                        *slot += prod;
                    }
                }
                let s = expect[0] + expect[1];
                max_dev = max_dev
                    .max((got[0] - expect[0] / s).abs())
                    .max((got[1] - expect[1] / s).abs());
            }
        }
    }
    SuiteResult::finish("check-node parity enumeration", cases, max_dev, 1e-10)
}

/// FFT convolution vs direct quadratic convolution on 128-bin grids,
/// including saturation cells. Tolerance 1e-10.
pub fn fft_convolution_suite(seed: u64, reps: usize) -> SuiteResult {
    let grid = LlrGrid::new(128, 8.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev: f64 = 0.0;
    for _ in 0..reps {
        let make = |rng: &mut ChaCha8Rng| {
            let atoms: Vec<(f64, f64)> = (0..50)
                .map(|_| (rng.gen_range(-8.0..8.0), rng.gen_range(0.01..1.0)))
                .collect();
            let mut d = QuantizedDensity::from_atoms(grid, &atoms).unwrap();
            if rng.gen_bool(0.5) {
                d.set_saturations(rng.gen_range(0.0..0.1), rng.gen_range(0.0..0.1));
                d.normalize().unwrap();
            }
            d
        };
        let a = make(&mut rng);
        let b = make(&mut rng);
        let fast = a.convolve(&b).unwrap();
        let slow = a.convolve_direct(&b).unwrap();
        let dev = fast
            .mass()
            .iter()
            .zip(slow.mass())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max)
            .max((fast.neg_inf_mass() - slow.neg_inf_mass()).abs())
            .max((fast.pos_inf_mass() - slow.pos_inf_mass()).abs());
        max_dev = max_dev.max(dev);
        // Both routes must also conserve mass.
        max_dev = max_dev.max((fast.total_mass() - 1.0).abs());
        max_dev = max_dev.max((slow.total_mass() - 1.0).abs());
    }
    SuiteResult::finish("fft-vs-direct convolution", reps, max_dev, 1e-10)
}
