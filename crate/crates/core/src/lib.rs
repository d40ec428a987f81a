//! Joint equalization and decoding for nonlinear two-dimensional
//! intersymbol-interference channels.
//!
//! Bits live on a hexagonally packed lattice; each readback sample mixes a
//! cell's bit with its six nearest neighbors through a 14-level nonlinear
//! signal model plus white Gaussian noise. Decoding runs sum-product
//! message passing on a joint factor graph of an LDPC code and the channel
//! (variable, check, and measured-data node levels), iterating a fixed
//! four-step schedule until the hard decision is a codeword or an
//! iteration budget runs out.
//!
//! The companion density-evolution engine tracks the pdf of correct
//! messages through the same schedule (FFT convolutions at variable nodes,
//! a quantized lookup table at check nodes, Monte Carlo at measured nodes)
//! and bisects for noise-tolerance thresholds.
//!
//! The `harness` module and the `twodos` binary drive BER sweeps, the
//! uncoded channel-only baseline, threshold tables, and the oracle
//! validation suites, all seeded and reproducible.

pub mod channel;
pub mod density;
pub mod density_evolution;
pub mod error;
pub mod factor_graph;
pub mod harness;
pub mod lattice;
pub mod ldpc;
pub mod validate;

pub use error::{Error, Result};
