//! Experiment engine: configuration, BER sweeps, threshold tables.

pub mod ber;
pub mod config;
pub mod threshold;

pub use ber::{records_to_csv, run_ber, run_uncoded_baseline, BerRecord};
pub use config::{CodeSpec, EnsembleSpec, ExperimentConfig, Mode, NoiseList};
pub use threshold::{rows_to_csv, run_threshold, ThresholdRow};

use crate::channel::SignalLevelTable;
use crate::error::Result;

/// Load the signal-level table named by the config, or the shipped
/// defaults.
pub fn load_signal_table(cfg: &ExperimentConfig) -> Result<SignalLevelTable> {
    match &cfg.signal_table {
        Some(path) => SignalLevelTable::load(path),
        None => Ok(SignalLevelTable::twodos_default()),
    }
}
