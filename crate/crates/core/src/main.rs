//! Command-line driver for BER sweeps, the uncoded baseline, threshold
//! tables, and the oracle validation suites.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use twodos::harness::{
    self, records_to_csv, rows_to_csv, run_ber, run_threshold, run_uncoded_baseline,
    ExperimentConfig, Mode,
};
use twodos::validate::run_validation;

#[derive(Parser)]
#[command(
    name = "twodos",
    version,
    about = "Joint equalization/decoding experiments for hexagonal 2D ISI channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment config file (flat key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; overrides the config's `out`. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread count (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Coded bit-error-rate sweep over (noise, max_iters) cells.
    Ber(CommonArgs),
    /// Uncoded channel-graph-only baseline sweep.
    Uncoded(CommonArgs),
    /// Density-evolution noise-tolerance thresholds per ensemble.
    Threshold(CommonArgs),
    /// Oracle-equivalence suites; nonzero exit on any failure.
    Validate(CommonArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> twodos::Result<ExitCode> {
    let (args, expected_mode) = match &cli.command {
        Command::Ber(a) => (a, Mode::Ber),
        Command::Uncoded(a) => (a, Mode::Uncoded),
        Command::Threshold(a) => (a, Mode::Threshold),
        Command::Validate(a) => (a, Mode::Validate),
    };
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| twodos::Error::Config {
                field: "threads".to_string(),
                message: e.to_string(),
            })?;
    }

    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        // Validate needs no config.
        None if expected_mode == Mode::Validate => ExperimentConfig::parse("mode = validate\n")?,
        None => {
            return Err(twodos::Error::Config {
                field: "config".to_string(),
                message: "missing --config".to_string(),
            })
        }
    };
    if cfg.mode != expected_mode {
        return Err(twodos::Error::Config {
            field: "mode".to_string(),
            message: format!(
                "config mode does not match the `{}` subcommand",
                subcommand_name(&cli.command)
            ),
        });
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }

    match cli.command {
        Command::Validate(_) => {
            let report = run_validation(cfg.seed);
            for s in &report.suites {
                println!(
                    "{}: {} ({} cases, max deviation {:.3e}, tolerance {:.1e})",
                    if s.passed { "PASS" } else { "FAIL" },
                    s.name,
                    s.cases,
                    s.max_deviation,
                    s.tolerance
                );
            }
            Ok(if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Ber(_) => {
            let table = harness::load_signal_table(&cfg)?;
            let records = run_ber(&cfg, &table)?;
            emit(&cfg, records_to_csv(&records))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Uncoded(_) => {
            let table = harness::load_signal_table(&cfg)?;
            let records = run_uncoded_baseline(&cfg, &table)?;
            emit(&cfg, records_to_csv(&records))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Threshold(_) => {
            let table = harness::load_signal_table(&cfg)?;
            let rows = run_threshold(&cfg, &table)?;
            emit(&cfg, rows_to_csv(&rows))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Ber(_) => "ber",
        Command::Uncoded(_) => "uncoded",
        Command::Threshold(_) => "threshold",
        Command::Validate(_) => "validate",
    }
}

fn emit(cfg: &ExperimentConfig, csv: String) -> twodos::Result<()> {
    match &cfg.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
