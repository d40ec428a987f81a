//! Flat key-value experiment configuration.
//!
//! Format: one `key = value` per line, `#` comments, case-sensitive keys.
//! Unknown keys are rejected with the offending field name.

use crate::density::LlrGrid;
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Ber,
    Uncoded,
    Threshold,
    Validate,
}

/// Code construction source: either an ensemble to sample or an alist file.
#[derive(Debug, Clone)]
pub enum CodeSpec {
    Regular { n: usize, dv: usize, dc: usize, seed: u64 },
    Alist(PathBuf),
}

/// Per-ensemble threshold search bracket.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleSpec {
    pub dv: usize,
    pub dc: usize,
    pub sigma2_lo: f64,
    pub sigma2_hi: f64,
}

/// Noise points, exactly one flavor.
#[derive(Debug, Clone)]
pub enum NoiseList {
    SnrDb(Vec<f64>),
    Sigma2(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub code: Option<CodeSpec>,
    pub rows: usize,
    pub cols: usize,
    pub track_height: Option<usize>,
    pub signal_table: Option<PathBuf>,
    pub noise: Option<NoiseList>,
    pub max_iters_list: Vec<usize>,
    pub min_bit_errors: u64,
    pub max_codewords: u64,
    pub out: Option<PathBuf>,
    pub seed: u64,
    // Threshold-mode settings.
    pub ensembles: Vec<EnsembleSpec>,
    pub de_bins: usize,
    pub de_half_range: f64,
    pub de_mc_rows: usize,
    pub de_mc_cols: usize,
    pub de_max_iters: usize,
    pub de_pe_target: f64,
    pub de_stall_window: usize,
    pub de_stall_rel_decrease: f64,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: HashMap<String, String> = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    "expected `key = value`".to_string(),
                )
            })?;
            if kv
                .insert(key.trim().to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::config(key.trim(), "duplicate key"));
            }
        }
        Self::from_map(kv)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn from_map(mut kv: HashMap<String, String>) -> Result<Self> {
        fn take(kv: &mut HashMap<String, String>, key: &str) -> Option<String> {
            kv.remove(key)
        }
        fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::config(key, format!("invalid value `{v}`")))
        }
        fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
            v.split(',')
                .map(|t| parse_num(key, t.trim()))
                .collect::<Result<Vec<T>>>()
        }

        let mode = match take(&mut kv, "mode").as_deref() {
            Some("ber") => Mode::Ber,
            Some("uncoded") => Mode::Uncoded,
            Some("threshold") => Mode::Threshold,
            Some("validate") => Mode::Validate,
            Some(other) => {
                return Err(Error::config("mode", format!("unknown mode `{other}`")))
            }
            None => return Err(Error::config("mode", "missing")),
        };

        let code = if let Some(path) = take(&mut kv, "alist") {
            if kv.contains_key("n") {
                return Err(Error::config("alist", "give either alist or n/dv/dc, not both"));
            }
            Some(CodeSpec::Alist(PathBuf::from(path)))
        } else if let Some(n) = take(&mut kv, "n") {
            let n: usize = parse_num("n", &n)?;
            let dv: usize = parse_num("dv", &take(&mut kv, "dv").ok_or_else(|| Error::config("dv", "missing"))?)?;
            let dc: usize = parse_num("dc", &take(&mut kv, "dc").ok_or_else(|| Error::config("dc", "missing"))?)?;
            let seed: u64 = match take(&mut kv, "code_seed") {
                Some(v) => parse_num("code_seed", &v)?,
                None => 0,
            };
            Some(CodeSpec::Regular { n, dv, dc, seed })
        } else {
            None
        };

        let rows = match take(&mut kv, "rows") {
            Some(v) => parse_num("rows", &v)?,
            None => 0,
        };
        let cols = match take(&mut kv, "cols") {
            Some(v) => parse_num("cols", &v)?,
            None => 0,
        };
        let track_height = match take(&mut kv, "track_height").as_deref() {
            None | Some("none") => None,
            Some(v) => Some(parse_num("track_height", v)?),
        };
        let signal_table = take(&mut kv, "signal_table").map(PathBuf::from);

        let snr_list = take(&mut kv, "snr_db");
        let sigma2_list = take(&mut kv, "sigma2");
        let noise = match (snr_list, sigma2_list) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "snr_db",
                    "give exactly one of snr_db or sigma2",
                ))
            }
            (Some(v), None) => Some(NoiseList::SnrDb(parse_list("snr_db", &v)?)),
            (None, Some(v)) => Some(NoiseList::Sigma2(parse_list("sigma2", &v)?)),
            (None, None) => None,
        };
        match &noise {
            Some(NoiseList::Sigma2(v)) => {
                if v.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
                    return Err(Error::config("sigma2", "entries must be positive"));
                }
            }
            Some(NoiseList::SnrDb(v)) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::config("snr_db", "entries must be finite"));
                }
            }
            None => {}
        }

        let max_iters_list = match take(&mut kv, "max_iters") {
            Some(v) => parse_list("max_iters", &v)?,
            None => vec![5],
        };
        let min_bit_errors = match take(&mut kv, "min_bit_errors") {
            Some(v) => parse_num("min_bit_errors", &v)?,
            None => 100,
        };
        let max_codewords = match take(&mut kv, "max_codewords") {
            Some(v) => parse_num("max_codewords", &v)?,
            None => 10_000,
        };
        if max_codewords == 0 {
            return Err(Error::config("max_codewords", "must be positive"));
        }
        let out = take(&mut kv, "out").map(PathBuf::from);
        let seed = match take(&mut kv, "seed") {
            Some(v) => parse_num("seed", &v)?,
            None => 0,
        };

        let ensembles = match take(&mut kv, "ensembles") {
            Some(v) => v
                .split(',')
                .map(|entry| {
                    let parts: Vec<&str> = entry.trim().split(':').collect();
                    if parts.len() != 4 {
                        return Err(Error::config(
                            "ensembles",
                            format!("`{entry}` is not dv:dc:sigma2_lo:sigma2_hi"),
                        ));
                    }
                    Ok(EnsembleSpec {
                        dv: parse_num("ensembles", parts[0])?,
                        dc: parse_num("ensembles", parts[1])?,
                        sigma2_lo: parse_num("ensembles", parts[2])?,
                        sigma2_hi: parse_num("ensembles", parts[3])?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };

        let de_bins = match take(&mut kv, "de_bins") {
            Some(v) => parse_num("de_bins", &v)?,
            None => 1 << 12,
        };
        let de_half_range = match take(&mut kv, "de_half_range") {
            Some(v) => parse_num("de_half_range", &v)?,
            None => 30.0,
        };
        let de_mc_rows = match take(&mut kv, "de_mc_rows") {
            Some(v) => parse_num("de_mc_rows", &v)?,
            None => 1000,
        };
        let de_mc_cols = match take(&mut kv, "de_mc_cols") {
            Some(v) => parse_num("de_mc_cols", &v)?,
            None => 1000,
        };
        let de_max_iters = match take(&mut kv, "de_max_iters") {
            Some(v) => parse_num("de_max_iters", &v)?,
            None => 200,
        };
        let de_pe_target = match take(&mut kv, "de_pe_target") {
            Some(v) => parse_num("de_pe_target", &v)?,
            None => 1e-6,
        };
        let de_stall_window = match take(&mut kv, "de_stall_window") {
            Some(v) => parse_num("de_stall_window", &v)?,
            None => 15,
        };
        let de_stall_rel_decrease = match take(&mut kv, "de_stall_rel_decrease") {
            Some(v) => parse_num("de_stall_rel_decrease", &v)?,
            None => 0.02,
        };

        if let Some(stray) = kv.keys().next() {
            return Err(Error::config(stray, "unknown key"));
        }

        let cfg = ExperimentConfig {
            mode,
            code,
            rows,
            cols,
            track_height,
            signal_table,
            noise,
            max_iters_list,
            min_bit_errors,
            max_codewords,
            out,
            seed,
            ensembles,
            de_bins,
            de_half_range,
            de_mc_rows,
            de_mc_cols,
            de_max_iters,
            de_pe_target,
            de_stall_window,
            de_stall_rel_decrease,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Ber | Mode::Uncoded => {
                if self.rows == 0 || self.cols == 0 {
                    return Err(Error::config("rows", "ber/uncoded modes need rows and cols"));
                }
                let noise = self
                    .noise
                    .as_ref()
                    .ok_or_else(|| Error::config("sigma2", "ber/uncoded modes need snr_db or sigma2"))?;
                let empty = match noise {
                    NoiseList::SnrDb(v) => v.is_empty(),
                    NoiseList::Sigma2(v) => v.is_empty(),
                };
                if empty {
                    return Err(Error::config("sigma2", "noise list is empty"));
                }
                if self.max_iters_list.is_empty() {
                    return Err(Error::config("max_iters", "list is empty"));
                }
                if self.mode == Mode::Ber && self.code.is_none() {
                    return Err(Error::config("n", "ber mode needs a code (n/dv/dc or alist)"));
                }
                if self.min_bit_errors == 0 {
                    return Err(Error::config("min_bit_errors", "must be positive"));
                }
            }
            Mode::Threshold => {
                if self.ensembles.is_empty() {
                    return Err(Error::config("ensembles", "threshold mode needs ensembles"));
                }
                for e in &self.ensembles {
                    if !(e.sigma2_lo > 0.0 && e.sigma2_hi > e.sigma2_lo) {
                        return Err(Error::config(
                            "ensembles",
                            format!("bad bracket [{}, {}]", e.sigma2_lo, e.sigma2_hi),
                        ));
                    }
                }
                LlrGrid::new(self.de_bins, self.de_half_range)
                    .map_err(|e| Error::config("de_bins", e.to_string()))?;
            }
            Mode::Validate => {}
        }
        Ok(())
    }

    pub fn llr_grid(&self) -> Result<LlrGrid> {
        LlrGrid::new(self.de_bins, self.de_half_range)
    }
}
