//! Monte-Carlo RMSE sweeps and CRLB curves.
//!
//! Trial `i` uses seed `seed ^ i` for both its 16-QAM frame and its noise, so
//! every `(snr, n_lobe)` pair sees the same frames and noise shapes. Trials run
//! on the current rayon pool and are reduced in trial order, which keeps the
//! output independent of the thread count.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use otfs_isac::estimator::noise_variance;
use otfs_isac::{
    bounds, factored_crosstalk, fisher, ml_estimate, random_dd_frame, simulate_rx, ParameterPoint,
};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// One CSV row of an RMSE sweep. `n_lobe = 0` is the full estimator;
/// `snr_db = inf` marks a noiseless run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub n_lobe: usize,
    pub rmse_range_m: f64,
    pub rmse_velocity_mps: f64,
    pub crlb_range_m: f64,
    pub crlb_velocity_mps: f64,
    pub mean_ops_per_hypothesis: f64,
    /// Zero unless timing was requested, so reruns stay byte-identical.
    pub wall_time_s: f64,
}

/// One CSV row of a CRLB curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrlbRow {
    pub snr_db: f64,
    pub crlb_range_m: f64,
    pub crlb_velocity_mps: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepOptions {
    /// Replace the SNR list by a single noiseless point.
    pub noiseless: bool,
    /// Record wall-clock time per row.
    pub timing: bool,
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ trial as u64
}

struct TrialOutcome {
    range_err2: f64,
    velocity_err2: f64,
    ops: u64,
    hypotheses: usize,
}

pub fn run_rmse_sweep(cfg: &ExperimentConfig, opts: SweepOptions) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let sys = &cfg.system;
    let truth = cfg.target_params()?;
    let operator = factored_crosstalk(sys, truth.delay, truth.doppler)?;
    let theta = ParameterPoint::new(truth.gain, truth.delay, truth.doppler);

    // CRLB at unit noise variance, conditioned on each trial's frame
    let unit_bounds = (0..cfg.iterations)
        .into_par_iter()
        .map(|t| {
            let x = random_dd_frame(sys, trial_seed(cfg.seed, t));
            let b = bounds(&fisher(&x, sys, &theta, 1.0)?, sys)?;
            Ok((b.sigma_range.powi(2), b.sigma_velocity.powi(2)))
        })
        .collect::<Result<Vec<_>>>()?;
    let iters = cfg.iterations as f64;
    let crlb_range2 = unit_bounds.iter().map(|b| b.0).sum::<f64>() / iters;
    let crlb_velocity2 = unit_bounds.iter().map(|b| b.1).sum::<f64>() / iters;

    let snrs = if opts.noiseless {
        vec![f64::INFINITY]
    } else {
        cfg.snr_db.clone()
    };
    let mut rows = Vec::with_capacity(snrs.len() * cfg.n_lobe.len());
    for &snr in &snrs {
        let var = noise_variance(snr);
        for &n_lobe in &cfg.n_lobe {
            let start = Instant::now();
            let lobe = (n_lobe > 0).then_some(n_lobe);
            let outcomes = (0..cfg.iterations)
                .into_par_iter()
                .map(|t| {
                    let seed = trial_seed(cfg.seed, t);
                    let x = random_dd_frame(sys, seed);
                    let y = simulate_rx(&operator, &x, truth.gain, snr, seed)?;
                    let est = ml_estimate(&x, &y, sys, &cfg.grid, lobe)?;
                    Ok(TrialOutcome {
                        range_err2: (est.range_hat - cfg.target.range).powi(2),
                        velocity_err2: (est.velocity_hat - cfg.target.speed).powi(2),
                        ops: est.ops_used,
                        hypotheses: est.hypotheses,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut range = 0.0;
            let mut velocity = 0.0;
            let mut ops = 0u64;
            let mut hyps = 0usize;
            for o in &outcomes {
                range += o.range_err2;
                velocity += o.velocity_err2;
                ops += o.ops;
                hyps += o.hypotheses;
            }
            rows.push(SweepRow {
                snr_db: snr,
                n_lobe,
                rmse_range_m: (range / iters).sqrt(),
                rmse_velocity_mps: (velocity / iters).sqrt(),
                crlb_range_m: (crlb_range2 * var).sqrt(),
                crlb_velocity_mps: (crlb_velocity2 * var).sqrt(),
                mean_ops_per_hypothesis: ops as f64 / hyps as f64,
                wall_time_s: if opts.timing {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                },
            });
        }
    }
    Ok(rows)
}

/// Bounds per SNR point for the configured target and the frame of `seed`.
pub fn run_crlb_curve(cfg: &ExperimentConfig) -> Result<Vec<CrlbRow>> {
    cfg.validate()?;
    let sys = &cfg.system;
    let truth = cfg.target_params()?;
    let theta = ParameterPoint::new(truth.gain, truth.delay, truth.doppler);
    let x = random_dd_frame(sys, cfg.seed);
    cfg.snr_db
        .iter()
        .map(|&snr| {
            let b = bounds(&fisher(&x, sys, &theta, noise_variance(snr))?, sys)?;
            Ok(CrlbRow {
                snr_db: snr,
                crlb_range_m: b.sigma_range,
                crlb_velocity_mps: b.sigma_velocity,
            })
        })
        .collect()
}

/// Writes rows with a header to `path`, or to stdout when `path` is `None`.
pub fn write_csv<T: Serialize>(rows: &[T], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|e| HarnessError::io(p, e))?;
            write_rows(rows, file)?;
        }
        None => write_rows(rows, std::io::stdout().lock())?,
    }
    Ok(())
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| HarnessError::io("<csv output>", e))?;
    Ok(())
}

pub fn to_csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut buf = Vec::new();
    write_rows(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?)
}
