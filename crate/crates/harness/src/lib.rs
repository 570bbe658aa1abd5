//! Experiment driver for `otfs-isac`: TOML-configured Monte-Carlo RMSE
//! sweeps, CRLB curves, operator inspection and a self-test, all emitting CSV.

pub mod config;
pub mod error;
pub mod inspect;
pub mod selftest;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use inspect::{inspect_operator, InspectRequest, InspectSummary, DENSE_DUMP_LIMIT};
pub use selftest::{run_selftest, CheckResult};
pub use sweep::{
    read_csv, run_crlb_curve, run_rmse_sweep, to_csv_string, write_csv, CrlbRow, SweepOptions,
    SweepRow,
};

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(HarnessError::config("--threads", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::config("--threads", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
