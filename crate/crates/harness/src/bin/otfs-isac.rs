use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use otfs_isac_harness::{
    inspect_operator, run_crlb_curve, run_rmse_sweep, run_selftest, with_threads, write_csv,
    ExperimentConfig, HarnessError, InspectRequest, Result, SweepOptions,
};

/// Delay-Doppler sensing experiments: RMSE sweeps, CRLB curves and operator inspection.
#[derive(Parser)]
#[command(name = "otfs-isac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo RMSE of range and velocity per (SNR, n_lobe) pair.
    Rmse {
        #[command(flatten)]
        common: Common,
        /// Disable noise; one row per n_lobe with snr_db = inf.
        #[arg(long)]
        noiseless: bool,
        /// Record wall-clock time per row (output is then no longer reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Range and velocity CRLB for each configured SNR.
    Crlb {
        #[command(flatten)]
        common: Common,
    },
    /// Entry counts, masks and (optionally) the dense |Ψ| for one hypothesis.
    Inspect {
        #[command(flatten)]
        common: Common,
        /// Hypothesis delay in seconds (default: configured target).
        #[arg(long)]
        delay_s: Option<f64>,
        /// Hypothesis Doppler shift in Hz (default: configured target).
        #[arg(long)]
        doppler_hz: Option<f64>,
        /// Approximation order; 0 inspects the full operator.
        #[arg(long, default_value_t = 2)]
        n_lobe: usize,
        /// Skip the dense NM x NM dump.
        #[arg(long)]
        summary_only: bool,
    },
    /// Oracle-equivalence checks.
    Selftest {
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV (rmse, crlb) or directory (inspect); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_path = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Rmse {
            common,
            noiseless,
            timing,
        } => {
            let cfg = common.load()?;
            let opts = SweepOptions { noiseless, timing };
            let rows = with_threads(common.threads, || run_rmse_sweep(&cfg, opts))??;
            write_csv(&rows, cfg.output_path.as_deref())?;
        }
        Command::Crlb { common } => {
            let cfg = common.load()?;
            let rows = with_threads(common.threads, || run_crlb_curve(&cfg))??;
            write_csv(&rows, cfg.output_path.as_deref())?;
        }
        Command::Inspect {
            common,
            delay_s,
            doppler_hz,
            n_lobe,
            summary_only,
        } => {
            let cfg = common.load()?;
            let truth = cfg.target_params()?;
            if let Some(dir) = &common.out {
                std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
            }
            let req = InspectRequest {
                n_lobe,
                dense: !summary_only,
                out_dir: common.out.clone(),
            };
            let tau = delay_s.unwrap_or(truth.delay);
            let fd = doppler_hz.unwrap_or(truth.doppler);
            let s = with_threads(common.threads, || {
                inspect_operator(&cfg.system, tau, fd, &req)
            })??;
            println!(
                "M x N               {} x {}",
                s.num_subcarriers, s.num_slots
            );
            println!(
                "tau, f_D            {:e} s, {} Hz (k_tau = {})",
                s.tau_s, s.doppler_hz, s.k_tau
            );
            println!("direct entries      {}", s.direct_entries);
            println!("factored entries    {}", s.factored_entries);
            println!(
                "masked entries      {} (n_lobe = {})",
                s.masked_entries, s.n_lobe
            );
            println!("direct / masked     {:.1}", s.direct_to_masked_ratio);
            if let Some(nz) = s.retained_nonzero {
                println!("non-zero in Psi     {nz}");
            }
        }
        Command::Selftest { threads } => {
            let results = with_threads(threads, run_selftest)?;
            let mut ok = true;
            for r in &results {
                println!(
                    "{} {} ({})",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
                ok &= r.passed;
            }
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
