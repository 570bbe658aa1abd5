//! Experiment configuration, loaded from TOML.
//!
//! Physical quantities carry their unit in the key name:
//!
//! ```toml
//! [system]
//! carrier_freq_hz = 5.89e9
//! subcarrier_spacing_hz = 156250.0
//! num_subcarriers = 16
//! num_slots = 8
//!
//! [target]
//! range_m = 20.0
//! speed_kmh = 80.0          # or speed_mps
//!
//! [sweep]
//! snr_db = [-10.0, 0.0]
//! n_lobe = [0, 1, 2, 5]     # 0 = full estimator
//! iterations = 200
//! seed = 1
//!
//! [grid]                    # optional, every key optional
//! tau_min_s = 0.0
//! tau_max_s = 3.0e-6
//! doppler_min_hz = -39062.5
//! doppler_max_hz = 39062.5
//! m_prime = 64
//! n_prime = 32
//!
//! [output]                  # optional
//! path = "rmse.csv"
//! ```

use std::path::{Path, PathBuf};

use otfs_isac::{Error as CoreError, SearchGrid, SensingTarget, SystemConfig, TargetParams};
use serde::Deserialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    target: RawTarget,
    sweep: RawSweep,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    carrier_freq_hz: f64,
    subcarrier_spacing_hz: f64,
    num_subcarriers: usize,
    num_slots: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTarget {
    range_m: f64,
    speed_kmh: Option<f64>,
    speed_mps: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    snr_db: Vec<f64>,
    n_lobe: Vec<usize>,
    iterations: usize,
    seed: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    tau_min_s: Option<f64>,
    tau_max_s: Option<f64>,
    doppler_min_hz: Option<f64>,
    doppler_max_hz: Option<f64>,
    m_prime: Option<usize>,
    n_prime: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<PathBuf>,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub target: SensingTarget,
    pub snr_db: Vec<f64>,
    /// `0` selects the full estimator.
    pub n_lobe: Vec<usize>,
    pub iterations: usize,
    pub seed: u64,
    pub grid: SearchGrid,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let at = match e.span() {
                Some(span) => {
                    let line = text[..span.start].matches('\n').count() + 1;
                    format!("line {line}")
                }
                None => "<document>".to_string(),
            };
            HarnessError::config(at, msg)
        })?;
        raw.validate()
    }

    /// Delay, Doppler and gain of the configured target.
    pub fn target_params(&self) -> Result<TargetParams> {
        Ok(self.target.params(&self.system)?)
    }

    /// Re-runs all load-time checks; call after overriding fields.
    pub fn validate(&self) -> Result<()> {
        self.system.validate().map_err(|e| prefixed("system", e))?;
        let params = self
            .target
            .params(&self.system)
            .map_err(|e| HarnessError::config("target", e.to_string()))?;
        otfs_isac::crosstalk::check_params(&self.system, params.delay, params.doppler)
            .map_err(|e| HarnessError::config("target", e.to_string()))?;
        if self.snr_db.is_empty() {
            return Err(HarnessError::config(
                "sweep.snr_db",
                "list must not be empty",
            ));
        }
        if let Some(bad) = self
            .snr_db
            .iter()
            .find(|s| s.is_nan() || **s == f64::NEG_INFINITY)
        {
            return Err(HarnessError::config(
                "sweep.snr_db",
                format!("invalid SNR {bad}"),
            ));
        }
        if self.n_lobe.is_empty() {
            return Err(HarnessError::config(
                "sweep.n_lobe",
                "list must not be empty",
            ));
        }
        if self.iterations == 0 {
            return Err(HarnessError::config(
                "sweep.iterations",
                "must be at least 1",
            ));
        }
        self.grid
            .validate(&self.system)
            .map_err(|e| prefixed("grid", e))?;
        Ok(())
    }
}

fn prefixed(section: &str, e: CoreError) -> HarnessError {
    match e {
        CoreError::Config { field, reason } => {
            HarnessError::config(format!("{section}.{field}"), reason)
        }
        other => HarnessError::config(section, other.to_string()),
    }
}

impl RawConfig {
    fn validate(self) -> Result<ExperimentConfig> {
        let system = SystemConfig::new(
            self.system.carrier_freq_hz,
            self.system.subcarrier_spacing_hz,
            self.system.num_subcarriers,
            self.system.num_slots,
        );
        let system = match system {
            Ok(s) => s,
            Err(e) => return Err(rename_system(prefixed("system", e))),
        };
        let target = match (self.target.speed_kmh, self.target.speed_mps) {
            (Some(kmh), None) => SensingTarget::from_kmh(self.target.range_m, kmh),
            (None, Some(mps)) => SensingTarget::new(self.target.range_m, mps),
            _ => {
                return Err(HarnessError::config(
                    "target",
                    "set exactly one of `speed_kmh` and `speed_mps`",
                ))
            }
        };
        let d = SearchGrid::default_for(&system);
        let g = self.grid;
        let grid = SearchGrid {
            tau_min: g.tau_min_s.unwrap_or(d.tau_min),
            tau_max: g.tau_max_s.unwrap_or(d.tau_max),
            doppler_min: g.doppler_min_hz.unwrap_or(d.doppler_min),
            doppler_max: g.doppler_max_hz.unwrap_or(d.doppler_max),
            m_prime: g.m_prime.unwrap_or(d.m_prime),
            n_prime: g.n_prime.unwrap_or(d.n_prime),
        };
        let cfg = ExperimentConfig {
            system,
            target,
            snr_db: self.sweep.snr_db,
            n_lobe: self.sweep.n_lobe,
            iterations: self.sweep.iterations,
            seed: self.sweep.seed,
            grid,
            output_path: self.output.path,
        };
        cfg.validate().map_err(rename_grid)?;
        Ok(cfg)
    }
}

/// Maps core field names to their TOML keys.
fn rename_system(e: HarnessError) -> HarnessError {
    rename(
        e,
        &[
            ("system.carrier_freq", "system.carrier_freq_hz"),
            ("system.subcarrier_spacing", "system.subcarrier_spacing_hz"),
        ],
    )
}

fn rename_grid(e: HarnessError) -> HarnessError {
    rename(
        e,
        &[
            ("system.carrier_freq", "system.carrier_freq_hz"),
            ("system.subcarrier_spacing", "system.subcarrier_spacing_hz"),
            ("grid.tau_min", "grid.tau_min_s"),
            ("grid.tau_max", "grid.tau_max_s"),
            ("grid.doppler_min", "grid.doppler_min_hz"),
            ("grid.doppler_max", "grid.doppler_max_hz"),
        ],
    )
}

fn rename(e: HarnessError, table: &[(&str, &str)]) -> HarnessError {
    match e {
        HarnessError::Config { path, reason } => {
            let path = table
                .iter()
                .find(|(from, _)| *from == path)
                .map(|(_, to)| to.to_string())
                .unwrap_or(path);
            HarnessError::Config { path, reason }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"
[system]
carrier_freq_hz = 5.89e9
subcarrier_spacing_hz = 156250.0
num_subcarriers = 16
num_slots = 8

[target]
range_m = 20.0
speed_kmh = 80.0

[sweep]
snr_db = [0.0]
n_lobe = [0, 2]
iterations = 4
seed = 7
"#;

    fn path_of(text: &str) -> String {
        match ExperimentConfig::from_toml(text) {
            Err(HarnessError::Config { path, .. }) => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn loads_sample() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.system.num_subcarriers, 16);
        assert!((c.target.speed - 80.0 / 3.6).abs() < 1e-12);
        assert_eq!(c.grid, SearchGrid::default_for(&c.system));
        assert_eq!(c.n_lobe, vec![0, 2]);
        assert!(c.output_path.is_none());
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(
            path_of(&SAMPLE.replace("num_slots = 8", "num_slots = 1")),
            "system.num_slots"
        );
        assert_eq!(
            path_of(&SAMPLE.replace(
                "subcarrier_spacing_hz = 156250.0",
                "subcarrier_spacing_hz = -1.0"
            )),
            "system.subcarrier_spacing_hz"
        );
        assert_eq!(
            path_of(&SAMPLE.replace("iterations = 4", "iterations = 0")),
            "sweep.iterations"
        );
        assert_eq!(
            path_of(&SAMPLE.replace("snr_db = [0.0]", "snr_db = []")),
            "sweep.snr_db"
        );
        assert_eq!(
            path_of(&SAMPLE.replace("n_lobe = [0, 2]", "n_lobe = []")),
            "sweep.n_lobe"
        );
        assert_eq!(path_of(&SAMPLE.replace("speed_kmh = 80.0", "")), "target");
        assert_eq!(
            path_of(&SAMPLE.replace("range_m = 20.0", "range_m = 1e5")),
            "target"
        );
        let grid = format!("{SAMPLE}\n[grid]\nm_prime = 4\n");
        assert_eq!(path_of(&grid), "grid.m_prime");
        let grid = format!("{SAMPLE}\n[grid]\ndoppler_max_hz = 1e9\n");
        assert_eq!(path_of(&grid), "grid.doppler_max_hz");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = SAMPLE.replace("range_m = 20.0", "range_m = 20.0\nrange = 3");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("range"));
    }
}
