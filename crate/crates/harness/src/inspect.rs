//! Operator inspection: dense `|Ψ|` dump, mask dumps and entry-count summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use otfs_isac::dirichlet::max_lobe;
use otfs_isac::{factored_crosstalk, masked_crosstalk, masks_for, BandMask, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::sweep::write_csv;

/// Largest `NM` for which a dense `NM x NM` dump is written.
pub const DENSE_DUMP_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectSummary {
    pub num_subcarriers: usize,
    pub num_slots: usize,
    pub tau_s: f64,
    pub doppler_hz: f64,
    pub k_tau: usize,
    pub n_lobe: usize,
    /// `(NM)²`: entries of the direct closed form per hypothesis.
    pub direct_entries: u64,
    /// `2N² + M²`: entries of the unmasked factored build.
    pub factored_entries: u64,
    /// Entries of the masked factored build (equal to `factored_entries` when `n_lobe = 0`).
    pub masked_entries: u64,
    pub direct_to_masked_ratio: f64,
    /// Non-zero entries of the composed masked operator; absent without a dense dump.
    pub retained_nonzero: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InspectRequest {
    pub n_lobe: usize,
    /// Write the dense `|Ψ|` heatmap (guarded by [`DENSE_DUMP_LIMIT`]).
    pub dense: bool,
    pub out_dir: Option<PathBuf>,
}

pub fn inspect_operator(
    cfg: &SystemConfig,
    tau: f64,
    doppler: f64,
    req: &InspectRequest,
) -> Result<InspectSummary> {
    cfg.validate()?;
    let nm = cfg.frame_len();
    if req.dense && nm > DENSE_DUMP_LIMIT {
        return Err(HarnessError::config(
            "inspect",
            format!(
                "dense dump needs NM <= {DENSE_DUMP_LIMIT}, got {nm}; request the factored summary instead"
            ),
        ));
    }
    let full = factored_crosstalk(cfg, tau, doppler)?;
    let op = if req.n_lobe == 0 {
        full.clone()
    } else {
        masked_crosstalk(cfg, tau, doppler, req.n_lobe)?
    };

    let retained_nonzero = if req.dense {
        let dense = op.compose();
        let nz = dense.entries.iter().filter(|v| v.norm() > 0.0).count() as u64;
        if let Some(dir) = &req.out_dir {
            let path = dir.join("psi_abs.csv");
            write_matrix(
                &path,
                dense.entries.nrows(),
                dense.entries.ncols(),
                |r, c| dense.entries[[r, c]].norm(),
            )?;
        }
        Some(nz)
    } else {
        None
    };

    if let Some(dir) = &req.out_dir {
        let order = if req.n_lobe == 0 {
            max_lobe(cfg.num_subcarriers).max(max_lobe(cfg.num_slots))
        } else {
            req.n_lobe
        };
        let masks = masks_for(cfg, tau, doppler, order)?;
        write_mask(&dir.join("mask_y.csv"), &masks.y)?;
        write_mask(&dir.join("mask_x1.csv"), &masks.x1)?;
        write_mask(&dir.join("mask_x2.csv"), &masks.x2)?;
    }

    let direct = (nm as u64).pow(2);
    let summary = InspectSummary {
        num_subcarriers: cfg.num_subcarriers,
        num_slots: cfg.num_slots,
        tau_s: tau,
        doppler_hz: doppler,
        k_tau: op.k_tau,
        n_lobe: req.n_lobe,
        direct_entries: direct,
        factored_entries: full.ops_evaluated,
        masked_entries: op.ops_evaluated,
        direct_to_masked_ratio: direct as f64 / op.ops_evaluated as f64,
        retained_nonzero,
    };
    if let Some(dir) = &req.out_dir {
        write_csv(
            std::slice::from_ref(&summary),
            Some(&dir.join("summary.csv")),
        )?;
    }
    Ok(summary)
}

fn write_mask(path: &Path, mask: &BandMask) -> Result<()> {
    write_matrix(path, mask.rows(), mask.cols(), |r, c| {
        u8::from(mask.get(r, c)) as f64
    })
}

/// Row-per-line matrix dump with a `c0,c1,...` header.
fn write_matrix(
    path: &Path,
    rows: usize,
    cols: usize,
    value: impl Fn(usize, usize) -> f64,
) -> Result<()> {
    let io = |e| HarnessError::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    let header: Vec<String> = (0..cols).map(|c| format!("c{c}")).collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for r in 0..rows {
        let line: Vec<String> = (0..cols).map(|c| value(r, c).to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}
