//! Single-target observation model and the maximum-likelihood grid search.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::crosstalk::{check_params, factored_crosstalk, masked_crosstalk, FactoredCrossTalk};
use crate::error::{Error, Result};
use crate::grid::{stream_rng, DdFrame, SystemConfig, NOISE_STREAM};

/// Metrics within this relative distance of the running maximum are ties.
const TIE_REL_TOL: f64 = 1e-12;

/// Noise variance `σ_w² = 10^{-SNR/10}` for unit-power symbols and `|h| = 1`.
/// An infinite SNR gives zero.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Circularly symmetric complex Gaussian samples of unit variance.
pub fn unit_noise(len: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = stream_rng(seed, NOISE_STREAM);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..len)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

/// `y = h' Ψ x + w`, with `w` drawn from `seed` at variance `10^{-snr_db/10}`.
/// `snr_db = +∞` disables the noise.
pub fn simulate_rx(
    f: &FactoredCrossTalk,
    x: &DdFrame,
    gain: Complex64,
    snr_db: f64,
    seed: u64,
) -> Result<Vec<Complex64>> {
    let mut y = f.apply(x.as_slice())?;
    for v in y.iter_mut() {
        *v *= gain;
    }
    let sigma = noise_variance(snr_db).sqrt();
    if sigma > 0.0 {
        for (v, w) in y.iter_mut().zip(unit_noise(f.dim(), seed)) {
            *v += w * sigma;
        }
    }
    Ok(y)
}

/// ML metric `|xᴴ Ψᴴ y|² / ‖Ψ x‖²`.
pub fn likelihood_metric(x: &[Complex64], y: &[Complex64], f: &FactoredCrossTalk) -> Result<f64> {
    if y.len() != f.dim() {
        return Err(Error::Shape {
            context: "likelihood_metric y",
            expected: f.dim(),
            found: y.len(),
        });
    }
    let psi_x = f.apply(x)?;
    let energy: f64 = psi_x.iter().map(|v| v.norm_sqr()).sum();
    if energy <= f64::MIN_POSITIVE {
        return Err(Error::Domain(
            "likelihood metric undefined: Ψ x is zero for this hypothesis".into(),
        ));
    }
    // xᴴ Ψᴴ y = (Ψ x)ᴴ y
    let corr: Complex64 = psi_x.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
    Ok(corr.norm_sqr() / energy)
}

/// Hypothesis set `Γ`: delays and Doppler shifts on the lattices
/// `i / (M' Δf)` and `j / (N' T)` that fall inside the search window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchGrid {
    pub tau_min: f64,
    pub tau_max: f64,
    pub doppler_min: f64,
    pub doppler_max: f64,
    pub m_prime: usize,
    pub n_prime: usize,
}

impl SearchGrid {
    /// `M' = 4M`, `N' = 4N`, delay window `[0, (M-1)/(2MΔf)]` and Doppler
    /// window `±Δf/4`.
    pub fn default_for(cfg: &SystemConfig) -> Self {
        SearchGrid {
            tau_min: 0.0,
            tau_max: 0.5 * (cfg.num_subcarriers - 1) as f64 * cfg.delay_bin(),
            doppler_min: -0.25 * cfg.subcarrier_spacing,
            doppler_max: 0.25 * cfg.subcarrier_spacing,
            m_prime: 4 * cfg.num_subcarriers,
            n_prime: 4 * cfg.num_slots,
        }
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if self.m_prime < cfg.num_subcarriers {
            return Err(Error::config(
                "m_prime",
                format!(
                    "must be at least M = {}, got {}",
                    cfg.num_subcarriers, self.m_prime
                ),
            ));
        }
        if self.n_prime < cfg.num_slots {
            return Err(Error::config(
                "n_prime",
                format!(
                    "must be at least N = {}, got {}",
                    cfg.num_slots, self.n_prime
                ),
            ));
        }
        if self.tau_min.is_nan() || self.tau_max.is_nan() || self.tau_min > self.tau_max {
            return Err(Error::config("tau_max", "empty delay window"));
        }
        if self.doppler_min.is_nan()
            || self.doppler_max.is_nan()
            || self.doppler_min > self.doppler_max
        {
            return Err(Error::config("doppler_max", "empty Doppler window"));
        }
        for (field, tau) in [("tau_min", self.tau_min), ("tau_max", self.tau_max)] {
            check_params(cfg, tau, 0.0).map_err(|e| Error::config(field, e.to_string()))?;
        }
        for (field, fd) in [
            ("doppler_min", self.doppler_min),
            ("doppler_max", self.doppler_max),
        ] {
            check_params(cfg, 0.0, fd).map_err(|e| Error::config(field, e.to_string()))?;
        }
        if self.delays(cfg).is_empty() || self.dopplers(cfg).is_empty() {
            return Err(Error::config("grid", "window contains no fine-grid point"));
        }
        Ok(())
    }

    pub fn delay_step(&self, cfg: &SystemConfig) -> f64 {
        1.0 / (self.m_prime as f64 * cfg.subcarrier_spacing)
    }

    pub fn doppler_step(&self, cfg: &SystemConfig) -> f64 {
        1.0 / (self.n_prime as f64 * cfg.symbol_time())
    }

    /// Fine-grid delay `i / (M' Δf)`.
    pub fn delay_at(&self, cfg: &SystemConfig, i: i64) -> f64 {
        i as f64 / (self.m_prime as f64 * cfg.subcarrier_spacing)
    }

    /// Fine-grid Doppler `j / (N' T)`.
    pub fn doppler_at(&self, cfg: &SystemConfig, j: i64) -> f64 {
        j as f64 / (self.n_prime as f64 * cfg.symbol_time())
    }

    /// Fine-grid delays in the window, ascending.
    pub fn delays(&self, cfg: &SystemConfig) -> Vec<f64> {
        lattice(
            self.tau_min,
            self.tau_max,
            self.m_prime as f64 * cfg.subcarrier_spacing,
        )
    }

    /// Fine-grid Doppler shifts in the window, ascending.
    pub fn dopplers(&self, cfg: &SystemConfig) -> Vec<f64> {
        lattice(
            self.doppler_min,
            self.doppler_max,
            self.n_prime as f64 * cfg.symbol_time(),
        )
    }

    /// `|Γ|`.
    pub fn len(&self, cfg: &SystemConfig) -> usize {
        self.delays(cfg).len() * self.dopplers(cfg).len()
    }

    pub fn is_empty(&self, cfg: &SystemConfig) -> bool {
        self.len(cfg) == 0
    }
}

/// Points `i / scale` (integer `i`) within `[lo, hi]`, ascending.
fn lattice(lo: f64, hi: f64, scale: f64) -> Vec<f64> {
    let eps = 1e-9;
    let first = (lo * scale - eps).ceil() as i64;
    let last = (hi * scale + eps).floor() as i64;
    (first..=last).map(|i| i as f64 / scale).collect()
}

/// Grid-search outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationResult {
    pub tau_hat: f64,
    pub doppler_hat: f64,
    pub range_hat: f64,
    pub velocity_hat: f64,
    pub metric: f64,
    /// Operator entries evaluated across all hypotheses.
    pub ops_used: u64,
    pub hypotheses: usize,
}

impl EstimationResult {
    pub fn mean_ops_per_hypothesis(&self) -> f64 {
        self.ops_used as f64 / self.hypotheses as f64
    }
}

/// Search strategy for [`ml_estimate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    /// Coarse pass on the `1/(MΔf) x 1/(NT)` lattice, then the fine lattice
    /// within one coarse bin of the coarse peak.
    #[default]
    TwoStage,
    /// Every point of `Γ`.
    Exhaustive,
}

struct Evaluated {
    tau: f64,
    doppler: f64,
    metric: f64,
    ops: u64,
}

fn hypothesis(
    cfg: &SystemConfig,
    x: &[Complex64],
    y: &[Complex64],
    tau: f64,
    doppler: f64,
    n_lobe: Option<usize>,
) -> Result<Evaluated> {
    let op = match n_lobe {
        Some(nl) => masked_crosstalk(cfg, tau, doppler, nl)?,
        None => factored_crosstalk(cfg, tau, doppler)?,
    };
    // A masked operator may annihilate x; such a hypothesis scores zero.
    let metric = match likelihood_metric(x, y, &op) {
        Ok(v) => v,
        Err(Error::Domain(_)) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(Evaluated {
        tau,
        doppler,
        metric,
        ops: op.ops_evaluated,
    })
}

/// Evaluates all `(τ, f_D)` pairs (delay-major order) and returns the argmax
/// with ties resolved to the lowest delay, then the lowest Doppler.
fn search(
    cfg: &SystemConfig,
    x: &[Complex64],
    y: &[Complex64],
    delays: &[f64],
    dopplers: &[f64],
    n_lobe: Option<usize>,
) -> Result<(Evaluated, u64, usize)> {
    let pairs: Vec<(f64, f64)> = delays
        .iter()
        .flat_map(|&t| dopplers.iter().map(move |&d| (t, d)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::config("grid", "no hypotheses to evaluate"));
    }
    let evaluated = pairs
        .par_iter()
        .map(|&(t, d)| hypothesis(cfg, x, y, t, d, n_lobe))
        .collect::<Result<Vec<_>>>()?;
    let ops = evaluated.iter().map(|e| e.ops).sum();
    let count = evaluated.len();
    let best = evaluated
        .into_iter()
        .reduce(|best, e| {
            if e.metric > best.metric * (1.0 + TIE_REL_TOL) {
                e
            } else {
                best
            }
        })
        .expect("non-empty");
    Ok((best, ops, count))
}

/// ML delay-Doppler estimate using two-stage search. `n_lobe = None` uses full
/// factored operators, `Some(q)` the order-`q` masked operators.
pub fn ml_estimate(
    x: &DdFrame,
    y: &[Complex64],
    cfg: &SystemConfig,
    grid: &SearchGrid,
    n_lobe: Option<usize>,
) -> Result<EstimationResult> {
    ml_estimate_with(x, y, cfg, grid, n_lobe, SearchStrategy::TwoStage)
}

pub fn ml_estimate_with(
    x: &DdFrame,
    y: &[Complex64],
    cfg: &SystemConfig,
    grid: &SearchGrid,
    n_lobe: Option<usize>,
    strategy: SearchStrategy,
) -> Result<EstimationResult> {
    x.check_dims(cfg)?;
    grid.validate(cfg)?;
    if y.len() != cfg.frame_len() {
        return Err(Error::shape("ml_estimate y", cfg.frame_len(), y.len()));
    }
    if n_lobe == Some(0) {
        return Err(Error::config(
            "n_lobe",
            "must be at least 1 (use None for full operators)",
        ));
    }
    let xs = x.as_slice();
    let fine_delays = grid.delays(cfg);
    let fine_dopplers = grid.dopplers(cfg);

    let (best, ops, count) = match strategy {
        SearchStrategy::Exhaustive => search(cfg, xs, y, &fine_delays, &fine_dopplers, n_lobe)?,
        SearchStrategy::TwoStage => {
            let coarse_delays = lattice(grid.tau_min, grid.tau_max, cfg.bandwidth());
            let coarse_dopplers = lattice(grid.doppler_min, grid.doppler_max, cfg.frame_time());
            // windows narrower than one coarse bin fall back to the fine lattice
            let coarse_delays = if coarse_delays.is_empty() {
                fine_delays.clone()
            } else {
                coarse_delays
            };
            let coarse_dopplers = if coarse_dopplers.is_empty() {
                fine_dopplers.clone()
            } else {
                coarse_dopplers
            };
            let (coarse, ops_c, n_c) =
                search(cfg, xs, y, &coarse_delays, &coarse_dopplers, n_lobe)?;

            let (dt, dd) = (cfg.delay_bin(), cfg.doppler_bin());
            let slack = 1e-9;
            let near = |v: f64, centre: f64, half: f64| (v - centre).abs() <= half * (1.0 + slack);
            let delays: Vec<f64> = fine_delays
                .iter()
                .copied()
                .filter(|&t| near(t, coarse.tau, dt))
                .collect();
            let dopplers: Vec<f64> = fine_dopplers
                .iter()
                .copied()
                .filter(|&d| near(d, coarse.doppler, dd))
                .collect();
            let (fine, ops_f, n_f) = search(cfg, xs, y, &delays, &dopplers, n_lobe)?;
            (fine, ops_c + ops_f, n_c + n_f)
        }
    };

    Ok(EstimationResult {
        tau_hat: best.tau,
        doppler_hat: best.doppler,
        range_hat: cfg.delay_to_range(best.tau),
        velocity_hat: cfg.doppler_to_speed(best.doppler),
        metric: best.metric,
        ops_used: ops,
        hypotheses: count,
    })
}
