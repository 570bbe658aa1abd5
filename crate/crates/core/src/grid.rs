//! OTFS numerology, delay-Doppler / time-frequency frames and the SFFT pair.
//!
//! Delay-Doppler frames are stored vectorized with the delay index running
//! fastest: element `x[k, l]` lives at `n = l * M + k`. This makes every
//! contiguous run of `M` entries one Doppler block, which is the layout the
//! Kronecker-factored channel operator acts on.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s), exact SI value.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// RNG stream carrying frame symbols.
const SYMBOL_STREAM: u64 = 0;
/// RNG stream carrying receiver noise.
pub(crate) const NOISE_STREAM: u64 = 1;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Modulation {
    #[default]
    Qam16,
}

/// OTFS numerology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub carrier_freq: f64,
    pub subcarrier_spacing: f64,
    pub num_subcarriers: usize,
    pub num_slots: usize,
    pub modulation: Modulation,
}

impl SystemConfig {
    /// Builds a validated 16-QAM configuration.
    pub fn new(
        carrier_freq: f64,
        subcarrier_spacing: f64,
        num_subcarriers: usize,
        num_slots: usize,
    ) -> Result<Self> {
        let cfg = SystemConfig {
            carrier_freq,
            subcarrier_spacing,
            num_subcarriers,
            num_slots,
            modulation: Modulation::Qam16,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_freq.is_finite() && self.carrier_freq > 0.0) {
            return Err(Error::config(
                "carrier_freq",
                format!("must be positive and finite, got {}", self.carrier_freq),
            ));
        }
        if !(self.subcarrier_spacing.is_finite() && self.subcarrier_spacing > 0.0) {
            return Err(Error::config(
                "subcarrier_spacing",
                format!(
                    "must be positive and finite, got {}",
                    self.subcarrier_spacing
                ),
            ));
        }
        if self.num_subcarriers < 2 {
            return Err(Error::config(
                "num_subcarriers",
                format!("M must be at least 2, got {}", self.num_subcarriers),
            ));
        }
        if self.num_slots < 2 {
            return Err(Error::config(
                "num_slots",
                format!("N must be at least 2, got {}", self.num_slots),
            ));
        }
        Ok(())
    }

    /// Symbol time `T = 1 / Δf`.
    pub fn symbol_time(&self) -> f64 {
        1.0 / self.subcarrier_spacing
    }

    /// Occupied bandwidth `B = M Δf`.
    pub fn bandwidth(&self) -> f64 {
        self.num_subcarriers as f64 * self.subcarrier_spacing
    }

    /// Frame duration `N T`.
    pub fn frame_time(&self) -> f64 {
        self.num_slots as f64 * self.symbol_time()
    }

    /// Length `N M` of a vectorized frame.
    pub fn frame_len(&self) -> usize {
        self.num_subcarriers * self.num_slots
    }

    /// Delay resolution `1 / (M Δf)` in seconds.
    pub fn delay_bin(&self) -> f64 {
        1.0 / self.bandwidth()
    }

    /// Doppler resolution `1 / (N T)` in hertz.
    pub fn doppler_bin(&self) -> f64 {
        1.0 / self.frame_time()
    }

    /// Round-trip delay to range, `r = c τ / 2`.
    pub fn delay_to_range(&self, delay: f64) -> f64 {
        SPEED_OF_LIGHT * delay / 2.0
    }

    /// Doppler shift to radial speed, `v = c f_D / (2 f_c)`.
    pub fn doppler_to_speed(&self, doppler: f64) -> f64 {
        SPEED_OF_LIGHT * doppler / (2.0 * self.carrier_freq)
    }
}

/// Ground-truth point target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingTarget {
    /// Range in meters.
    pub range: f64,
    /// Signed radial speed in m/s; positive for an approaching target.
    pub speed: f64,
}

/// Channel parameters induced by a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetParams {
    pub delay: f64,
    pub doppler: f64,
    /// `h' = exp(j 2π f_D τ)` for a unit channel gain.
    pub gain: Complex64,
}

impl SensingTarget {
    pub fn new(range: f64, speed: f64) -> Self {
        SensingTarget { range, speed }
    }

    /// Builds a target from a speed in km/h.
    pub fn from_kmh(range: f64, speed_kmh: f64) -> Self {
        SensingTarget {
            range,
            speed: speed_kmh / 3.6,
        }
    }

    pub fn params(&self, cfg: &SystemConfig) -> Result<TargetParams> {
        if !(self.range.is_finite() && self.range >= 0.0) {
            return Err(Error::Domain(format!(
                "target range must be non-negative, got {} m",
                self.range
            )));
        }
        if !self.speed.is_finite() {
            return Err(Error::Domain(format!(
                "target speed must be finite, got {} m/s",
                self.speed
            )));
        }
        let delay = 2.0 * self.range / SPEED_OF_LIGHT;
        let doppler = 2.0 * self.speed * cfg.carrier_freq / SPEED_OF_LIGHT;
        Ok(TargetParams {
            delay,
            doppler,
            gain: Complex64::from_polar(1.0, TAU * doppler * delay),
        })
    }
}

/// `M x N` delay-Doppler symbol grid, vectorized with `n = l * M + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DdFrame {
    m: usize,
    n: usize,
    data: Vec<Complex64>,
}

impl DdFrame {
    pub fn zeros(m: usize, n: usize) -> Self {
        DdFrame {
            m,
            n,
            data: vec![Complex64::new(0.0, 0.0); m * n],
        }
    }

    /// Wraps an already vectorized frame.
    pub fn from_vec(m: usize, n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != m * n {
            return Err(Error::shape("DdFrame::from_vec", m * n, data.len()));
        }
        Ok(DdFrame { m, n, data })
    }

    /// Number of delay bins `M`.
    pub fn delay_bins(&self) -> usize {
        self.m
    }

    /// Number of Doppler bins `N`.
    pub fn doppler_bins(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn index(&self, k: usize, l: usize) -> usize {
        vec_index(self.m, k, l)
    }

    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.data[self.index(k, l)]
    }

    pub fn set(&mut self, k: usize, l: usize, value: Complex64) {
        let i = self.index(k, l);
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub(crate) fn check_dims(&self, cfg: &SystemConfig) -> Result<()> {
        if self.m != cfg.num_subcarriers {
            return Err(Error::shape(
                "DdFrame delay bins",
                cfg.num_subcarriers,
                self.m,
            ));
        }
        if self.n != cfg.num_slots {
            return Err(Error::shape("DdFrame Doppler bins", cfg.num_slots, self.n));
        }
        Ok(())
    }
}

/// Maps `(k, l)` to its position in the vectorized frame.
#[inline]
pub fn vec_index(m: usize, k: usize, l: usize) -> usize {
    l * m + k
}

/// Inverse of [`vec_index`]: returns `(k, l)`.
#[inline]
pub fn devec_index(m: usize, n: usize) -> (usize, usize) {
    (n % m, n / m)
}

/// `N x M` time-frequency grid, stored row-major (`X[n, m]` at `n * M + m`).
#[derive(Debug, Clone, PartialEq)]
pub struct TfFrame {
    slots: usize,
    subcarriers: usize,
    data: Vec<Complex64>,
}

impl TfFrame {
    pub fn from_vec(slots: usize, subcarriers: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != slots * subcarriers {
            return Err(Error::shape(
                "TfFrame::from_vec",
                slots * subcarriers,
                data.len(),
            ));
        }
        Ok(TfFrame {
            slots,
            subcarriers,
            data,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.data[n * self.subcarriers + m]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

/// Unit-power 16-QAM alphabet `{(a + jb)/√10 : a, b ∈ {-3, -1, 1, 3}}`.
pub fn qam16_constellation() -> [Complex64; 16] {
    const LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];
    let scale = 1.0 / 10f64.sqrt();
    std::array::from_fn(|i| Complex64::new(LEVELS[i % 4] * scale, LEVELS[i / 4] * scale))
}

/// Draws an i.i.d. uniform 16-QAM frame. Identical seeds give identical frames.
pub fn random_dd_frame(cfg: &SystemConfig, seed: u64) -> DdFrame {
    let alphabet = match cfg.modulation {
        Modulation::Qam16 => qam16_constellation(),
    };
    let mut rng = stream_rng(seed, SYMBOL_STREAM);
    let data = (0..cfg.frame_len())
        .map(|_| alphabet[rng.random_range(0..alphabet.len())])
        .collect();
    DdFrame {
        m: cfg.num_subcarriers,
        n: cfg.num_slots,
        data,
    }
}

struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftPair {
    fn new(planner: &mut FftPlanner<f64>, len: usize) -> Self {
        FftPair {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }
}

/// Symplectic finite Fourier transform,
/// `X[n,m] = Σ_k Σ_l x[k,l] e^{-j2π(mk/M - nl/N)}`.
pub fn sfft(cfg: &SystemConfig, dd: &DdFrame) -> Result<TfFrame> {
    dd.check_dims(cfg)?;
    let (m, n) = (dd.m, dd.n);
    let mut planner = FftPlanner::new();
    let along_delay = FftPair::new(&mut planner, m);
    let along_doppler = FftPair::new(&mut planner, n);

    // Forward DFT over k for every Doppler column; columns are contiguous.
    let mut work = dd.data.clone();
    along_delay.forward.process(&mut work);

    // Unnormalized inverse DFT over l for every subcarrier m.
    let mut out = vec![Complex64::new(0.0, 0.0); m * n];
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for sc in 0..m {
        for (l, c) in column.iter_mut().enumerate() {
            *c = work[vec_index(m, sc, l)];
        }
        along_doppler.inverse.process(&mut column);
        for (slot, c) in column.iter().enumerate() {
            out[slot * m + sc] = *c;
        }
    }
    TfFrame::from_vec(n, m, out)
}

/// Inverse SFFT,
/// `y[k,l] = 1/(NM) Σ_n Σ_m Y[n,m] e^{j2π(mk/M - nl/N)}`.
pub fn isfft(cfg: &SystemConfig, tf: &TfFrame) -> Result<DdFrame> {
    if tf.subcarriers != cfg.num_subcarriers {
        return Err(Error::shape(
            "TfFrame subcarriers",
            cfg.num_subcarriers,
            tf.subcarriers,
        ));
    }
    if tf.slots != cfg.num_slots {
        return Err(Error::shape("TfFrame slots", cfg.num_slots, tf.slots));
    }
    let (m, n) = (tf.subcarriers, tf.slots);
    let mut planner = FftPlanner::new();
    let along_delay = FftPair::new(&mut planner, m);
    let along_doppler = FftPair::new(&mut planner, n);

    // Inverse DFT over m for every time slot; rows are contiguous.
    let mut work = tf.data.clone();
    along_delay.inverse.process(&mut work);

    let scale = 1.0 / (m * n) as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); m * n];
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..m {
        for (slot, c) in column.iter_mut().enumerate() {
            *c = work[slot * m + k];
        }
        along_doppler.forward.process(&mut column);
        for (l, c) in column.iter().enumerate() {
            out[vec_index(m, k, l)] = *c * scale;
        }
    }
    DdFrame::from_vec(m, n, out)
}
