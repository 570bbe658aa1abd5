//! Fisher information over `θ = (|h'|, ∠h', τ, f_D)` and the resulting
//! range / velocity standard-deviation floors.
//!
//! The bound is conditioned on the transmitted frame: `x` is treated as a
//! known pilot, so no expectation over symbol realizations is taken.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;

use crate::crosstalk::{delay_taps, normalized_delay, partials, FactoredCrossTalk};
use crate::error::{Error, Result};
use crate::grid::{DdFrame, SystemConfig, SPEED_OF_LIGHT};

/// Largest accepted condition number of the (equilibrated) Fisher matrix.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Fisher evaluation refuses delays within `TAP_GUARD · T` of a tap boundary.
pub const TAP_GUARD: f64 = 1e-9;

/// Parameter vector `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterPoint {
    pub gain_magnitude: f64,
    pub gain_phase: f64,
    pub tau: f64,
    pub doppler: f64,
}

impl ParameterPoint {
    pub fn new(gain: Complex64, tau: f64, doppler: f64) -> Self {
        ParameterPoint {
            gain_magnitude: gain.norm(),
            gain_phase: gain.arg(),
            tau,
            doppler,
        }
    }

    pub fn gain(&self) -> Complex64 {
        Complex64::from_polar(self.gain_magnitude, self.gain_phase)
    }
}

/// `4 x 4` Fisher matrix, ordered `(|h'|, ∠h', τ, f_D)`, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub entries: Matrix4<f64>,
    pub sigma_w2: f64,
    pub theta: ParameterPoint,
}

/// Standard-deviation floors from the inverse Fisher diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub sigma_tau: f64,
    pub sigma_doppler: f64,
    pub sigma_range: f64,
    pub sigma_velocity: f64,
}

impl Bounds {
    /// Bounds scale with `σ_w`; rescales bounds computed at unit noise variance.
    pub fn scaled(&self, sigma_w2: f64) -> Bounds {
        let s = sigma_w2.sqrt();
        Bounds {
            sigma_tau: self.sigma_tau * s,
            sigma_doppler: self.sigma_doppler * s,
            sigma_range: self.sigma_range * s,
            sigma_velocity: self.sigma_velocity * s,
        }
    }
}

/// `s = h' Ψ x`, vectorized.
pub fn mean_vector(x: &DdFrame, f: &FactoredCrossTalk, gain: Complex64) -> Result<Vec<Complex64>> {
    let mut s = f.apply(x.as_slice())?;
    for v in s.iter_mut() {
        *v *= gain;
    }
    Ok(s)
}

/// Distance of `τ` to the nearest tap boundary, in units of `T`.
fn tap_distance(cfg: &SystemConfig, tau: f64) -> f64 {
    let beta = normalized_delay(cfg, tau);
    (beta - beta.round()).abs() * cfg.delay_bin() / cfg.symbol_time()
}

/// `J_ij = (2/σ_w²) Re Σ_n (∂s_n/∂θ_i)* (∂s_n/∂θ_j)`.
pub fn fisher(
    x: &DdFrame,
    cfg: &SystemConfig,
    theta: &ParameterPoint,
    sigma_w2: f64,
) -> Result<FisherMatrix> {
    x.check_dims(cfg)?;
    if !(sigma_w2.is_finite() && sigma_w2 > 0.0) {
        return Err(Error::Domain(format!(
            "noise variance must be positive and finite, got {sigma_w2}"
        )));
    }
    if tap_distance(cfg, theta.tau) < TAP_GUARD {
        return Err(Error::Domain(format!(
            "delay {:e} s lies on the tap boundary k_τ = {}; the delay derivative is \
             undefined there, offset τ by a fraction of 1/(MΔf)",
            theta.tau,
            delay_taps(cfg, theta.tau)
        )));
    }
    let p = partials(cfg, theta.tau, theta.doppler)?;
    let xs = x.as_slice();
    let gain = theta.gain();
    let unit_phase = Complex64::from_polar(1.0, theta.gain_phase);

    let psi_x = p.operator.apply(xs)?;
    let d_mag: Vec<Complex64> = psi_x.iter().map(|v| v * unit_phase).collect();
    let d_phase: Vec<Complex64> = psi_x.iter().map(|v| v * gain * Complex64::i()).collect();
    let d_tau: Vec<Complex64> = p.apply_dtau(xs)?.into_iter().map(|v| v * gain).collect();
    let d_dop: Vec<Complex64> = p
        .apply_ddoppler(xs)?
        .into_iter()
        .map(|v| v * gain)
        .collect();
    let grads = [d_mag, d_phase, d_tau, d_dop];

    let scale = 2.0 / sigma_w2;
    let mut entries = Matrix4::zeros();
    for i in 0..4 {
        for j in i..4 {
            let acc: f64 = grads[i]
                .iter()
                .zip(&grads[j])
                .map(|(a, b)| (a.conj() * b).re)
                .sum();
            entries[(i, j)] = scale * acc;
            entries[(j, i)] = scale * acc;
        }
    }
    Ok(FisherMatrix {
        entries,
        sigma_w2,
        theta: *theta,
    })
}

impl FisherMatrix {
    /// Inverse of the symmetrized matrix. Inversion runs on the
    /// unit-diagonal equilibration `D^{-1/2} J D^{-1/2}` so the condition
    /// guard does not depend on the parameters' physical units.
    pub fn inverse(&self) -> Result<Matrix4<f64>> {
        let sym = (self.entries + self.entries.transpose()) * 0.5;
        let diag = sym.diagonal();
        if diag.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Numerical(format!(
                "Fisher matrix has a non-positive diagonal entry: {:?}",
                diag.as_slice()
            )));
        }
        let d_inv_sqrt = Matrix4::from_diagonal(&diag.map(|d| 1.0 / d.sqrt()));
        let eq = d_inv_sqrt * sym * d_inv_sqrt;
        let eig = SymmetricEigen::new(eq);
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let cond = if min > 0.0 { max / min } else { f64::INFINITY };
        if cond.is_nan() || cond > CONDITION_LIMIT {
            return Err(Error::Numerical(format!(
                "Fisher matrix is numerically singular (condition estimate {cond:e} > {CONDITION_LIMIT:e})"
            )));
        }
        let eq_inv = eq
            .cholesky()
            .ok_or_else(|| Error::Numerical("Fisher matrix is not positive definite".into()))?
            .inverse();
        Ok(d_inv_sqrt * eq_inv * d_inv_sqrt)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (self.entries + self.entries.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.min()
    }
}

/// `σ_τ = √(J⁻¹)_ττ`, `σ_fD = √(J⁻¹)_ff`, mapped to range and velocity.
pub fn bounds(j: &FisherMatrix, cfg: &SystemConfig) -> Result<Bounds> {
    let inv = j.inverse()?;
    let sigma_tau = inv[(2, 2)].sqrt();
    let sigma_doppler = inv[(3, 3)].sqrt();
    Ok(Bounds {
        sigma_tau,
        sigma_doppler,
        sigma_range: SPEED_OF_LIGHT / 2.0 * sigma_tau,
        sigma_velocity: SPEED_OF_LIGHT / (2.0 * cfg.carrier_freq) * sigma_doppler,
    })
}
