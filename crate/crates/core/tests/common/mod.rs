#![allow(dead_code)]

use std::f64::consts::TAU;

use num_complex::Complex64;
use otfs_isac::SystemConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn cfg(m: usize, n: usize) -> SystemConfig {
    SystemConfig::new(5.89e9, 156.25e3, m, n).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random in-range (τ, f_D), kept away from tap boundaries.
pub fn random_params(c: &SystemConfig, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let m = c.num_subcarriers as f64;
    let mut taps = rng.random_range(0.0..(m - 1.0));
    if (taps - taps.round()).abs() < 1e-3 {
        taps += 2e-3;
    }
    let tau = taps * c.delay_bin();
    let doppler = rng.random_range(-0.99..0.99) * c.subcarrier_spacing;
    (tau, doppler)
}

pub fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Cross-talk entry from explicit geometric sums; shares no code with the
/// library's ratio evaluation.
pub fn entry_oracle(
    c: &SystemConfig,
    tau: f64,
    fd: f64,
    l: usize,
    lp: usize,
    k: usize,
    kp: usize,
) -> Complex64 {
    let (m, n) = (c.num_subcarriers, c.num_slots);
    let t = 1.0 / c.subcarrier_spacing;
    let nu = fd * n as f64 * t;
    let beta = tau * m as f64 * c.subcarrier_spacing;
    let k_tau = {
        let r = beta.round();
        if (beta - r).abs() < 1e-9 {
            r as usize
        } else {
            beta.ceil() as usize
        }
    };
    let sum = |a: f64, q: usize| -> Complex64 {
        (0..q)
            .map(|r| Complex64::from_polar(1.0, TAU * r as f64 * a / q as f64))
            .sum()
    };
    let a_n = sum(lp as f64 - l as f64 + nu, n);
    let a_m = sum(kp as f64 - k as f64 + beta, m);
    let phase = Complex64::from_polar(
        1.0,
        TAU * fd * kp as f64 / (m as f64 * c.subcarrier_spacing),
    );
    let branch = if kp + k_tau >= m {
        Complex64::from_polar(1.0, -TAU * (lp as f64 / n as f64 + fd * t))
    } else {
        Complex64::new(1.0, 0.0)
    };
    a_n * a_m * phase * branch / (n * m) as f64
}

pub fn max_abs(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}
