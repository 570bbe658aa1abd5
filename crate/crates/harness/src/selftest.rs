//! Quick oracle-equivalence checks runnable from the command line.

use num_complex::Complex64;
use otfs_isac::dirichlet::max_lobe;
use otfs_isac::{
    compose, direct_crosstalk, factored_crosstalk, isfft, masked_crosstalk, random_dd_frame, sfft,
    SystemConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn cfg(m: usize, n: usize) -> SystemConfig {
    SystemConfig::new(5.89e9, 156.25e3, m, n).expect("fixed valid configuration")
}

/// Deterministic in-range points spread over the delay and Doppler span.
fn sample_points(c: &SystemConfig, count: usize) -> Vec<(f64, f64)> {
    let m = c.num_subcarriers as f64;
    (0..count)
        .map(|i| {
            let u = (i as f64 * 0.618_033_988_749_895 + 0.137).fract();
            let v = (i as f64 * 0.754_877_666_246_693 + 0.291).fract();
            (
                u * (m - 1.0) * c.delay_bin(),
                (2.0 * v - 1.0) * 0.95 * c.subcarrier_spacing,
            )
        })
        .collect()
}

fn factored_vs_direct() -> CheckResult {
    let mut worst = 0.0f64;
    for (m, n) in [(4, 4), (8, 4), (8, 8), (16, 4), (16, 8)] {
        let c = cfg(m, n);
        for (tau, fd) in sample_points(&c, 10) {
            let err = match (
                factored_crosstalk(&c, tau, fd),
                direct_crosstalk(&c, tau, fd),
            ) {
                (Ok(f), Ok(d)) => compose(&f).max_abs_diff(&d),
                _ => f64::INFINITY,
            };
            worst = worst.max(err);
        }
    }
    CheckResult {
        name: "factored operator equals closed form",
        passed: worst < 1e-9,
        detail: format!("max |Δ| = {worst:.3e}"),
    }
}

fn identity_channel() -> CheckResult {
    let mut worst = 0.0f64;
    for (m, n) in [(4, 4), (8, 4), (16, 8)] {
        let d = compose(&factored_crosstalk(&cfg(m, n), 0.0, 0.0).expect("origin is in range"));
        for ((r, c), v) in d.entries.indexed_iter() {
            let want = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((v - Complex64::new(want, 0.0)).norm());
        }
    }
    CheckResult {
        name: "zero delay and Doppler give the identity",
        passed: worst < 1e-12,
        detail: format!("max |Ψ - I| = {worst:.3e}"),
    }
}

fn transform_roundtrip() -> CheckResult {
    let mut worst = 0.0f64;
    for (m, n) in [(4, 4), (8, 6), (8, 8)] {
        let c = cfg(m, n);
        let x = random_dd_frame(&c, 11);
        let back = sfft(&c, &x).and_then(|tf| isfft(&c, &tf));
        let err = match back {
            Ok(b) => b
                .as_slice()
                .iter()
                .zip(x.as_slice())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    CheckResult {
        name: "SFFT / ISFFT roundtrip",
        passed: worst < 1e-10,
        detail: format!("max |Δ| = {worst:.3e}"),
    }
}

fn adjoint_consistency() -> CheckResult {
    let c = cfg(8, 4);
    let mut worst = 0.0f64;
    for (tau, fd) in sample_points(&c, 5) {
        let f = factored_crosstalk(&c, tau, fd).expect("sample points are in range");
        let x = random_dd_frame(&c, 3);
        let y = random_dd_frame(&c, 4);
        // <Ψx, y> = <x, Ψᴴy>
        let lhs: Complex64 = f
            .apply(x.as_slice())
            .expect("sizes match")
            .iter()
            .zip(y.as_slice())
            .map(|(a, b)| a.conj() * b)
            .sum();
        let rhs: Complex64 = x
            .as_slice()
            .iter()
            .zip(f.apply_adjoint(y.as_slice()).expect("sizes match"))
            .map(|(a, b)| a.conj() * b)
            .sum();
        worst = worst.max((lhs - rhs).norm() / lhs.norm().max(1.0));
    }
    CheckResult {
        name: "adjoint matches inner-product identity",
        passed: worst < 1e-10,
        detail: format!("max relative |Δ| = {worst:.3e}"),
    }
}

fn mask_degeneracy() -> CheckResult {
    let c = cfg(16, 8);
    let nl = max_lobe(16);
    let mut worst = 0.0f64;
    for (tau, fd) in sample_points(&c, 5) {
        let a = compose(&factored_crosstalk(&c, tau, fd).expect("in range"));
        let b = compose(&masked_crosstalk(&c, tau, fd, nl).expect("in range"));
        worst = worst.max(a.max_abs_diff(&b));
    }
    CheckResult {
        name: "maximal-order mask keeps every entry",
        passed: worst == 0.0,
        detail: format!("max |Δ| = {worst:.3e}"),
    }
}

pub fn run_selftest() -> Vec<CheckResult> {
    vec![
        factored_vs_direct(),
        identity_channel(),
        transform_roundtrip(),
        adjoint_consistency(),
        mask_degeneracy(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for r in run_selftest() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }
}
