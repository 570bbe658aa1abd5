//! Dirichlet-kernel evaluation and the band masks that sparsify the factored
//! cross-talk matrices.
//!
//! Every entry of `Y1`, `Y2`, `X1`, `X2` has the form
//! `(1 - e^{j2πa}) / (1 - e^{j2πa/Q})` times a unimodular phase, whose modulus
//! is the Dirichlet kernel `|sin(πa) / sin(πa/Q)|`. The samples `a` sit on a
//! unit lattice offset by the fractional delay (or Doppler), so the entries
//! fall into circularly shifted diagonals of constant magnitude, largest on
//! the main lobe and decaying away from it.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;

use crate::crosstalk::{delay_floor, delay_taps, doppler_ceil};
use crate::error::{Error, Result};
use crate::grid::SystemConfig;

/// Below this modulus of `1 - e^{j2πa/Q}` the ratio form is replaced by the
/// explicit geometric sum.
pub const RATIO_SINGULARITY_EPS: f64 = 1e-9;

/// Threshold on `|sin(πa/Q)|` below which derivatives use the summed form.
const DERIVATIVE_SUM_EPS: f64 = 1e-2;

/// `sin(πx)` with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let s = (PI * (x - n)).sin();
    if n.rem_euclid(2.0) == 0.0 {
        s
    } else {
        -s
    }
}

/// `cos(πx)` with the same argument reduction as [`sin_pi`].
pub fn cos_pi(x: f64) -> f64 {
    let n = x.round();
    let c = (PI * (x - n)).cos();
    if n.rem_euclid(2.0) == 0.0 {
        c
    } else {
        -c
    }
}

/// `Σ_{r=0}^{Q-1} e^{j2π r a / Q}`.
pub fn geometric_sum(a: f64, q: usize) -> Complex64 {
    (0..q)
        .map(|r| Complex64::from_polar(1.0, 2.0 * PI * (r as f64 * a / q as f64)))
        .sum()
}

/// `d/da Σ_{r=0}^{Q-1} e^{j2π r a / Q}`.
pub fn geometric_sum_derivative(a: f64, q: usize) -> Complex64 {
    let qf = q as f64;
    (0..q)
        .map(|r| {
            let w = 2.0 * PI * r as f64 / qf;
            Complex64::new(0.0, w) * Complex64::from_polar(1.0, w * a)
        })
        .sum()
}

/// `(1 - e^{j2πa}) / (1 - e^{j2πa/Q})`, continuous through its removable
/// singularities at `a ∈ QZ` (where it equals `Q`).
pub fn geometric_ratio(a: f64, q: usize) -> Complex64 {
    let qf = q as f64;
    let den = sin_pi(a / qf);
    if 2.0 * den.abs() < RATIO_SINGULARITY_EPS {
        return geometric_sum(a, q);
    }
    // 1 - e^{jθ} = -2j e^{jθ/2} sin(θ/2)
    let magnitude = sin_pi(a) / den;
    Complex64::from_polar(magnitude, PI * (a * (qf - 1.0) / qf))
}

/// Derivative of [`geometric_ratio`] with respect to `a`.
pub fn geometric_ratio_derivative(a: f64, q: usize) -> Complex64 {
    let qf = q as f64;
    let den = sin_pi(a / qf);
    if den.abs() < DERIVATIVE_SUM_EPS {
        return geometric_sum_derivative(a, q);
    }
    let num = sin_pi(a);
    let ratio = num / den;
    let d_ratio = PI * cos_pi(a) / den - (PI / qf) * num * cos_pi(a / qf) / (den * den);
    let phase = Complex64::from_polar(1.0, PI * (a * (qf - 1.0) / qf));
    phase * Complex64::new(d_ratio, PI * (qf - 1.0) / qf * ratio)
}

/// `|sin(Qπx) / sin(πx)|`, period 1, equal to `Q` at the integers.
pub fn dirichlet_mag(x: f64, q: usize) -> f64 {
    let den = sin_pi(x);
    if den.abs() < RATIO_SINGULARITY_EPS / 2.0 {
        return q as f64;
    }
    (sin_pi(q as f64 * x) / den).abs()
}

/// Largest meaningful lobe index `⌈Q/2⌉` for a dimension `Q`.
pub fn max_lobe(q: usize) -> usize {
    q.div_ceil(2)
}

/// Approximation order: the number of kernel lobes kept and the matching
/// number of mask diagonals `2 n_lobe - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LobeThreshold {
    pub n_lobe: usize,
    pub n_diag: usize,
}

impl LobeThreshold {
    pub fn new(n_lobe: usize, q: usize) -> Result<Self> {
        check_lobe(n_lobe, q)?;
        Ok(LobeThreshold {
            n_lobe,
            n_diag: 2 * n_lobe - 1,
        })
    }
}

fn check_lobe(n_lobe: usize, q: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::Domain("mask dimension must be positive".into()));
    }
    if n_lobe == 0 || n_lobe > max_lobe(q) {
        return Err(Error::Domain(format!(
            "n_lobe must lie in [1, {}] for dimension {q}, got {n_lobe}",
            max_lobe(q)
        )));
    }
    Ok(())
}

/// Kernel magnitudes `(|D(x'_+)|, |D(x'_-)|)` of lobe `n_lobe`, where the
/// kernel is `|sin(πx') / sin(πx'/Q)|` and `x'_± = frac + (n_lobe-1)` and
/// `frac - 1 - (n_lobe-1)`. For `n_lobe = 1` this is the main-lobe pair.
pub fn lobe_samples(frac_offset: f64, q: usize, n_lobe: usize) -> Result<(f64, f64)> {
    if q < 2 {
        return Err(Error::Domain(format!(
            "kernel length must be at least 2, got {q}"
        )));
    }
    check_lobe(n_lobe, q)?;
    if !(0.0..1.0).contains(&frac_offset) {
        return Err(Error::Domain(format!(
            "fractional offset must lie in [0, 1), got {frac_offset}"
        )));
    }
    let (plus, minus) = lobe_positions(frac_offset, n_lobe);
    let qf = q as f64;
    Ok((dirichlet_mag(plus / qf, q), dirichlet_mag(minus / qf, q)))
}

/// Sample positions `(x'_+, x'_-)` for lobe `n_lobe`.
pub fn lobe_positions(frac_offset: f64, n_lobe: usize) -> (f64, f64) {
    let off = (n_lobe - 1) as f64;
    (frac_offset + off, frac_offset - 1.0 - off)
}

/// Binary selection mask over a (possibly column-truncated) circulant band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandMask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
    shift_left: usize,
    shift_down: usize,
    diagonals: usize,
}

/// Circulant band mask of size `q x q` keeping `2 n_lobe - 1` diagonals around
/// the main one, rotated left by `shift_left` columns and down by `shift_down`
/// rows (both taken modulo `q`).
pub fn make_mask(q: usize, n_lobe: usize, shift_left: i64, shift_down: i64) -> Result<BandMask> {
    check_lobe(n_lobe, q)?;
    Ok(band(q, n_lobe, shift_left, shift_down, false))
}

fn band(q: usize, n_lobe: usize, shift_left: i64, shift_down: i64, full: bool) -> BandMask {
    let qi = q as i64;
    let sl = shift_left.rem_euclid(qi);
    let sd = shift_down.rem_euclid(qi);
    let half = n_lobe as i64 - 1;
    let mut bits = vec![false; q * q];
    for r in 0..qi {
        for c in 0..qi {
            // base band lives on offsets c - r ∈ [-half, half] (mod q)
            let off = (c + sl - r + sd).rem_euclid(qi);
            let on = full || off <= half || off >= qi - half;
            bits[(r * qi + c) as usize] = on;
        }
    }
    BandMask {
        rows: q,
        cols: q,
        bits,
        shift_left: sl as usize,
        shift_down: sd as usize,
        diagonals: if full { q } else { 2 * n_lobe - 1 },
    }
}

/// Mask used for an operator factor: the `make_mask` band, except that the
/// largest order `⌈q/2⌉` spans a whole kernel period and selects every entry.
/// For even `q` this adds the one antipodal diagonal `2 n_lobe - 1` omits.
fn factor_mask(q: usize, n_lobe: usize, shift_left: i64, shift_down: i64) -> Result<BandMask> {
    check_lobe(n_lobe, q)?;
    Ok(band(
        q,
        n_lobe,
        shift_left,
        shift_down,
        n_lobe == max_lobe(q),
    ))
}

impl BandMask {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shift_left(&self) -> usize {
        self.shift_left
    }

    pub fn shift_down(&self) -> usize {
        self.shift_down
    }

    /// Number of non-zero circulant diagonals before column truncation.
    pub fn diagonals(&self) -> usize {
        self.diagonals
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn row_ones(&self, r: usize) -> usize {
        self.bits[r * self.cols..(r + 1) * self.cols]
            .iter()
            .filter(|b| **b)
            .count()
    }

    /// Keeps only the given column range.
    pub fn columns(&self, range: Range<usize>) -> BandMask {
        let cols = range.len();
        let mut bits = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            bits.extend_from_slice(
                &self.bits[r * self.cols + range.start..r * self.cols + range.end],
            );
        }
        BandMask {
            rows: self.rows,
            cols,
            bits,
            shift_left: self.shift_left,
            shift_down: self.shift_down,
            diagonals: self.diagonals,
        }
    }

    /// `(row, col, bit)` for every position, row-major.
    pub fn iter_bits(&self) -> impl Iterator<Item = (usize, usize, bool)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .map(|(i, b)| (i / self.cols, i % self.cols, *b))
    }
}

/// Masks for one `(τ, f_D)` hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperatorMasks {
    /// Shared by `Y1` and `Y2`, `N x N`.
    pub y: BandMask,
    /// `M x (M - k_τ)`.
    pub x1: BandMask,
    /// `M x k_τ`.
    pub x2: BandMask,
    pub k_tau: usize,
    /// Doppler-side left shift `l_fD = ⌈f_D N T⌉`, signed.
    pub doppler_shift: i64,
    /// Delay-side shift; `k_τ - 1` off tap boundaries, `0` at `τ = 0`.
    pub delay_shift: i64,
}

impl OperatorMasks {
    /// Entries evaluated by a masked factored build:
    /// two Y matrices plus the untruncated `M x M` X band.
    pub fn evaluated_entries(&self) -> usize {
        2 * self.y.count_ones() + self.x1.count_ones() + self.x2.count_ones()
    }
}

/// Builds the Y and X masks for a hypothesis. `n_lobe` is clamped to
/// `⌈N/2⌉` for the Y mask and to `⌈M/2⌉` for the X masks; at the clamp the
/// factor is selected in full.
pub fn masks_for(
    cfg: &SystemConfig,
    tau: f64,
    doppler: f64,
    n_lobe: usize,
) -> Result<OperatorMasks> {
    if n_lobe == 0 {
        return Err(Error::Domain("n_lobe must be at least 1".into()));
    }
    let (m, n) = (cfg.num_subcarriers, cfg.num_slots);
    let k_tau = delay_taps(cfg, tau);
    let doppler_shift = doppler_ceil(cfg, doppler);
    // floor(τ M Δf): k_τ - 1 between taps, and the tap itself
    // when τ sits exactly on one, so the main lobe is always covered.
    let delay_shift = delay_floor(cfg, tau);

    let y = factor_mask(n, n_lobe.min(max_lobe(n)), doppler_shift, 0)?;
    let n_x = n_lobe.min(max_lobe(m));
    let x1 = factor_mask(m, n_x, delay_shift, 0)?.columns(0..m - k_tau);
    let x2 = factor_mask(m, n_x, 0, delay_shift)?.columns(m - k_tau..m);
    Ok(OperatorMasks {
        y,
        x1,
        x2,
        k_tau,
        doppler_shift,
        delay_shift,
    })
}

/// Evaluated-entry count of a masked factored build, `N_diag (2N + M)`, from
/// the mask-row counting rule alone.
pub fn masked_entry_count(m: usize, n: usize, n_lobe: usize) -> usize {
    let rows = |q: usize| {
        let nl = n_lobe.min(max_lobe(q));
        if nl == max_lobe(q) {
            q
        } else {
            2 * nl - 1
        }
    };
    2 * n * rows(n) + m * rows(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio_oracle(a: f64, q: usize) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        (one - Complex64::from_polar(1.0, 2.0 * PI * a))
            / (one - Complex64::from_polar(1.0, 2.0 * PI * a / q as f64))
    }

    #[test]
    fn ratio_matches_sum_everywhere() {
        for q in [2usize, 3, 8, 16, 50, 64] {
            for i in -400..400 {
                let a = i as f64 * 0.173 + 0.01;
                let r = geometric_ratio(a, q);
                let s = geometric_sum(a, q);
                assert!((r - s).norm() < 1e-11 * q as f64, "q={q} a={a}");
            }
        }
    }

    #[test]
    fn ratio_singularities_take_limit() {
        assert_eq!(geometric_ratio(0.0, 8), Complex64::new(8.0, 0.0));
        let r = geometric_ratio(16.0, 8);
        assert!((r - Complex64::new(8.0, 0.0)).norm() < 1e-12);
        // integer, non-multiple of q: exact zero numerator
        assert_eq!(geometric_ratio(3.0, 8).norm(), 0.0);
    }

    #[test]
    fn ratio_derivative_matches_finite_difference() {
        for q in [4usize, 8, 13] {
            for i in -60..60 {
                let a = i as f64 * 0.21 + 0.003;
                let h = 1e-6;
                let fd = (geometric_ratio(a + h, q) - geometric_ratio(a - h, q)) / (2.0 * h);
                let an = geometric_ratio_derivative(a, q);
                assert!((fd - an).norm() < 1e-6 * (1.0 + an.norm()), "q={q} a={a}");
            }
        }
    }

    #[test]
    fn dirichlet_magnitude_values() {
        assert_eq!(dirichlet_mag(0.0, 50), 50.0);
        for m in 1..64 {
            assert!(dirichlet_mag(m as f64 / 64.0, 64) < 1e-12);
        }
        let q = 64;
        let x = 0.5 / q as f64;
        let want = ratio_oracle(0.5, q).norm();
        assert!((dirichlet_mag(x, q) - want).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_periodic() {
        // dyadic sample points keep x + 1 exact
        for i in 0..2048 {
            let x = -2.0 + i as f64 / 512.0 + 1.0 / 4096.0;
            for q in [5usize, 8, 50] {
                assert!((dirichlet_mag(x, q) - dirichlet_mag(x + 1.0, q)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lobe_pair_on_grid() {
        let (p, m) = lobe_samples(0.0, 50, 1).unwrap();
        assert_eq!(p, 50.0);
        assert!(m < 1e-12);
    }

    #[test]
    fn secondary_lobe_samples() {
        let (p, m) = lobe_samples(0.37, 50, 2).unwrap();
        assert!((p - dirichlet_mag(1.37 / 50.0, 50)).abs() < 1e-12);
        assert!((m - dirichlet_mag(-1.63 / 50.0, 50)).abs() < 1e-12);
        assert!(lobe_samples(0.2, 50, 26).is_err());
        assert!(lobe_samples(0.2, 50, 0).is_err());
    }

    #[test]
    fn secondary_lobes_below_main_peak() {
        for q in [8usize, 16, 50, 64] {
            for i in 1..1000 {
                let f = i as f64 / 1000.0;
                let (a, b) = lobe_samples(f, q, 1).unwrap();
                let (c, d) = lobe_samples(f, q, 2).unwrap();
                assert!(c < a.max(b) && d < a.max(b), "q={q} f={f}");
            }
        }
    }

    #[test]
    fn threshold_diagonals() {
        let t = LobeThreshold::new(2, 50).unwrap();
        assert_eq!(t.n_diag, 3);
        assert!(LobeThreshold::new(26, 50).is_err());
        assert!(LobeThreshold::new(4, 7).is_ok());
    }

    #[test]
    fn identity_mask() {
        let mask = make_mask(4, 1, 0, 0).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(mask.get(r, c), r == c);
            }
        }
    }

    #[test]
    fn tridiagonal_circulant() {
        let mask = make_mask(5, 2, 0, 0).unwrap();
        for r in 0..5 {
            assert_eq!(mask.row_ones(r), 3);
            for c in 0..5 {
                let d = (c as i64 - r as i64).rem_euclid(5);
                assert_eq!(mask.get(r, c), d == 0 || d == 1 || d == 4);
            }
        }
        assert_eq!(mask.diagonals(), 3);
    }

    #[test]
    fn left_shift_rotates_columns() {
        let base = make_mask(6, 2, 0, 0).unwrap();
        let shifted = make_mask(6, 2, 1, 0).unwrap();
        for r in 0..6 {
            for c in 0..6 {
                assert_eq!(shifted.get(r, c), base.get(r, (c + 1) % 6));
            }
        }
        // shifts wrap modulo q, negative included
        assert_eq!(make_mask(6, 2, -5, 0).unwrap(), shifted);
        // left and down shifts coincide on circulant masks
        assert_eq!(make_mask(6, 2, 0, 1).unwrap().bits, shifted.bits);
    }

    #[test]
    fn maximal_order() {
        // make_mask keeps 2 n_lobe - 1 diagonals even at the top order
        let mask = make_mask(4, 2, 0, 0).unwrap();
        assert_eq!(mask.count_ones(), 12);
        assert!(make_mask(4, 3, 0, 0).is_err());
        assert_eq!(make_mask(5, 3, 0, 0).unwrap().count_ones(), 25);
        // factor masks cover the whole period there
        for q in [4usize, 5, 8] {
            let mask = factor_mask(q, max_lobe(q), 3, 0).unwrap();
            assert_eq!(mask.count_ones(), q * q);
        }
    }

    #[test]
    fn full_scale_entry_count() {
        assert_eq!(masked_entry_count(64, 50, 2), 492);
    }
}
