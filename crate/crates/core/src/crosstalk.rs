//! The delay-Doppler cross-talk (channel) operator `Ψ(τ, f_D)`.
//!
//! Three routes produce the same `NM x NM` operator:
//!
//! * [`direct_crosstalk`] evaluates every entry of the closed form literally;
//! * [`factored_crosstalk`] evaluates two `N x N` matrices (`Y1`, `Y2`) and the
//!   column blocks of one `M x M` matrix (`X1`, `X2`) and combines them as
//!   `Ψ = Y1 ⊗ [X1 | 0] + Y2 ⊗ [0 | X2]`;
//! * [`masked_crosstalk`] is the factored route evaluated only on the band
//!   masks from [`crate::dirichlet::masks_for`].
//!
//! Rows are indexed `n = l M + k`, columns `n' = l' M + k'`.

use std::f64::consts::TAU;

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex64;

use crate::dirichlet::{geometric_ratio, geometric_ratio_derivative, masks_for, OperatorMasks};
use crate::error::{Error, Result};
use crate::grid::SystemConfig;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Normalized delays / Doppler shifts closer than this to an integer are
/// treated as lying on it.
pub const TAP_SNAP: f64 = 1e-9;

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < TAP_SNAP {
        r
    } else {
        x
    }
}

/// Normalized delay `τ M Δf` (in delay bins).
pub fn normalized_delay(cfg: &SystemConfig, tau: f64) -> f64 {
    tau * cfg.bandwidth()
}

/// Normalized Doppler `f_D N T` (in Doppler bins).
pub fn normalized_doppler(cfg: &SystemConfig, doppler: f64) -> f64 {
    doppler * cfg.frame_time()
}

/// Number of delay taps `k_τ = ⌈τ M Δf⌉`. A delay exactly on a tap boundary
/// gives that tap.
pub fn delay_taps(cfg: &SystemConfig, tau: f64) -> usize {
    snap(normalized_delay(cfg, tau)).ceil().max(0.0) as usize
}

pub(crate) fn delay_floor(cfg: &SystemConfig, tau: f64) -> i64 {
    snap(normalized_delay(cfg, tau)).floor() as i64
}

pub(crate) fn doppler_ceil(cfg: &SystemConfig, doppler: f64) -> i64 {
    snap(normalized_doppler(cfg, doppler)).ceil() as i64
}

/// Rejects delays outside `[0, (M-1)/(MΔf))` and Doppler shifts outside
/// `(-Δf, Δf)`.
pub fn check_params(cfg: &SystemConfig, tau: f64, doppler: f64) -> Result<()> {
    let max_tau = (cfg.num_subcarriers - 1) as f64 * cfg.delay_bin();
    if !(tau.is_finite() && tau >= 0.0 && tau < max_tau) {
        return Err(Error::Domain(format!(
            "delay {tau:e} s outside [0, {max_tau:e}) s, the unambiguous range (M-1)/(MΔf)"
        )));
    }
    if delay_taps(cfg, tau) > cfg.num_subcarriers - 1 {
        return Err(Error::Domain(format!(
            "delay {tau:e} s rounds onto tap M-1 = {}",
            cfg.num_subcarriers - 1
        )));
    }
    let df = cfg.subcarrier_spacing;
    if !(doppler.is_finite() && doppler.abs() < df) {
        return Err(Error::Domain(format!(
            "Doppler {doppler} Hz outside (-Δf, Δf) = (-{df}, {df}) Hz"
        )));
    }
    Ok(())
}

/// One entry `Ψ_{l,l'}[k,k']` of the closed-form cross-talk matrix.
#[allow(clippy::too_many_arguments)]
pub fn crosstalk_entry(
    cfg: &SystemConfig,
    tau: f64,
    doppler: f64,
    l: usize,
    lp: usize,
    k: usize,
    kp: usize,
) -> Complex64 {
    let (m, n) = (cfg.num_subcarriers, cfg.num_slots);
    let k_tau = delay_taps(cfg, tau);
    let nu = normalized_doppler(cfg, doppler);
    let beta = normalized_delay(cfg, tau);
    let doppler_kernel = geometric_ratio(lp as f64 - l as f64 + nu, n);
    let delay_kernel = geometric_ratio(kp as f64 - k as f64 + beta, m);
    let phase = Complex64::from_polar(1.0, TAU * doppler * kp as f64 * cfg.delay_bin());
    let branch = if kp >= m - k_tau {
        isi_phase(cfg, doppler, lp)
    } else {
        Complex64::new(1.0, 0.0)
    };
    doppler_kernel * delay_kernel * phase * branch / (n * m) as f64
}

/// `e^{-j2π(l'/N + f_D T)}`, the phase carried by inter-symbol columns.
fn isi_phase(cfg: &SystemConfig, doppler: f64, lp: usize) -> Complex64 {
    let arg = lp as f64 / cfg.num_slots as f64 + doppler * cfg.symbol_time();
    Complex64::from_polar(1.0, -TAU * arg)
}

/// Dense `NM x NM` cross-talk matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCrossTalk {
    pub entries: Array2<Complex64>,
    pub tau: f64,
    pub doppler: f64,
}

impl DenseCrossTalk {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `Ψ x`.
    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("DenseCrossTalk::matvec", self.dim(), x.len())?;
        Ok(self
            .entries
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `Ψᴴ y`.
    pub fn adjoint_matvec(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("DenseCrossTalk::adjoint_matvec", self.dim(), y.len())?;
        Ok(self
            .entries
            .columns()
            .into_iter()
            .map(|col| col.iter().zip(y).map(|(a, b)| a.conj() * b).sum())
            .collect())
    }

    /// Largest elementwise modulus difference to another operator.
    pub fn max_abs_diff(&self, other: &DenseCrossTalk) -> f64 {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::shape(context, expected, found));
    }
    Ok(())
}

/// Evaluates every entry of the closed form.
pub fn direct_crosstalk(cfg: &SystemConfig, tau: f64, doppler: f64) -> Result<DenseCrossTalk> {
    check_params(cfg, tau, doppler)?;
    let (m, n) = (cfg.num_subcarriers, cfg.num_slots);
    let entries = Array2::from_shape_fn((n * m, n * m), |(row, col)| {
        let (k, l) = (row % m, row / m);
        let (kp, lp) = (col % m, col / m);
        crosstalk_entry(cfg, tau, doppler, l, lp, k, kp)
    });
    Ok(DenseCrossTalk {
        entries,
        tau,
        doppler,
    })
}

/// `Ψ` held as its four factor matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredCrossTalk {
    /// `N x N`, inter-carrier branch Doppler factor.
    pub y1: Array2<Complex64>,
    /// `N x N`, `Y1` times the inter-symbol phase of column `l'`.
    pub y2: Array2<Complex64>,
    /// `M x (M - k_τ)`, delay factor over columns `0..M-k_τ`.
    pub x1: Array2<Complex64>,
    /// `M x k_τ`, delay factor over columns `M-k_τ..M`.
    pub x2: Array2<Complex64>,
    pub k_tau: usize,
    pub tau: f64,
    pub doppler: f64,
    /// Complex entries evaluated while building the factors.
    pub ops_evaluated: u64,
}

/// One Kronecker term `Y ⊗ [0 | X | 0]`, where `X` occupies the columns
/// starting at `col_offset` of an `M`-wide block.
#[derive(Clone, Copy)]
struct KronTerm<'a> {
    y: &'a Array2<Complex64>,
    x: &'a Array2<Complex64>,
    col_offset: usize,
}

/// `(Y ⊗ B) vec(V) = vec(B V Yᵀ)`; with `Vt = Vᵀ` (`N x M`, row-major equal to
/// the vectorized frame) the result transposes to `Y Vt Bᵀ`.
fn kron_apply(terms: &[KronTerm<'_>], m: usize, n: usize, x: &[Complex64]) -> Vec<Complex64> {
    let vt = ArrayView2::from_shape((n, m), x).expect("length checked by caller");
    let mut out = Array2::<Complex64>::zeros((n, m));
    for t in terms {
        let w = t.x.ncols();
        if w == 0 {
            continue;
        }
        let inner = vt
            .slice(s![.., t.col_offset..t.col_offset + w])
            .dot(&t.x.t());
        out += &t.y.dot(&inner);
    }
    out.into_raw_vec_and_offset().0
}

/// Adjoint of [`kron_apply`]: `Σ Yᴴ Ut conj(B)`.
fn kron_adjoint(terms: &[KronTerm<'_>], m: usize, n: usize, y: &[Complex64]) -> Vec<Complex64> {
    let ut = ArrayView2::from_shape((n, m), y).expect("length checked by caller");
    let mut out = Array2::<Complex64>::zeros((n, m));
    for t in terms {
        let w = t.x.ncols();
        if w == 0 {
            continue;
        }
        let inner = ut.dot(&t.x.mapv(|v| v.conj()));
        let yh = t.y.t().mapv(|v| v.conj());
        let mut block = out.slice_mut(s![.., t.col_offset..t.col_offset + w]);
        block += &yh.dot(&inner);
    }
    out.into_raw_vec_and_offset().0
}

fn kron_dense(terms: &[KronTerm<'_>], m: usize, n: usize) -> Array2<Complex64> {
    let mut out = Array2::<Complex64>::zeros((n * m, n * m));
    for t in terms {
        for ((l, lp), yv) in t.y.indexed_iter() {
            if *yv == ZERO {
                continue;
            }
            for ((k, j), xv) in t.x.indexed_iter() {
                out[[l * m + k, lp * m + t.col_offset + j]] += yv * xv;
            }
        }
    }
    out
}

impl FactoredCrossTalk {
    pub fn delay_bins(&self) -> usize {
        self.x1.nrows()
    }

    pub fn doppler_bins(&self) -> usize {
        self.y1.nrows()
    }

    /// Length `NM` of the vectors the operator acts on.
    pub fn dim(&self) -> usize {
        self.delay_bins() * self.doppler_bins()
    }

    fn terms(&self) -> [KronTerm<'_>; 2] {
        [
            KronTerm {
                y: &self.y1,
                x: &self.x1,
                col_offset: 0,
            },
            KronTerm {
                y: &self.y2,
                x: &self.x2,
                col_offset: self.delay_bins() - self.k_tau,
            },
        ]
    }

    /// `Ψ = Y1 ⊗ [X1 | 0] + Y2 ⊗ [0 | X2]` as a dense matrix.
    pub fn compose(&self) -> DenseCrossTalk {
        DenseCrossTalk {
            entries: kron_dense(&self.terms(), self.delay_bins(), self.doppler_bins()),
            tau: self.tau,
            doppler: self.doppler,
        }
    }

    /// `Ψ x` without forming `Ψ`.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("FactoredCrossTalk::apply", self.dim(), x.len())?;
        Ok(kron_apply(
            &self.terms(),
            self.delay_bins(),
            self.doppler_bins(),
            x,
        ))
    }

    /// `Ψᴴ y` without forming `Ψ`.
    pub fn apply_adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("FactoredCrossTalk::apply_adjoint", self.dim(), y.len())?;
        Ok(kron_adjoint(
            &self.terms(),
            self.delay_bins(),
            self.doppler_bins(),
            y,
        ))
    }
}

/// Free-function form of [`FactoredCrossTalk::compose`].
pub fn compose(f: &FactoredCrossTalk) -> DenseCrossTalk {
    f.compose()
}

/// Builds `Y1`, `Y2`, `X1`, `X2` in full.
pub fn factored_crosstalk(cfg: &SystemConfig, tau: f64, doppler: f64) -> Result<FactoredCrossTalk> {
    check_params(cfg, tau, doppler)?;
    Ok(build_factors(cfg, tau, doppler, None))
}

/// Builds the factors only where the `n_lobe` band masks select an entry;
/// every other entry is zero and is never evaluated.
pub fn masked_crosstalk(
    cfg: &SystemConfig,
    tau: f64,
    doppler: f64,
    n_lobe: usize,
) -> Result<FactoredCrossTalk> {
    check_params(cfg, tau, doppler)?;
    let masks = masks_for(cfg, tau, doppler, n_lobe)?;
    Ok(build_factors(cfg, tau, doppler, Some(&masks)))
}

/// Kernel arguments shared by the factor builders.
struct FactorGeometry {
    m: usize,
    n: usize,
    k_tau: usize,
    nu: f64,
    beta: f64,
    scale: f64,
}

impl FactorGeometry {
    fn new(cfg: &SystemConfig, tau: f64, doppler: f64) -> Self {
        let (m, n) = (cfg.num_subcarriers, cfg.num_slots);
        FactorGeometry {
            m,
            n,
            k_tau: delay_taps(cfg, tau),
            nu: normalized_doppler(cfg, doppler),
            beta: normalized_delay(cfg, tau),
            scale: 1.0 / (n * m) as f64,
        }
    }

    fn doppler_arg(&self, l: usize, lp: usize) -> f64 {
        lp as f64 - l as f64 + self.nu
    }

    fn delay_arg(&self, k: usize, kp: usize) -> f64 {
        kp as f64 - k as f64 + self.beta
    }
}

fn build_factors(
    cfg: &SystemConfig,
    tau: f64,
    doppler: f64,
    masks: Option<&OperatorMasks>,
) -> FactoredCrossTalk {
    let g = FactorGeometry::new(cfg, tau, doppler);
    let (m, n, k_tau) = (g.m, g.n, g.k_tau);
    let split = m - k_tau;
    let mut ops = 0u64;

    let mut y1 = Array2::<Complex64>::zeros((n, n));
    let mut y2 = Array2::<Complex64>::zeros((n, n));
    let isi: Vec<Complex64> = (0..n).map(|lp| isi_phase(cfg, doppler, lp)).collect();
    for l in 0..n {
        for lp in 0..n {
            if masks.is_some_and(|mk| !mk.y.get(l, lp)) {
                continue;
            }
            let v = geometric_ratio(g.doppler_arg(l, lp), n) * g.scale;
            y1[[l, lp]] = v;
            y2[[l, lp]] = v * isi[lp];
            ops += 2;
        }
    }

    let step = TAU * doppler * cfg.delay_bin();
    let delay_factor = |k: usize, kp: usize| {
        Complex64::from_polar(1.0, step * kp as f64) * geometric_ratio(g.delay_arg(k, kp), m)
    };
    let mut x1 = Array2::<Complex64>::zeros((m, split));
    let mut x2 = Array2::<Complex64>::zeros((m, k_tau));
    for k in 0..m {
        for c in 0..split {
            if masks.is_some_and(|mk| !mk.x1.get(k, c)) {
                continue;
            }
            x1[[k, c]] = delay_factor(k, c);
            ops += 1;
        }
        // X2 columns sit at global delay index split + j
        for j in 0..k_tau {
            if masks.is_some_and(|mk| !mk.x2.get(k, j)) {
                continue;
            }
            x2[[k, j]] = delay_factor(k, split + j);
            ops += 1;
        }
    }

    FactoredCrossTalk {
        y1,
        y2,
        x1,
        x2,
        k_tau,
        tau,
        doppler,
        ops_evaluated: ops,
    }
}

/// Analytic derivatives of `Ψ` with respect to `τ` and `f_D`, in factored form.
///
/// `k_τ` (and with it the inter-carrier / inter-symbol column split) is held
/// fixed, so these are the derivatives of the smooth piece the point lies on.
#[derive(Debug, Clone)]
pub struct CrossTalkPartials {
    pub operator: FactoredCrossTalk,
    /// `∂Y1/∂f_D`.
    pub dy1: Array2<Complex64>,
    /// `∂Y2/∂f_D`.
    pub dy2: Array2<Complex64>,
    pub dx1_dtau: Array2<Complex64>,
    pub dx2_dtau: Array2<Complex64>,
    pub dx1_ddoppler: Array2<Complex64>,
    pub dx2_ddoppler: Array2<Complex64>,
}

impl CrossTalkPartials {
    fn split(&self) -> usize {
        self.operator.delay_bins() - self.operator.k_tau
    }

    fn tau_terms(&self) -> [KronTerm<'_>; 2] {
        let op = &self.operator;
        [
            KronTerm {
                y: &op.y1,
                x: &self.dx1_dtau,
                col_offset: 0,
            },
            KronTerm {
                y: &op.y2,
                x: &self.dx2_dtau,
                col_offset: self.split(),
            },
        ]
    }

    fn doppler_terms(&self) -> [KronTerm<'_>; 4] {
        let op = &self.operator;
        [
            KronTerm {
                y: &self.dy1,
                x: &op.x1,
                col_offset: 0,
            },
            KronTerm {
                y: &op.y1,
                x: &self.dx1_ddoppler,
                col_offset: 0,
            },
            KronTerm {
                y: &self.dy2,
                x: &op.x2,
                col_offset: self.split(),
            },
            KronTerm {
                y: &op.y2,
                x: &self.dx2_ddoppler,
                col_offset: self.split(),
            },
        ]
    }

    /// `(∂Ψ/∂τ) x`.
    pub fn apply_dtau(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let op = &self.operator;
        check_len("CrossTalkPartials::apply_dtau", op.dim(), x.len())?;
        Ok(kron_apply(
            &self.tau_terms(),
            op.delay_bins(),
            op.doppler_bins(),
            x,
        ))
    }

    /// `(∂Ψ/∂f_D) x`.
    pub fn apply_ddoppler(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let op = &self.operator;
        check_len("CrossTalkPartials::apply_ddoppler", op.dim(), x.len())?;
        Ok(kron_apply(
            &self.doppler_terms(),
            op.delay_bins(),
            op.doppler_bins(),
            x,
        ))
    }

    pub fn dense_dtau(&self) -> Array2<Complex64> {
        let op = &self.operator;
        kron_dense(&self.tau_terms(), op.delay_bins(), op.doppler_bins())
    }

    pub fn dense_ddoppler(&self) -> Array2<Complex64> {
        let op = &self.operator;
        kron_dense(&self.doppler_terms(), op.delay_bins(), op.doppler_bins())
    }
}

/// Operator and its partial derivatives at `(τ, f_D)`.
pub fn partials(cfg: &SystemConfig, tau: f64, doppler: f64) -> Result<CrossTalkPartials> {
    let operator = factored_crosstalk(cfg, tau, doppler)?;
    let g = FactorGeometry::new(cfg, tau, doppler);
    let (m, n, k_tau) = (g.m, g.n, g.k_tau);
    let split = m - k_tau;
    let t = cfg.symbol_time();
    let dnu_df = cfg.frame_time();
    let dbeta_dtau = cfg.bandwidth();

    let dy1 = Array2::from_shape_fn((n, n), |(l, lp)| {
        geometric_ratio_derivative(g.doppler_arg(l, lp), n) * (g.scale * dnu_df)
    });
    // Y2 = Y1 e^{-j2π(l'/N + f_D T)}
    let dy2 = Array2::from_shape_fn((n, n), |(l, lp)| {
        let phase = isi_phase(cfg, doppler, lp);
        (dy1[[l, lp]] + operator.y1[[l, lp]] * Complex64::new(0.0, -TAU * t)) * phase
    });

    let step = TAU * doppler * cfg.delay_bin();
    let dtau = |k: usize, kp: usize| {
        Complex64::from_polar(1.0, step * kp as f64)
            * geometric_ratio_derivative(g.delay_arg(k, kp), m)
            * dbeta_dtau
    };
    // ∂/∂f_D e^{j2π f_D k'/(MΔf)} = j2π k'/(MΔf) e^{...}
    let ddop = |kp: usize, value: Complex64| {
        value * Complex64::new(0.0, TAU * kp as f64 * cfg.delay_bin())
    };
    let dx1_dtau = Array2::from_shape_fn((m, split), |(k, c)| dtau(k, c));
    let dx2_dtau = Array2::from_shape_fn((m, k_tau), |(k, j)| dtau(k, split + j));
    let dx1_ddoppler = Array2::from_shape_fn((m, split), |(k, c)| ddop(c, operator.x1[[k, c]]));
    let dx2_ddoppler =
        Array2::from_shape_fn((m, k_tau), |(k, j)| ddop(split + j, operator.x2[[k, j]]));

    Ok(CrossTalkPartials {
        operator,
        dy1,
        dy2,
        dx1_dtau,
        dx2_dtau,
        dx1_ddoppler,
        dx2_ddoppler,
    })
}
