mod common;

use std::f64::consts::TAU;

use common::*;
use num_complex::Complex64;
use otfs_isac::grid::{devec_index, vec_index};
use otfs_isac::{isfft, sfft, DdFrame, TfFrame};
use proptest::prelude::*;

/// `X[n,m] = Σ_k Σ_l x[k,l] e^{-j2π(mk/M - nl/N)}` as a literal double sum.
fn sfft_oracle(x: &DdFrame) -> Vec<Complex64> {
    let (m, n) = (x.delay_bins(), x.doppler_bins());
    let mut out = vec![Complex64::new(0.0, 0.0); m * n];
    for slot in 0..n {
        for sc in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..m {
                for l in 0..n {
                    let phase = -TAU * ((sc * k) as f64 / m as f64 - (slot * l) as f64 / n as f64);
                    acc += x.get(k, l) * Complex64::from_polar(1.0, phase);
                }
            }
            out[slot * m + sc] = acc;
        }
    }
    out
}

fn isfft_oracle(y: &TfFrame) -> Vec<Complex64> {
    let (m, n) = (y.subcarriers(), y.slots());
    let mut out = vec![Complex64::new(0.0, 0.0); m * n];
    for k in 0..m {
        for l in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for slot in 0..n {
                for sc in 0..m {
                    let phase = TAU * ((sc * k) as f64 / m as f64 - (slot * l) as f64 / n as f64);
                    acc += y.get(slot, sc) * Complex64::from_polar(1.0, phase);
                }
            }
            out[vec_index(m, k, l)] = acc / (m * n) as f64;
        }
    }
    out
}

#[test]
fn sfft_matches_double_sum() {
    let mut r = rng(3);
    for m in 2..=8 {
        for n in 2..=8 {
            let c = cfg(m, n);
            let x = DdFrame::from_vec(m, n, random_vec(m * n, &mut r)).unwrap();
            let tf = sfft(&c, &x).unwrap();
            assert!(
                max_abs(tf.as_slice(), &sfft_oracle(&x)) < 1e-10,
                "M={m} N={n}"
            );
            let back = isfft(&c, &tf).unwrap();
            assert!(max_abs(back.as_slice(), x.as_slice()) < 1e-10);
            assert!(max_abs(back.as_slice(), &isfft_oracle(&tf)) < 1e-10);
        }
    }
}

#[test]
fn isfft_matches_double_sum() {
    let mut r = rng(4);
    let c = cfg(8, 6);
    let tf = TfFrame::from_vec(6, 8, random_vec(48, &mut r)).unwrap();
    let y = isfft(&c, &tf).unwrap();
    assert!(max_abs(y.as_slice(), &isfft_oracle(&tf)) < 1e-10);
    let again = sfft(&c, &y).unwrap();
    assert!(max_abs(again.as_slice(), tf.as_slice()) < 1e-10);
}

#[test]
fn sfft_energy_scaling() {
    // Parseval: ‖X‖² = NM ‖x‖²
    let c = cfg(8, 4);
    let x = DdFrame::from_vec(8, 4, random_vec(32, &mut rng(8))).unwrap();
    let tf = sfft(&c, &x).unwrap();
    let ex = norm(x.as_slice()).powi(2);
    let et = norm(tf.as_slice()).powi(2);
    assert!((et - 32.0 * ex).abs() < 1e-10 * et);
}

proptest! {
    #[test]
    fn vectorization_roundtrip(m in 1usize..64, n in 1usize..64, seed in any::<u64>()) {
        let i = (seed as usize) % (m * n);
        let (k, l) = devec_index(m, i);
        prop_assert!(k < m && l < n);
        prop_assert_eq!(vec_index(m, k, l), i);
        prop_assert_eq!(i, l * m + k);
    }

    #[test]
    fn sfft_is_linear(seed in any::<u64>(), a_re in -2.0f64..2.0, a_im in -2.0f64..2.0) {
        let c = cfg(4, 4);
        let mut r = rng(seed);
        let x1 = DdFrame::from_vec(4, 4, random_vec(16, &mut r)).unwrap();
        let x2 = DdFrame::from_vec(4, 4, random_vec(16, &mut r)).unwrap();
        let a = Complex64::new(a_re, a_im);
        let mix: Vec<_> = x1.as_slice().iter().zip(x2.as_slice()).map(|(u, v)| a * u + v).collect();
        let lhs = sfft(&c, &DdFrame::from_vec(4, 4, mix).unwrap()).unwrap();
        let t1 = sfft(&c, &x1).unwrap();
        let t2 = sfft(&c, &x2).unwrap();
        let rhs: Vec<_> = t1.as_slice().iter().zip(t2.as_slice()).map(|(u, v)| a * u + v).collect();
        prop_assert!(max_abs(lhs.as_slice(), &rhs) < 1e-10);
    }

    #[test]
    fn frame_accessors_agree_with_layout(m in 1usize..16, n in 1usize..16, seed in any::<u64>()) {
        let data = random_vec(m * n, &mut rng(seed));
        let f = DdFrame::from_vec(m, n, data.clone()).unwrap();
        for l in 0..n {
            for k in 0..m {
                prop_assert_eq!(f.get(k, l), data[l * m + k]);
            }
        }
    }
}
