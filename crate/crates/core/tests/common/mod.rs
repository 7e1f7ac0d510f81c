//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the transform or update code under test.
#![allow(dead_code)]

use num_complex::Complex64;
use ptycho_core::ComplexField2D;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Directly summed centered unitary DFT: zero index at `n/2` on both sides.
/// `sign = -1` forward, `+1` inverse.
pub fn direct_dft(f: &ComplexField2D, sign: f64) -> ComplexField2D {
    let (h, w) = f.dims();
    let (ch, cw) = ((h / 2) as f64, (w / 2) as f64);
    let mut out = ComplexField2D::zeros(h, w);
    for u in 0..h {
        for v in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let ph = sign
                        * std::f64::consts::TAU
                        * ((u as f64 - ch) * (r as f64 - ch) / h as f64 + (v as f64 - cw) * (c as f64 - cw) / w as f64);
                    acc += f[(r, c)] * Complex64::from_polar(1.0, ph);
                }
            }
            out[(u, v)] = acc / ((h * w) as f64).sqrt();
        }
    }
    out
}

pub fn random_field(h: usize, w: usize, seed: u64) -> ComplexField2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexField2D::from_fn(h, w, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_phase_object(h: usize, w: usize, seed: u64) -> ComplexField2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexField2D::from_fn(h, w, |_, _| Complex64::from_polar(1.0, rng.random_range(-3.0..3.0)))
}

pub fn max_abs_diff(a: &ComplexField2D, b: &ComplexField2D) -> f64 {
    assert_eq!(a.dims(), b.dims());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
