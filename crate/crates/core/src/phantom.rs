//! Procedural test objects, so experiments need no external image assets.

use crate::simulator::GrayImage;

/// USAF-style chart: nested triplets of vertical and horizontal bars whose
/// width shrinks cell by cell over a 3×3 layout.
pub fn bar_chart(height: usize, width: usize) -> GrayImage {
    let mut px = vec![0u16; height * width];
    let cell_h = height / 3;
    let cell_w = width / 3;
    let base_unit = (cell_h.min(cell_w) as f64 / 12.0).max(1.0);
    for k in 0..9usize {
        let (ci, cj) = (k / 3, k % 3);
        let unit = ((base_unit * 0.78f64.powi(k as i32)).round() as usize).max(1);
        let top = ci * cell_h + (cell_h.saturating_sub(5 * unit)) / 2;
        let left = cj * cell_w + (cell_w.saturating_sub(11 * unit)) / 2;
        for b in 0..3 {
            // vertical bars: width `unit`, height 5·unit
            fill(&mut px, width, height, top, left + 2 * b * unit, 5 * unit, unit);
            // horizontal bars to the right
            fill(
                &mut px,
                width,
                height,
                top + 2 * b * unit,
                left + 6 * unit,
                unit,
                5 * unit,
            );
        }
    }
    GrayImage {
        height,
        width,
        maxval: 255,
        pixels: px,
    }
}

fn fill(px: &mut [u16], width: usize, height: usize, top: usize, left: usize, h: usize, w: usize) {
    for r in top..(top + h).min(height) {
        for c in left..(left + w).min(width) {
            px[r * width + c] = 255;
        }
    }
}

/// Smooth 16-bit phantom: low-frequency sinusoids plus two Gaussian blobs.
pub fn smooth(height: usize, width: usize) -> GrayImage {
    use std::f64::consts::TAU;
    let mut vals = Vec::with_capacity(height * width);
    for r in 0..height {
        let y = r as f64 / height as f64;
        for c in 0..width {
            let x = c as f64 / width as f64;
            let blob = |cy: f64, cx: f64, s: f64| (-((y - cy).powi(2) + (x - cx).powi(2)) / (2.0 * s * s)).exp();
            let v = 0.35 * (TAU * 2.6 * x).sin() * (TAU * 1.8 * y).cos() + 0.6 * blob(0.35, 0.6, 0.06)
                - 0.4 * blob(0.7, 0.3, 0.05);
            vals.push(v);
        }
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pixels = vals
        .iter()
        .map(|v| ((v - lo) / (hi - lo) * 65535.0).round() as u16)
        .collect();
    GrayImage {
        height,
        width,
        maxval: 65535,
        pixels,
    }
}
