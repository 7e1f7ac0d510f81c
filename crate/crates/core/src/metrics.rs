//! Reconstruction quality up to a global complex constant.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField2D;
use crate::geometry::OverlapRatio;
use crate::simulator::{achieved_overlap_for, ScanGrid};

/// Value returned when the residual ratio underflows 1e-30.
pub const NRMSE_FLOOR_DB: f64 = -300.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalRegion {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl EvalRegion {
    pub fn full(dims: (usize, usize)) -> Self {
        Self {
            top: 0,
            left: 0,
            height: dims.0,
            width: dims.1,
        }
    }

    /// The unpadded object region of a scan canvas.
    pub fn central(grid: &ScanGrid) -> Self {
        Self {
            top: grid.pad_px,
            left: grid.pad_px,
            height: grid.object_h,
            width: grid.object_w,
        }
    }

    fn fits(&self, dims: (usize, usize)) -> bool {
        self.height > 0 && self.width > 0 && self.top + self.height <= dims.0 && self.left + self.width <= dims.1
    }

    fn samples<'a>(&self, f: &'a ComplexField2D) -> impl Iterator<Item = Complex64> + 'a {
        let r = *self;
        (r.top..r.top + r.height).flat_map(move |row| f.row(row)[r.left..r.left + r.width].iter().copied())
    }
}

/// `10·log10(‖o − ν ô‖² / ‖o‖²)` over `region`, with `ν = ⟨ô, o⟩ / ‖ô‖²`.
pub fn nrmse_db(truth: &ComplexField2D, estimate: &ComplexField2D, region: EvalRegion) -> Result<f64> {
    if !region.fits(truth.dims()) || !region.fits(estimate.dims()) {
        return Err(Error::Config(format!(
            "evaluation region {region:?} does not fit truth {:?} and estimate {:?}",
            truth.dims(),
            estimate.dims()
        )));
    }
    let mut cross = Complex64::new(0.0, 0.0);
    let mut est_norm = 0.0;
    let mut truth_norm = 0.0;
    for (o, e) in region.samples(truth).zip(region.samples(estimate)) {
        cross += e.conj() * o;
        est_norm += e.norm_sqr();
        truth_norm += o.norm_sqr();
    }
    if !(est_norm > 0.0) {
        return Err(Error::Degenerate(
            "estimate is zero on the evaluation region; nu undefined".into(),
        ));
    }
    if !(truth_norm > 0.0) {
        return Err(Error::Degenerate("truth is zero on the evaluation region".into()));
    }
    let nu = cross / est_norm;
    let residual: f64 = region
        .samples(truth)
        .zip(region.samples(estimate))
        .map(|(o, e)| (o - nu * e).norm_sqr())
        .sum();
    let ratio = residual / truth_norm;
    if ratio < 1e-30 {
        Ok(NRMSE_FLOOR_DB)
    } else {
        Ok(10.0 * ratio.log10())
    }
}

/// Overlap ratio realised by the grid's quantized step.
pub fn achieved_overlap(grid: &ScanGrid) -> OverlapRatio {
    achieved_overlap_for(grid.step_px, grid.probe_radius_px)
}
