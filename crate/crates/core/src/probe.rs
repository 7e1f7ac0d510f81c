//! Defocused probe synthesis.
//!
//! The probe is built in the angular (reciprocal) domain as a hard top-hat
//! aperture of semi-angle α carrying the defocus phase `(π/λ)Δf θ²`, and
//! brought to real space with the centered unitary inverse DFT. The real-space
//! pixel size is chosen so the geometric disk of radius `tan(α)Δf` spans
//! `fill_fraction` of the array.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{idft2_unitary, ComplexField2D};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub defocus_m: f64,
    pub alpha_rad: f64,
    pub lambda_m: f64,
    pub intensity_i0: f64,
    pub grid_h: usize,
    pub grid_w: usize,
    pub fill_fraction: f64,
}

impl ProbeSpec {
    /// 1 µm defocus, 6 mrad semi-angle, 1.96 pm wavelength on a 256² detector.
    pub fn paper_defaults() -> Self {
        Self {
            defocus_m: 1e-6,
            alpha_rad: 6e-3,
            lambda_m: 1.96e-12,
            intensity_i0: 1.0,
            grid_h: 256,
            grid_w: 256,
            fill_fraction: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_sampling()?;
        positive("defocus_m", self.defocus_m)
    }

    fn validate_sampling(&self) -> Result<()> {
        positive("alpha_rad", self.alpha_rad)?;
        positive("lambda_m", self.lambda_m)?;
        positive("intensity_i0", self.intensity_i0)?;
        if self.grid_h == 0 || self.grid_w == 0 {
            return Err(Error::Config("probe grid must be non-empty".into()));
        }
        if !(self.fill_fraction > 0.0 && self.fill_fraction <= 0.5) {
            return Err(Error::Domain {
                name: "fill_fraction",
                value: self.fill_fraction,
                domain: "(0, 0.5]",
            });
        }
        if !(self.defocus_m >= 0.0) {
            return Err(Error::Domain {
                name: "defocus_m",
                value: self.defocus_m,
                domain: "[0, inf)",
            });
        }
        Ok(())
    }

    fn min_dim(&self) -> usize {
        self.grid_h.min(self.grid_w)
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "(0, inf)",
        })
    }
}

/// Geometric radius of the illuminated disk, `tan(α)·Δf`.
pub fn probe_radius_m(spec: &ProbeSpec) -> f64 {
    spec.alpha_rad.tan() * spec.defocus_m
}

/// Real-space pixel size that makes the disk diameter span `fill_fraction`
/// of the smaller array dimension.
pub fn real_space_pixel_m(spec: &ProbeSpec) -> f64 {
    2.0 * probe_radius_m(spec) / (spec.fill_fraction * spec.min_dim() as f64)
}

/// Disk radius in pixels; independent of the physical scale.
pub fn probe_radius_px(spec: &ProbeSpec) -> f64 {
    spec.fill_fraction * spec.min_dim() as f64 / 2.0
}

/// Aperture radius in reciprocal-space pixels for the given real-space pixel.
pub fn aperture_radius_px(spec: &ProbeSpec, pixel_m: f64) -> f64 {
    let dtheta = spec.lambda_m / (spec.min_dim() as f64 * pixel_m);
    spec.alpha_rad / dtheta
}

/// Synthesizes the probe with the sampling from [`real_space_pixel_m`].
pub fn synthesize_probe(spec: &ProbeSpec) -> Result<ComplexField2D> {
    spec.validate()?;
    synthesize_probe_sampled(spec, real_space_pixel_m(spec))
}

/// Synthesizes the probe at an explicit real-space pixel size. Unlike
/// [`synthesize_probe`] this accepts `defocus_m == 0` (in-focus aperture).
pub fn synthesize_probe_sampled(spec: &ProbeSpec, pixel_m: f64) -> Result<ComplexField2D> {
    spec.validate_sampling()?;
    positive("pixel_m", pixel_m)?;
    let (h, w) = (spec.grid_h, spec.grid_w);
    let radius_px = aperture_radius_px(spec, pixel_m);
    if !(radius_px >= 2.0) {
        return Err(Error::UnderResolvedAperture { radius_px });
    }

    // angular sampling per axis follows the DFT: dθ = λ / (N·Δx)
    let dtheta_r = spec.lambda_m / (h as f64 * pixel_m);
    let dtheta_c = spec.lambda_m / (w as f64 * pixel_m);
    let chi = std::f64::consts::PI / spec.lambda_m * spec.defocus_m;
    let alpha2 = spec.alpha_rad * spec.alpha_rad;
    let (ch, cw) = ((h / 2) as f64, (w / 2) as f64);
    let spectrum = ComplexField2D::from_fn(h, w, |r, c| {
        let tr = (r as f64 - ch) * dtheta_r;
        let tc = (c as f64 - cw) * dtheta_c;
        let t2 = tr * tr + tc * tc;
        if t2 <= alpha2 {
            Complex64::from_polar(1.0, chi * t2)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });

    let probe = idft2_unitary(&spectrum);
    let energy = probe.energy();
    if !(energy > 0.0) {
        return Err(Error::Degenerate("probe has zero energy".into()));
    }
    let s = (spec.intensity_i0 / energy).sqrt();
    Ok(probe.scale(Complex64::new(s, 0.0)))
}
