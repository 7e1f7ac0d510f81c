//! Turning command-line choices into simulated datasets.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{Context, Result};
use ptycho_core::probe::probe_radius_px;
use ptycho_core::simulator::default_pad_px;
use ptycho_core::{
    build_scan_grid, io, load_phase_object, pad_symmetric, phantom, simulate_dataset, Dataset4D, GrayImage,
    NoiseConfig, OverlapRatio, ProbeSpec,
};

use crate::preset::{Preset, ALPHA_RAD, FILL_FRACTION, LAMBDA_M};

/// Where the object phase comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ObjectSource {
    Bars,
    Smooth,
    Pgm(PathBuf),
}

impl FromStr for ObjectSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "bars" => ObjectSource::Bars,
            "smooth" => ObjectSource::Smooth,
            path => ObjectSource::Pgm(PathBuf::from(path)),
        })
    }
}

impl std::fmt::Display for ObjectSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObjectSource::Bars => f.write_str("bars"),
            ObjectSource::Smooth => f.write_str("smooth"),
            ObjectSource::Pgm(p) => write!(f, "{}", p.display()),
        }
    }
}

impl ObjectSource {
    /// Built-in phantoms are drawn at `size`; images keep their own size
    /// unless `size` was given explicitly.
    pub fn image(&self, size: usize, explicit: bool) -> Result<GrayImage> {
        match self {
            ObjectSource::Bars => Ok(phantom::bar_chart(size, size)),
            ObjectSource::Smooth => Ok(phantom::smooth(size, size)),
            ObjectSource::Pgm(path) => {
                let img = io::read_pgm(path).with_context(|| format!("reading object image {}", path.display()))?;
                Ok(if explicit { img.resized(size, size) } else { img })
            }
        }
    }
}

/// Everything needed to simulate one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SimParams {
    pub object: ObjectSource,
    pub object_px: usize,
    pub object_px_explicit: bool,
    pub phase_min: f64,
    pub phase_max: f64,
    pub rho: f64,
    pub detector_px: usize,
    pub defocus_m: f64,
    pub alpha_rad: f64,
    pub lambda_m: f64,
    pub fill_fraction: f64,
    pub intensity_i0: f64,
    pub pad_px: Option<usize>,
    pub noise: NoiseConfig,
}

impl SimParams {
    pub fn from_preset(preset: Preset, object: ObjectSource, rho: f64, noise: NoiseConfig) -> Self {
        let v = preset.values();
        Self {
            object,
            object_px: v.object_px,
            object_px_explicit: false,
            phase_min: 0.0,
            phase_max: std::f64::consts::FRAC_PI_2,
            rho,
            detector_px: v.detector_px,
            defocus_m: v.defocus_m,
            alpha_rad: ALPHA_RAD,
            lambda_m: LAMBDA_M,
            fill_fraction: FILL_FRACTION,
            intensity_i0: 1.0,
            pad_px: None,
            noise,
        }
    }

    pub fn probe_spec(&self) -> ProbeSpec {
        ProbeSpec {
            defocus_m: self.defocus_m,
            alpha_rad: self.alpha_rad,
            lambda_m: self.lambda_m,
            intensity_i0: self.intensity_i0,
            grid_h: self.detector_px,
            grid_w: self.detector_px,
            fill_fraction: self.fill_fraction,
        }
    }

    pub fn simulate(&self) -> Result<Dataset4D> {
        let spec = self.probe_spec();
        spec.validate()?;
        let img = self.object.image(self.object_px, self.object_px_explicit)?;
        let object = load_phase_object(&img, self.phase_min, self.phase_max)?;
        let pad = self.pad_px.unwrap_or_else(|| default_pad_px(self.detector_px));
        let canvas = pad_symmetric(&object, pad)?;
        let grid = build_scan_grid(
            object.dims(),
            (self.detector_px, self.detector_px),
            probe_radius_px(&spec),
            OverlapRatio::new(self.rho)?,
            pad,
        )?;
        Ok(simulate_dataset(&canvas, &spec, &grid, self.noise)?)
    }

    /// Stable description of every input that affects a dataset, used to
    /// tell whether a stored sweep cell is still valid.
    pub fn fingerprint(&self) -> String {
        format!(
            "object={};size={}{};phase=[{},{}];det={};df={};alpha={};lambda={};fill={};i0={};pad={:?}",
            self.object,
            self.object_px,
            if self.object_px_explicit { "!" } else { "" },
            self.phase_min,
            self.phase_max,
            self.detector_px,
            self.defocus_m,
            self.alpha_rad,
            self.lambda_m,
            self.fill_fraction,
            self.intensity_i0,
            self.pad_px,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn object_source_parsing() {
        assert_eq!("bars".parse::<ObjectSource>().unwrap(), ObjectSource::Bars);
        assert_eq!("smooth".parse::<ObjectSource>().unwrap(), ObjectSource::Smooth);
        assert_eq!(
            "x/rice.pgm".parse::<ObjectSource>().unwrap(),
            ObjectSource::Pgm(PathBuf::from("x/rice.pgm"))
        );
    }

    #[test]
    fn ci_dataset_has_expected_shape() {
        let p = SimParams::from_preset(Preset::Ci, ObjectSource::Bars, 0.5, NoiseConfig::noiseless(1));
        let ds = p.simulate().unwrap();
        assert_eq!((ds.patterns.height, ds.patterns.width), (64, 64));
        assert_eq!(ds.grid.canvas_dims(), (128 + 2 * 54, 128 + 2 * 54));
        assert_eq!(ds.patterns.count, ds.grid.len());
    }
}
