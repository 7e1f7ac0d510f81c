//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations are exposed: the overlap-geometry table, an image of the
//! synthesized probe, and a [`Session`] that simulates a small dataset and
//! advances PIE/CPIE a few iterations at a time.

use ptycho_core::geometry::{rho_grid, sweep_geometry};
use ptycho_core::probe::probe_radius_px;
use ptycho_core::recon::Reconstructor;
use ptycho_core::simulator::default_pad_px;
use ptycho_core::{
    build_scan_grid, load_phase_object, pad_symmetric, phantom, simulate_dataset, synthesize_probe, Algorithm,
    Complex64, ComplexField2D, Dataset4D, EvalRegion, NoiseConfig, OverlapRatio, ProbeSpec, ReconConfig,
};
use wasm_bindgen::prelude::*;

const OBJECT_PX: usize = 96;
const DETECTOR_PX: usize = 64;
const PHASE_MAX: f64 = std::f64::consts::FRAC_PI_2;

/// Geometry table for ρ in `[rho_min, rho_max]`, as CSV.
#[wasm_bindgen]
pub fn geometry_csv(rho_min: f64, rho_max: f64, rho_step: f64, probe_diameter_px: usize) -> Result<String, String> {
    if !(rho_step > 0.0) || !(0.0..1.0).contains(&rho_min) || !(0.0..1.0).contains(&rho_max) {
        return Err("need 0 <= rho < 1 and a positive step".into());
    }
    Ok(sweep_geometry(&rho_grid(rho_min, rho_max, rho_step), probe_diameter_px).to_csv())
}

/// RGBA image of the probe on a `size²` grid: amplitude (left) and phase
/// (right), side by side.
#[wasm_bindgen]
pub fn probe_rgba(defocus_um: f64, alpha_mrad: f64, size: usize) -> Result<Vec<u8>, String> {
    let spec = ProbeSpec {
        defocus_m: defocus_um * 1e-6,
        alpha_rad: alpha_mrad * 1e-3,
        grid_h: size,
        grid_w: size,
        ..ProbeSpec::paper_defaults()
    };
    let probe = synthesize_probe(&spec).map_err(|e| e.to_string())?;
    let peak = probe.max_abs().max(f64::MIN_POSITIVE);
    let mut out = vec![0u8; size * 2 * size * 4];
    for r in 0..size {
        for (c, z) in probe.row(r).iter().enumerate() {
            let amp = gray(z.norm() / peak);
            let ph = gray((z.arg() + std::f64::consts::PI) / std::f64::consts::TAU);
            put(&mut out, 2 * size, r, c, amp);
            put(&mut out, 2 * size, r, size + c, ph);
        }
    }
    Ok(out)
}

fn gray(t: f64) -> u8 {
    (t.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn put(buf: &mut [u8], width: usize, r: usize, c: usize, v: u8) {
    let i = 4 * (r * width + c);
    buf[i..i + 4].copy_from_slice(&[v, v, v, 255]);
}

/// A simulated bar-chart dataset and the running reconstruction of it.
#[wasm_bindgen]
pub struct Session {
    dataset: Dataset4D,
    algorithm: Algorithm,
    alpha_o: f64,
    seed: u64,
    estimate: ComplexField2D,
    iteration: usize,
    history: Vec<f64>,
}

#[wasm_bindgen]
impl Session {
    /// `msnr_db` ≤ 0 or NaN means noiseless.
    #[wasm_bindgen(constructor)]
    pub fn new(rho: f64, cpie: bool, alpha_o: f64, msnr_db: f64, seed: u64) -> Result<Session, String> {
        let err = |e: ptycho_core::Error| e.to_string();
        let spec = ProbeSpec {
            defocus_m: 0.25e-6,
            grid_h: DETECTOR_PX,
            grid_w: DETECTOR_PX,
            ..ProbeSpec::paper_defaults()
        };
        let object = load_phase_object(&phantom::bar_chart(OBJECT_PX, OBJECT_PX), 0.0, PHASE_MAX).map_err(err)?;
        let pad = default_pad_px(DETECTOR_PX);
        let grid = build_scan_grid(
            object.dims(),
            (DETECTOR_PX, DETECTOR_PX),
            probe_radius_px(&spec),
            OverlapRatio::new(rho).map_err(err)?,
            pad,
        )
        .map_err(err)?;
        let noise = if msnr_db > 0.0 {
            NoiseConfig::poisson(msnr_db, seed)
        } else {
            NoiseConfig::noiseless(seed)
        };
        let canvas = pad_symmetric(&object, pad).map_err(err)?;
        let dataset = simulate_dataset(&canvas, &spec, &grid, noise).map_err(err)?;
        let (h, w) = grid.canvas_dims();
        let config = ReconConfig {
            alpha_o,
            ..ReconConfig::new(Algorithm::Cpie)
        };
        config.validate().map_err(err)?;
        Ok(Session {
            dataset,
            algorithm: if cpie { Algorithm::Cpie } else { Algorithm::Pie },
            alpha_o,
            seed,
            estimate: ComplexField2D::filled(h, w, Complex64::new(1.0, 0.0)),
            iteration: 0,
            history: Vec::new(),
        })
    }

    /// Runs `n` more iterations and returns the latest NRMSE in dB.
    pub fn step(&mut self, n: usize) -> Result<f64, String> {
        if n == 0 {
            return Ok(self.history.last().copied().unwrap_or(f64::NAN));
        }
        let config = ReconConfig {
            algorithm: self.algorithm,
            n_itr: n,
            alpha_o: self.alpha_o,
            // a fresh stream per batch keeps the visiting order varied
            seed: self.seed.wrapping_add(self.iteration as u64),
            initial_object: ptycho_core::recon::InitialObject::Provided(self.estimate.clone()),
            ..ReconConfig::new(self.algorithm)
        };
        let mut engine = Reconstructor::new(&self.dataset, &self.dataset.probe, config).map_err(|e| e.to_string())?;
        while !engine.is_done() {
            let entry = engine.step().map_err(|e| e.to_string())?;
            self.history.push(entry.nrmse_db.unwrap_or(f64::NAN));
        }
        self.iteration += n;
        self.estimate = engine.finish().object_estimate;
        Ok(*self.history.last().unwrap())
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn positions(&self) -> usize {
        self.dataset.grid.len()
    }

    pub fn step_px(&self) -> usize {
        self.dataset.grid.step_px
    }

    pub fn rho_achieved(&self) -> f64 {
        self.dataset.grid.rho_achieved.value()
    }

    /// NRMSE (dB) after each iteration so far.
    pub fn history(&self) -> Vec<f64> {
        self.history.clone()
    }

    /// Side of the square images returned by the `*_rgba` methods.
    pub fn image_px(&self) -> usize {
        OBJECT_PX
    }

    pub fn truth_rgba(&self) -> Vec<u8> {
        let truth = self
            .dataset
            .object_truth
            .as_ref()
            .expect("simulated datasets carry the truth");
        self.phase_rgba(truth, Complex64::new(1.0, 0.0))
    }

    /// Phase of the estimate over the object region, after removing the
    /// global constant that best maps it onto the truth.
    pub fn estimate_rgba(&self) -> Vec<u8> {
        let truth = self
            .dataset
            .object_truth
            .as_ref()
            .expect("simulated datasets carry the truth");
        let region = EvalRegion::central(&self.dataset.grid);
        let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
        for r in region.top..region.top + region.height {
            let cols = region.left..region.left + region.width;
            for (e, t) in self.estimate.row(r)[cols.clone()].iter().zip(&truth.row(r)[cols]) {
                num += e.conj() * t;
                den += e.norm_sqr();
            }
        }
        let nu = if den > 0.0 { num / den } else { Complex64::new(1.0, 0.0) };
        self.phase_rgba(&self.estimate, nu)
    }
}

impl Session {
    fn phase_rgba(&self, field: &ComplexField2D, nu: Complex64) -> Vec<u8> {
        let region = EvalRegion::central(&self.dataset.grid);
        let mut out = vec![0u8; region.height * region.width * 4];
        for r in 0..region.height {
            let row = &field.row(region.top + r)[region.left..region.left + region.width];
            for (c, z) in row.iter().enumerate() {
                // the display window leaves a margin around [0, π/2]
                let t = ((nu * z).arg() + 0.25) / (PHASE_MAX + 0.5);
                put(&mut out, region.width, r, c, gray(t));
            }
        }
        out
    }
}
