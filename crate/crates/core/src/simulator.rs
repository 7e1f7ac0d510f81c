//! 4D-STEM acquisition: phase objects, raster scan grids, the far-field
//! forward model and Poisson noise at a calibrated mean SNR.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_window, ComplexField2D, Dft2, WindowOffset};
use crate::geometry::{inverse_overlap_approx, overlap_ratio, OverlapRatio, StepRatio};
use crate::probe::{real_space_pixel_m, synthesize_probe, ProbeSpec};

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// Largest Poisson mean accepted before reporting an intensity error.
pub const MAX_POISSON_MEAN: f64 = 1e12;

/// 8- or 16-bit grayscale raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, maxval: u16, pixels: Vec<u16>) -> Result<Self> {
        if height == 0 || width == 0 || pixels.len() != height * width {
            return Err(Error::Config(format!(
                "image of {height}x{width} needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            maxval,
            pixels,
        })
    }

    /// Nearest-neighbour resample to `height × width`.
    pub fn resized(&self, height: usize, width: usize) -> Self {
        let pixels = (0..height)
            .flat_map(|r| {
                let sr = (r * self.height) / height;
                (0..width).map(move |c| (sr, (c * self.width) / width))
            })
            .map(|(sr, sc)| self.pixels[sr * self.width + sc])
            .collect();
        Self {
            height,
            width,
            maxval: self.maxval,
            pixels,
        }
    }
}

/// Unit-amplitude object whose phase maps the image range `[min, max]`
/// linearly onto `[phase_min, phase_max]`.
///
/// A constant image has no range to map; every sample then gets `phase_min`
/// and a warning is logged.
pub fn load_phase_object(image: &GrayImage, phase_min: f64, phase_max: f64) -> Result<ComplexField2D> {
    if !(phase_min < phase_max) {
        return Err(Error::Config(format!(
            "phase range [{phase_min}, {phase_max}] is empty"
        )));
    }
    let lo = *image.pixels.iter().min().expect("non-empty image") as f64;
    let hi = *image.pixels.iter().max().expect("non-empty image") as f64;
    let span = hi - lo;
    if span == 0.0 {
        log::warn!("constant image (value {lo}); object phase set to {phase_min}");
    }
    let data = image
        .pixels
        .iter()
        .map(|&v| {
            let t = if span > 0.0 { (v as f64 - lo) / span } else { 0.0 };
            Complex64::from_polar(1.0, phase_min + t * (phase_max - phase_min))
        })
        .collect();
    ComplexField2D::from_vec(image.height, image.width, data)
}

/// Half-sample symmetric (edge-repeating mirror) padding on all sides.
pub fn pad_symmetric(object: &ComplexField2D, pad_px: usize) -> Result<ComplexField2D> {
    let (h, w) = object.dims();
    if pad_px > h.min(w) {
        return Err(Error::Config(format!(
            "symmetric padding of {pad_px} px exceeds the {h}x{w} object"
        )));
    }
    let reflect = |i: usize, n: usize| -> usize {
        // i indexes the padded axis; position relative to the original is i - pad
        let p = i as i64 - pad_px as i64;
        let n = n as i64;
        let q = if p < 0 {
            -p - 1
        } else if p >= n {
            2 * n - 1 - p
        } else {
            p
        };
        q as usize
    };
    Ok(ComplexField2D::from_fn(h + 2 * pad_px, w + 2 * pad_px, |r, c| {
        object[(reflect(r, h), reflect(c, w))]
    }))
}

/// Default padding: 85% of the detector width.
pub fn default_pad_px(detector_w: usize) -> usize {
    (0.85 * detector_w as f64).round() as usize
}

/// Regular raster of detector-sized windows over the padded canvas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub step_px: usize,
    pub rows: usize,
    pub cols: usize,
    #[serde(skip)]
    pub offsets: Vec<WindowOffset>,
    pub probe_radius_px: f64,
    pub rho_requested: OverlapRatio,
    pub rho_achieved: OverlapRatio,
    pub object_h: usize,
    pub object_w: usize,
    pub pad_px: usize,
    pub detector_h: usize,
    pub detector_w: usize,
}

impl ScanGrid {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn canvas_dims(&self) -> (usize, usize) {
        (self.object_h + 2 * self.pad_px, self.object_w + 2 * self.pad_px)
    }

    /// Checks the regular-raster and in-canvas invariants.
    pub fn validate(&self) -> Result<()> {
        if self.offsets.len() != self.rows * self.cols {
            return Err(Error::Config(format!(
                "grid has {} offsets, expected {}x{}",
                self.offsets.len(),
                self.rows,
                self.cols
            )));
        }
        let canvas = self.canvas_dims();
        for &o in &self.offsets {
            check_window(canvas, o, self.detector_h, self.detector_w)?;
        }
        Ok(())
    }
}

/// Overlap ratio realised by a quantized step.
pub fn achieved_overlap_for(step_px: usize, probe_radius_px: f64) -> OverlapRatio {
    let gamma = (step_px as f64 / (2.0 * probe_radius_px)).clamp(0.0, 1.0);
    overlap_ratio(StepRatio::new(gamma).expect("clamped"))
}

/// Raster whose probe centres span the central (unpadded) object region,
/// centred on the canvas, with step `round(2r·γ)` and `γ` from the
/// approximate inverse.
pub fn build_scan_grid(
    object_dims: (usize, usize),
    detector_dims: (usize, usize),
    probe_radius_px: f64,
    rho: OverlapRatio,
    pad_px: usize,
) -> Result<ScanGrid> {
    if !(probe_radius_px >= 4.0) {
        return Err(Error::Config(format!(
            "probe radius must be >= 4 px, got {probe_radius_px}"
        )));
    }
    if rho.value() >= 1.0 {
        return Err(Error::Domain {
            name: "rho",
            value: rho.value(),
            domain: "[0, 1)",
        });
    }
    let (oh, ow) = object_dims;
    let (dh, dw) = detector_dims;
    let (ch, cw) = (oh + 2 * pad_px, ow + 2 * pad_px);
    if dh > ch || dw > cw {
        return Err(Error::Config(format!(
            "{dh}x{dw} detector window does not fit the {ch}x{cw} padded canvas"
        )));
    }
    let gamma = inverse_overlap_approx(rho).value();
    let step = ((2.0 * probe_radius_px * gamma).round() as usize).max(1);

    let axis = |obj: usize, det: usize, canvas: usize| -> Result<(usize, usize)> {
        let n = if obj <= 1 { 1 } else { (obj - 1).div_ceil(step) + 1 };
        let span = (n - 1) * step;
        let first_centre = pad_px as i64 + (obj as i64 - 1 - span as i64).div_euclid(2);
        let first = first_centre - (det / 2) as i64;
        if first < 0 || first as usize + span + det > canvas {
            return Err(Error::Config(format!(
                "padding of {pad_px} px is too small for a {n}-position raster with step {step} px"
            )));
        }
        Ok((n, first as usize))
    };
    let (rows, row0) = axis(oh, dh, ch)?;
    let (cols, col0) = axis(ow, dw, cw)?;

    let offsets = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| WindowOffset::new(row0 + i * step, col0 + j * step)))
        .collect();
    Ok(ScanGrid {
        step_px: step,
        rows,
        cols,
        offsets,
        probe_radius_px,
        rho_requested: rho,
        rho_achieved: achieved_overlap_for(step, probe_radius_px),
        object_h: oh,
        object_w: ow,
        pad_px,
        detector_h: dh,
        detector_w: dw,
    })
}

/// Stack of `count` row-major `height × width` diffraction patterns.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternStack {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl PatternStack {
    pub fn from_patterns(height: usize, width: usize, patterns: Vec<Vec<f64>>) -> Result<Self> {
        let count = patterns.len();
        let mut data = Vec::with_capacity(count * height * width);
        for p in patterns {
            if p.len() != height * width {
                return Err(Error::Config(format!(
                    "pattern has {} samples, expected {height}x{width}",
                    p.len()
                )));
            }
            data.extend(p);
        }
        Ok(Self {
            count,
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn pattern(&self, l: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[l * n..(l + 1) * n]
    }

    pub fn patterns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact((self.height * self.width).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.count * self.height * self.width {
            return Err(Error::Config("pattern stack length mismatch".into()));
        }
        if let Some(i) = self.data.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!(
                "pattern {} has a negative or non-finite sample",
                i / (self.height * self.width)
            )));
        }
        Ok(())
    }
}

/// Reusable forward model state for one detector size.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    dft: Dft2,
    buf: Vec<Complex64>,
}

impl ForwardModel {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            dft: Dft2::new(height, width),
            buf: vec![Complex64::new(0.0, 0.0); height * width],
        }
    }

    /// `|F(p ⊙ Π o)|²` written into `out`.
    pub fn pattern_into(
        &mut self,
        object: &ComplexField2D,
        probe: &ComplexField2D,
        offset: WindowOffset,
        out: &mut [f64],
    ) -> Result<()> {
        let (h, w) = probe.dims();
        if self.dft.dims() != (h, w) || out.len() != h * w {
            return Err(Error::Config(format!(
                "probe {h}x{w} does not match detector {:?}",
                self.dft.dims()
            )));
        }
        check_window(object.dims(), offset, h, w)?;
        for r in 0..h {
            let orow = &object.row(offset.row + r)[offset.col..offset.col + w];
            let prow = probe.row(r);
            for c in 0..w {
                self.buf[r * w + c] = prow[c] * orow[c];
            }
        }
        self.dft.forward(&mut self.buf);
        for (o, z) in out.iter_mut().zip(&self.buf) {
            *o = z.norm_sqr();
        }
        Ok(())
    }
}

/// Noiseless diffraction intensity `|F(p ⊙ Π o)|²` at one probe position.
pub fn forward_pattern(object: &ComplexField2D, probe: &ComplexField2D, offset: WindowOffset) -> Result<Vec<f64>> {
    let (h, w) = probe.dims();
    let mut out = vec![0.0; h * w];
    ForwardModel::new(h, w).pattern_into(object, probe, offset, &mut out)?;
    Ok(out)
}

/// Expected power SNR in dB of a Poisson draw with mean `pattern`:
/// `10·log10(Σy² / Σy)`.
pub fn expected_poisson_snr_db(pattern: &[f64]) -> Result<f64> {
    let s1: f64 = pattern.iter().sum();
    if !(s1 > 0.0) {
        return Err(Error::Degenerate("pattern sums to zero".into()));
    }
    let s2: f64 = pattern.iter().map(|y| y * y).sum();
    Ok(10.0 * (s2 / s1).log10())
}

/// Realised power SNR in dB of a noisy draw against its mean.
pub fn empirical_snr_db(mean: &[f64], noisy: &[f64]) -> Result<f64> {
    let signal: f64 = mean.iter().map(|y| y * y).sum();
    let noise: f64 = mean.iter().zip(noisy).map(|(m, n)| (n - m) * (n - m)).sum();
    if !(noise > 0.0) {
        return Err(Error::Degenerate("noise power is zero".into()));
    }
    Ok(10.0 * (signal / noise).log10())
}

/// Mean over patterns of [`expected_poisson_snr_db`].
pub fn mean_expected_snr_db(stack: &PatternStack) -> Result<f64> {
    if stack.count == 0 {
        return Err(Error::Degenerate("empty pattern stack".into()));
    }
    let mut acc = 0.0;
    for p in stack.patterns() {
        acc += expected_poisson_snr_db(p)?;
    }
    Ok(acc / stack.count as f64)
}

/// Global intensity scale bringing the mean expected SNR to `target_msnr_db`.
pub fn calibrate_intensity(noiseless: &PatternStack, target_msnr_db: f64) -> Result<f64> {
    if !target_msnr_db.is_finite() {
        return Err(Error::Config("target mSNR must be finite".into()));
    }
    let current = mean_expected_snr_db(noiseless)?;
    Ok(10f64.powf((target_msnr_db - current) / 10.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Noiseless,
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub target_msnr_db: Option<f64>,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            kind: NoiseKind::Noiseless,
            target_msnr_db: None,
            seed,
        }
    }

    pub fn poisson(target_msnr_db: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Poisson,
            target_msnr_db: Some(target_msnr_db),
            seed,
        }
    }
}

/// Probe parameters as echoed into dataset metadata.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeEcho {
    pub defocus_m: f64,
    pub alpha_rad: f64,
    pub lambda_m: f64,
    pub intensity_i0: f64,
    pub grid_h: usize,
    pub grid_w: usize,
    pub fill_fraction: f64,
    pub pixel_m: f64,
}

impl From<&ProbeSpec> for ProbeEcho {
    fn from(s: &ProbeSpec) -> Self {
        Self {
            defocus_m: s.defocus_m,
            alpha_rad: s.alpha_rad,
            lambda_m: s.lambda_m,
            intensity_i0: s.intensity_i0,
            grid_h: s.grid_h,
            grid_w: s.grid_w,
            fill_fraction: s.fill_fraction,
            pixel_m: real_space_pixel_m(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub probe: ProbeEcho,
    pub noise: NoiseConfig,
    pub snr_definition: String,
    pub msnr_target_db: Option<f64>,
    /// Analytic mean SNR of the scaled noiseless means.
    pub msnr_achieved_db: Option<f64>,
    /// Mean SNR measured on the drawn counts.
    pub msnr_empirical_db: Option<f64>,
    /// Global factor applied to the noiseless intensities (1 when noiseless).
    pub intensity_scale: f64,
    pub grid: ScanGrid,
    pub generator: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset4D {
    pub patterns: PatternStack,
    pub grid: ScanGrid,
    /// Probe consistent with the stored intensities (scaled with the data).
    pub probe: ComplexField2D,
    pub object_truth: Option<ComplexField2D>,
    pub meta: DatasetMeta,
}

impl Dataset4D {
    pub fn validate(&self) -> Result<()> {
        self.patterns.validate()?;
        self.grid.validate()?;
        if self.patterns.count != self.grid.len() {
            return Err(Error::Config(format!(
                "{} patterns for {} positions",
                self.patterns.count,
                self.grid.len()
            )));
        }
        if self.probe.dims() != (self.patterns.height, self.patterns.width) {
            return Err(Error::Config("probe and pattern dimensions differ".into()));
        }
        if let Some(t) = &self.object_truth {
            if t.dims() != self.grid.canvas_dims() {
                return Err(Error::Config("object truth does not match the canvas".into()));
            }
        }
        Ok(())
    }
}

/// Noiseless patterns for every grid position, in raster order.
pub fn noiseless_stack(
    object: &ComplexField2D,
    probe: &ComplexField2D,
    offsets: &[WindowOffset],
) -> Result<PatternStack> {
    let (h, w) = probe.dims();
    let n = h * w;
    let mut data = vec![0.0; offsets.len() * n];
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(n.max(1))
            .zip(offsets.par_iter())
            .try_for_each_init(
                || ForwardModel::new(h, w),
                |model, (out, &o)| model.pattern_into(object, probe, o, out),
            )?;
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut model = ForwardModel::new(h, w);
        for (out, &o) in data.chunks_mut(n.max(1)).zip(offsets) {
            model.pattern_into(object, probe, o, out)?;
        }
    }
    Ok(PatternStack {
        count: offsets.len(),
        height: h,
        width: w,
        data,
    })
}

/// Poisson draw of one pattern from its own substream of `seed`.
pub fn poisson_draw(mean: &[f64], seed: u64, stream: u64, out: &mut [f64]) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    for (o, &m) in out.iter_mut().zip(mean) {
        *o = if m > 0.0 {
            if m > MAX_POISSON_MEAN {
                return Err(Error::Intensity(m));
            }
            Poisson::new(m)
                .map_err(|e| Error::Config(format!("Poisson mean {m}: {e}")))?
                .sample(&mut rng)
        } else {
            0.0
        };
    }
    Ok(())
}

/// Simulates the full acquisition over `grid` for a padded `object` canvas.
pub fn simulate_dataset(
    object: &ComplexField2D,
    spec: &ProbeSpec,
    grid: &ScanGrid,
    noise: NoiseConfig,
) -> Result<Dataset4D> {
    let probe = synthesize_probe(spec)?;
    if probe.dims() != (grid.detector_h, grid.detector_w) {
        return Err(Error::Config("probe grid does not match the scan grid detector".into()));
    }
    if object.dims() != grid.canvas_dims() {
        return Err(Error::Config(format!(
            "object {:?} does not match the scan canvas {:?}",
            object.dims(),
            grid.canvas_dims()
        )));
    }
    grid.validate()?;
    let clean = noiseless_stack(object, &probe, &grid.offsets)?;

    let (patterns, probe, scale, target, achieved, empirical) = match noise.kind {
        NoiseKind::Noiseless => (clean, probe, 1.0, None, None, None),
        NoiseKind::Poisson => {
            let target = noise
                .target_msnr_db
                .filter(|t| t.is_finite())
                .ok_or_else(|| Error::Config("Poisson noise needs a finite target mSNR".into()))?;
            let scale = calibrate_intensity(&clean, target)?;
            let mut means = clean;
            means.data.iter_mut().for_each(|v| *v *= scale);
            if let Some(&m) = means.data.iter().find(|&&m| m > MAX_POISSON_MEAN) {
                return Err(Error::Intensity(m));
            }
            let achieved = mean_expected_snr_db(&means)?;

            let n = means.height * means.width;
            let mut noisy = vec![0.0; means.data.len()];
            let draw = |(l, (out, mean)): (usize, (&mut [f64], &[f64]))| poisson_draw(mean, noise.seed, l as u64, out);
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                noisy
                    .par_chunks_mut(n)
                    .zip(means.data.par_chunks(n))
                    .enumerate()
                    .try_for_each(draw)?;
            }
            #[cfg(not(feature = "parallel"))]
            noisy
                .chunks_mut(n)
                .zip(means.data.chunks(n))
                .enumerate()
                .try_for_each(draw)?;

            let mut emp = 0.0;
            for (m, y) in means.data.chunks(n).zip(noisy.chunks(n)) {
                emp += empirical_snr_db(m, y)?;
            }
            let empirical = emp / means.count as f64;
            let probe = probe.scale(Complex64::new(scale.sqrt(), 0.0));
            let stack = PatternStack { data: noisy, ..means };
            (stack, probe, scale, Some(target), Some(achieved), Some(empirical))
        }
    };

    let meta = DatasetMeta {
        format_version: DATASET_FORMAT_VERSION,
        probe: ProbeEcho::from(spec),
        noise,
        snr_definition: "mean over patterns of 10*log10(sum(y^2)/sum(noise^2)), noise = Poisson(y) - y".into(),
        msnr_target_db: target,
        msnr_achieved_db: achieved,
        msnr_empirical_db: empirical,
        intensity_scale: scale,
        grid: grid.clone(),
        generator: concat!("ptycho-core ", env!("CARGO_PKG_VERSION")).into(),
    };
    Ok(Dataset4D {
        patterns,
        grid: grid.clone(),
        probe,
        object_truth: Some(object.clone()),
        meta,
    })
}
