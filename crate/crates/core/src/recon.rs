//! Ptychographic iterative engine with a known probe.
//!
//! Each position update crops the illuminated window, propagates the exit wave
//! to the detector, replaces the modulus with the measured amplitude, steps the
//! object towards the corrected exit wave with step `α·p*/max|p|²`, and (CPIE
//! only) projects the window back onto unit modulus before reinsertion.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_window, unit_phasor, ComplexField2D, Dft2, WindowOffset};
use crate::metrics::{nrmse_db, EvalRegion};
use crate::simulator::Dataset4D;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Pie,
    Cpie,
}

impl Algorithm {
    pub fn constrains_modulus(self) -> bool {
        matches!(self, Algorithm::Cpie)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pie => "pie",
            Algorithm::Cpie => "cpie",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pie" => Ok(Algorithm::Pie),
            "cpie" => Ok(Algorithm::Cpie),
            other => Err(format!("unknown algorithm '{other}' (expected pie or cpie)")),
        }
    }
}

/// Order in which positions are visited within one iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionOrder {
    /// Fresh seeded permutation every iteration.
    #[default]
    Shuffled,
    Raster,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialObject {
    Ones,
    Provided(ComplexField2D),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconConfig {
    pub algorithm: Algorithm,
    pub n_itr: usize,
    pub alpha_o: f64,
    pub seed: u64,
    pub initial_object: InitialObject,
    pub order: PositionOrder,
}

impl ReconConfig {
    /// 100 iterations at step 0.1 from a unit object.
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            n_itr: 100,
            alpha_o: 0.1,
            seed: 0,
            initial_object: InitialObject::Ones,
            order: PositionOrder::Shuffled,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_itr < 1 {
            return Err(Error::Config("n_itr must be >= 1".into()));
        }
        if !(self.alpha_o > 0.0 && self.alpha_o <= 2.0) {
            return Err(Error::Domain {
                name: "alpha_o",
                value: self.alpha_o,
                domain: "(0, 2]",
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub residual: f64,
    pub nrmse_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconResult {
    pub object_estimate: ComplexField2D,
    pub per_iteration_log: Vec<IterationLog>,
}

impl ReconResult {
    pub fn final_nrmse_db(&self) -> Option<f64> {
        self.per_iteration_log.last().and_then(|l| l.nrmse_db)
    }

    /// `iter,residual,nrmse_db` with an empty last column when no truth is known.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("iter,residual,nrmse_db\n");
        for l in &self.per_iteration_log {
            let nrmse = l.nrmse_db.map(|v| format!("{v:.6}")).unwrap_or_default();
            out.push_str(&format!("{},{:.9e},{}\n", l.iteration, l.residual, nrmse));
        }
        out
    }
}

/// Scratch state for the single-position update of one probe.
#[derive(Debug, Clone)]
pub struct PositionUpdater {
    dft: Dft2,
    probe: Vec<Complex64>,
    /// `p* / max|p|²`
    step_dir: Vec<Complex64>,
    height: usize,
    width: usize,
    psi_u: Vec<Complex64>,
    phi: Vec<Complex64>,
}

impl PositionUpdater {
    pub fn new(probe: &ComplexField2D) -> Result<Self> {
        let pmax = probe.max_abs();
        if !(pmax > 0.0) {
            return Err(Error::Config("probe is identically zero".into()));
        }
        let inv = 1.0 / (pmax * pmax);
        let (h, w) = probe.dims();
        let zero = Complex64::new(0.0, 0.0);
        Ok(Self {
            dft: Dft2::new(h, w),
            probe: probe.as_slice().to_vec(),
            step_dir: probe.as_slice().iter().map(|p| p.conj() * inv).collect(),
            height: h,
            width: w,
            psi_u: vec![zero; h * w],
            phi: vec![zero; h * w],
        })
    }

    /// Updates the window of `object` at `offset` in place from measured
    /// amplitudes `sqrt_y`. Returns `Σ(√y − |φᵘ|)²`.
    pub fn update(
        &mut self,
        object: &mut ComplexField2D,
        sqrt_y: &[f64],
        offset: WindowOffset,
        alpha_o: f64,
        constrain: bool,
    ) -> Result<f64> {
        let (h, w) = (self.height, self.width);
        if sqrt_y.len() != h * w {
            return Err(Error::Config(format!(
                "pattern has {} samples, probe is {h}x{w}",
                sqrt_y.len()
            )));
        }
        check_window(object.dims(), offset, h, w)?;
        let ow = object.width();

        // crop and form the uncorrected exit wave
        let obj = object.as_mut_slice();
        for r in 0..h {
            let base = (offset.row + r) * ow + offset.col;
            for c in 0..w {
                let k = r * w + c;
                self.psi_u[k] = self.probe[k] * obj[base + c];
            }
        }
        self.phi.copy_from_slice(&self.psi_u);
        self.dft.forward(&mut self.phi);

        let mut residual = 0.0;
        for (z, &a) in self.phi.iter_mut().zip(sqrt_y) {
            let m = z.norm_sqr().sqrt();
            residual += (a - m) * (a - m);
            *z = if m == 0.0 { Complex64::new(a, 0.0) } else { *z * (a / m) };
        }
        self.dft.inverse(&mut self.phi);

        for r in 0..h {
            let base = (offset.row + r) * ow + offset.col;
            for c in 0..w {
                let k = r * w + c;
                let mut v = obj[base + c] + alpha_o * self.step_dir[k] * (self.phi[k] - self.psi_u[k]);
                if constrain {
                    v = unit_phasor(v);
                }
                obj[base + c] = v;
            }
        }
        Ok(residual)
    }
}

/// One loop body of the engine, returning the updated full object.
pub fn single_position_update(
    object: &ComplexField2D,
    probe: &ComplexField2D,
    pattern: &[f64],
    offset: WindowOffset,
    alpha_o: f64,
    constrain: bool,
) -> Result<ComplexField2D> {
    let mut updater = PositionUpdater::new(probe)?;
    let sqrt_y: Vec<f64> = pattern.iter().map(|y| y.sqrt()).collect();
    let mut out = object.clone();
    updater.update(&mut out, &sqrt_y, offset, alpha_o, constrain)?;
    Ok(out)
}

/// Iteration-by-iteration driver; [`reconstruct`] runs it to completion.
#[derive(Debug, Clone)]
pub struct Reconstructor<'a> {
    dataset: &'a Dataset4D,
    config: ReconConfig,
    updater: PositionUpdater,
    sqrt_y: Vec<f64>,
    energy: Vec<f64>,
    order: Vec<usize>,
    rng: ChaCha8Rng,
    object: ComplexField2D,
    iteration: usize,
    region: EvalRegion,
    log: Vec<IterationLog>,
}

impl<'a> Reconstructor<'a> {
    pub fn new(dataset: &'a Dataset4D, probe: &ComplexField2D, config: ReconConfig) -> Result<Self> {
        config.validate()?;
        let pats = &dataset.patterns;
        if probe.dims() != (pats.height, pats.width) {
            return Err(Error::Config(format!(
                "probe {:?} does not match pattern size {}x{}",
                probe.dims(),
                pats.height,
                pats.width
            )));
        }
        if pats.count != dataset.grid.offsets.len() {
            return Err(Error::Config(format!(
                "{} patterns for {} positions",
                pats.count,
                dataset.grid.offsets.len()
            )));
        }
        let canvas = dataset.grid.canvas_dims();
        for &o in &dataset.grid.offsets {
            check_window(canvas, o, pats.height, pats.width)?;
        }
        if let Some(v) = pats.data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Config(format!("pattern sample {v} is negative or non-finite")));
        }
        let object = match &config.initial_object {
            InitialObject::Ones => ComplexField2D::filled(canvas.0, canvas.1, Complex64::new(1.0, 0.0)),
            InitialObject::Provided(o) => {
                if o.dims() != canvas {
                    return Err(Error::Config(format!(
                        "initial object {:?} does not match canvas {canvas:?}",
                        o.dims()
                    )));
                }
                o.clone()
            }
        };
        Ok(Self {
            dataset,
            updater: PositionUpdater::new(probe)?,
            sqrt_y: pats.data.iter().map(|y| y.sqrt()).collect(),
            energy: pats.patterns().map(|p| p.iter().sum()).collect(),
            order: (0..pats.count).collect(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            object,
            iteration: 0,
            region: EvalRegion::central(&dataset.grid),
            log: Vec::with_capacity(config.n_itr),
            config,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.n_itr
    }

    pub fn estimate(&self) -> &ComplexField2D {
        &self.object
    }

    pub fn log(&self) -> &[IterationLog] {
        &self.log
    }

    /// Runs one outer iteration over all positions.
    pub fn step(&mut self) -> Result<IterationLog> {
        self.iteration += 1;
        if self.config.order == PositionOrder::Shuffled {
            self.order.shuffle(&mut self.rng);
        }
        let n = self.dataset.patterns.height * self.dataset.patterns.width;
        let constrain = self.config.algorithm.constrains_modulus();
        let mut residual_sum = 0.0;
        let mut counted = 0usize;
        for &l in &self.order {
            let sq = &self.sqrt_y[l * n..(l + 1) * n];
            let r = self.updater.update(
                &mut self.object,
                sq,
                self.dataset.grid.offsets[l],
                self.config.alpha_o,
                constrain,
            )?;
            if self.energy[l] > 0.0 {
                residual_sum += r / self.energy[l];
                counted += 1;
            }
        }
        if self.object.as_slice().iter().any(|z| z.re.is_nan() || z.im.is_nan()) {
            return Err(Error::Divergence {
                iteration: self.iteration,
            });
        }
        let nrmse = match &self.dataset.object_truth {
            Some(t) => Some(nrmse_db(t, &self.object, self.region)?),
            None => None,
        };
        let entry = IterationLog {
            iteration: self.iteration,
            residual: if counted > 0 {
                residual_sum / counted as f64
            } else {
                0.0
            },
            nrmse_db: nrmse,
        };
        self.log.push(entry);
        Ok(entry)
    }

    pub fn finish(self) -> ReconResult {
        ReconResult {
            object_estimate: self.object,
            per_iteration_log: self.log,
        }
    }
}

/// Runs PIE or CPIE for `config.n_itr` iterations.
pub fn reconstruct(dataset: &Dataset4D, probe: &ComplexField2D, config: ReconConfig) -> Result<ReconResult> {
    let mut engine = Reconstructor::new(dataset, probe, config)?;
    while !engine.is_done() {
        engine.step()?;
    }
    Ok(engine.finish())
}
