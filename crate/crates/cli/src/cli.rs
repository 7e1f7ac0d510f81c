use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ptycho_core::geometry::{rho_grid, sweep_geometry_with};
use ptycho_core::io::{self, encode_pgm, phase_image, write_atomic};
use ptycho_core::recon::PositionOrder;
use ptycho_core::{achieved_overlap, nrmse_db, Algorithm, EvalRegion, InverseRule, NoiseConfig, ReconConfig};

use crate::preset::{Preset, ALPHA_RAD, FILL_FRACTION, LAMBDA_M};
use crate::setup::{ObjectSource, SimParams};
use crate::sweep::{parse_msnr_list, run_sweep, SweepOptions, SweepPlan};

/// Bad flag values that clap itself cannot see; mapped to exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Parser, Debug)]
#[command(
    name = "ptycho",
    version,
    about = "Overlap-ratio experiments for defocused-probe electron ptychography"
)]
pub struct Cli {
    /// Seed for noise draws, position shuffles and sweep replicates.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (geometry) or directory (simulate, reconstruct, sweep).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Problem scale used for every default below.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Paper)]
    pub preset: Preset,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Overlap count and pixel coverage statistics over a ρ range (CSV).
    Geometry(GeometryArgs),
    /// Simulate a 4D-STEM dataset bundle.
    Simulate(SimulateArgs),
    /// Reconstruct the object from a dataset bundle with PIE or CPIE.
    Reconstruct(ReconstructArgs),
    /// NRMSE between a ground truth and an estimate.
    Evaluate(EvaluateArgs),
    /// Simulate → reconstruct → evaluate over an overlap × noise × algorithm grid.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InverseArg {
    Exact,
    Approx,
}

#[derive(Args, Debug)]
pub struct GeometryArgs {
    #[arg(long, default_value_t = 0.05)]
    pub rho_min: f64,
    #[arg(long, default_value_t = 0.95)]
    pub rho_max: f64,
    #[arg(long, default_value_t = 0.05)]
    pub rho_step: f64,
    /// Probe diameter L in pixels [preset: 64 ci, 256 paper].
    #[arg(long)]
    pub probe_diameter: Option<usize>,
    /// How γ is obtained from ρ.
    #[arg(long, value_enum, default_value_t = InverseArg::Exact)]
    pub inverse: InverseArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    None,
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Shuffled,
    Raster,
}

impl From<OrderArg> for PositionOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Shuffled => PositionOrder::Shuffled,
            OrderArg::Raster => PositionOrder::Raster,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ObjectArgs {
    /// `bars`, `smooth`, or a path to a binary PGM.
    #[arg(long, default_value = "bars")]
    pub object: ObjectSource,
    /// Object side in pixels (built-ins use the preset; images are resized only when given).
    #[arg(long)]
    pub object_size: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub phase_min: f64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    pub phase_max: f64,
    /// Detector side in pixels [preset: 64 ci, 256 paper].
    #[arg(long)]
    pub detector: Option<usize>,
    /// Defocus in metres [preset: 2.5e-7 ci, 1e-6 paper].
    #[arg(long)]
    pub defocus: Option<f64>,
    /// Convergence semi-angle in radians.
    #[arg(long, default_value_t = ALPHA_RAD)]
    pub alpha: f64,
    /// Electron wavelength in metres.
    #[arg(long, default_value_t = LAMBDA_M)]
    pub lambda: f64,
    /// Fraction of the detector window spanned by the probe diameter.
    #[arg(long, default_value_t = FILL_FRACTION)]
    pub fill: f64,
    /// Total probe intensity before noise calibration.
    #[arg(long, default_value_t = 1.0)]
    pub intensity: f64,
    /// Symmetric padding in pixels [default: round(0.85 · detector)].
    #[arg(long)]
    pub pad: Option<usize>,
}

impl ObjectArgs {
    fn sim_params(&self, preset: Preset, rho: f64, noise: NoiseConfig) -> Result<SimParams> {
        let mut p = SimParams::from_preset(preset, self.object.clone(), rho, noise);
        if let Some(n) = self.object_size {
            p.object_px = n;
            p.object_px_explicit = true;
        }
        if let Some(d) = self.detector {
            p.detector_px = d;
        }
        if let Some(df) = self.defocus {
            p.defocus_m = df;
        }
        p.phase_min = self.phase_min;
        p.phase_max = self.phase_max;
        p.alpha_rad = self.alpha;
        p.lambda_m = self.lambda;
        p.fill_fraction = self.fill;
        p.intensity_i0 = self.intensity;
        p.pad_px = self.pad;
        if !(p.phase_min < p.phase_max) {
            return usage(format!(
                "--phase-min {} must be below --phase-max {}",
                p.phase_min, p.phase_max
            ));
        }
        if p.object_px == 0 || p.detector_px == 0 {
            return usage("object and detector sizes must be positive");
        }
        let physical = [
            ("defocus", p.defocus_m),
            ("alpha", p.alpha_rad),
            ("lambda", p.lambda_m),
            ("intensity", p.intensity_i0),
        ];
        if let Some((name, v)) = physical.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return usage(format!("--{name} must be positive, got {v}"));
        }
        if !(p.fill_fraction > 0.0 && p.fill_fraction <= 1.0) {
            return usage(format!("--fill must lie in (0, 1], got {}", p.fill_fraction));
        }
        Ok(p)
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub object: ObjectArgs,
    /// Requested overlap ratio.
    #[arg(long, default_value_t = 0.6)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = NoiseArg::None)]
    pub noise: NoiseArg,
    /// Target mean SNR in dB (Poisson noise only).
    #[arg(long)]
    pub msnr: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct ReconArgs {
    /// Outer iterations [preset: 25 ci, 100 paper].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Object step size α_o in (0, 2] [preset: 1.0 ci, 0.1 paper].
    #[arg(long)]
    pub alpha_o: Option<f64>,
    #[arg(long, value_enum, default_value_t = OrderArg::Shuffled)]
    pub order: OrderArg,
}

impl ReconArgs {
    fn resolve(&self, preset: Preset) -> Result<(usize, f64)> {
        let v = preset.values();
        let iters = self.iters.unwrap_or(v.n_itr);
        let alpha = self.alpha_o.unwrap_or(v.alpha_o);
        if iters == 0 {
            return usage("--iters must be at least 1");
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return usage(format!("--alpha-o must lie in (0, 2], got {alpha}"));
        }
        Ok((iters, alpha))
    }
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// Dataset bundle directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "cpie")]
    pub algo: Algorithm,
    #[command(flatten)]
    pub recon: ReconArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Ground-truth complex blob (defaults to the bundle's truth).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Estimated complex blob.
    #[arg(long)]
    pub estimate: PathBuf,
    /// Dataset bundle: supplies the truth and restricts scoring to the unpadded region.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Explicit region `top,left,height,width`.
    #[arg(long)]
    pub region: Option<String>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub object: ObjectArgs,
    /// Comma-separated ρ values (overrides the range flags).
    #[arg(long)]
    pub rho_values: Option<String>,
    #[arg(long)]
    pub rho_min: Option<f64>,
    #[arg(long)]
    pub rho_max: Option<f64>,
    #[arg(long)]
    pub rho_step: Option<f64>,
    /// Comma-separated mSNR targets in dB; `none` for the noiseless arm.
    #[arg(long)]
    pub msnr: Option<String>,
    #[arg(long, default_value = "pie,cpie")]
    pub algos: String,
    /// Comma-separated replicate seeds [default: --seed].
    #[arg(long)]
    pub seeds: Option<String>,
    #[command(flatten)]
    pub recon: ReconArgs,
    /// Recompute cells that already have results.
    #[arg(long)]
    pub force: bool,
    /// Fill the runtime_s column of the summary (makes it run-dependent).
    #[arg(long)]
    pub timing: bool,
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> Result<i32> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match &cli.command {
        Command::Geometry(a) => cmd_geometry(&cli, a),
        Command::Simulate(a) => cmd_simulate(&cli, a),
        Command::Reconstruct(a) => cmd_reconstruct(&cli, a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(&cli, a),
    }
}

fn check_rho_range(min: f64, max: f64, step: f64) -> Result<()> {
    if !(step.is_finite() && step > 0.0) {
        return usage(format!("--rho-step must be positive, got {step}"));
    }
    if !(min.is_finite() && max.is_finite()) || min < 0.0 || max >= 1.0 {
        return usage(format!("ρ range [{min}, {max}] must lie within [0, 1)"));
    }
    Ok(())
}

fn cmd_geometry(cli: &Cli, a: &GeometryArgs) -> Result<i32> {
    check_rho_range(a.rho_min, a.rho_max, a.rho_step)?;
    let diameter = a.probe_diameter.unwrap_or(cli.preset.values().probe_diameter_px);
    let rule = match a.inverse {
        InverseArg::Exact => InverseRule::Exact,
        InverseArg::Approx => InverseRule::Approx,
    };
    let report = sweep_geometry_with(&rho_grid(a.rho_min, a.rho_max, a.rho_step), diameter, rule);
    let csv = report.to_csv();
    match &cli.out {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    let mut failed = 0;
    for row in report.failed_rows() {
        if let Err(e) = &row.values {
            eprintln!("rho {}: {e}", row.rho);
        }
        failed += 1;
    }
    Ok(if failed > 0 { 1 } else { 0 })
}

fn noise_config(a: &SimulateArgs, seed: u64) -> Result<NoiseConfig> {
    match (a.noise, a.msnr) {
        (NoiseArg::None, _) => Ok(NoiseConfig::noiseless(seed)),
        (NoiseArg::Poisson, Some(m)) if m.is_finite() => Ok(NoiseConfig::poisson(m, seed)),
        (NoiseArg::Poisson, Some(m)) => usage(format!("--msnr must be finite, got {m}")),
        (NoiseArg::Poisson, None) => usage("--noise poisson needs --msnr"),
    }
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<i32> {
    if !(0.0..1.0).contains(&a.rho) {
        return usage(format!("--rho must lie in [0, 1), got {}", a.rho));
    }
    let params = a.object.sim_params(cli.preset, a.rho, noise_config(a, cli.seed)?)?;
    let ds = params.simulate()?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("dataset"));
    io::save_dataset(&out, &ds)?;
    let g = &ds.grid;
    println!(
        "wrote {} ({} patterns of {}x{}, {}x{} raster, step {} px)",
        out.display(),
        g.len(),
        g.detector_h,
        g.detector_w,
        g.rows,
        g.cols,
        g.step_px
    );
    println!(
        "rho requested {:.4}, achieved {:.6}",
        a.rho,
        achieved_overlap(g).value()
    );
    match (ds.meta.msnr_achieved_db, ds.meta.msnr_empirical_db) {
        (Some(an), Some(emp)) => println!("mSNR analytic {an:.4} dB, empirical {emp:.4} dB"),
        _ => println!("mSNR analytic inf (noiseless)"),
    }
    Ok(0)
}

fn cmd_reconstruct(cli: &Cli, a: &ReconstructArgs) -> Result<i32> {
    let (n_itr, alpha_o) = a.recon.resolve(cli.preset)?;
    let ds = io::load_dataset(&a.data).with_context(|| format!("loading bundle {}", a.data.display()))?;
    ds.validate()?;
    let cfg = ReconConfig {
        n_itr,
        alpha_o,
        seed: cli.seed,
        order: a.recon.order.into(),
        ..ReconConfig::new(a.algo)
    };
    let mut engine = ptycho_core::recon::Reconstructor::new(&ds, &ds.probe, cfg)?;
    while !engine.is_done() {
        let l = engine.step()?;
        match l.nrmse_db {
            Some(n) => log::info!("iter {:>4}  residual {:.4e}  nrmse {n:.3} dB", l.iteration, l.residual),
            None => log::info!("iter {:>4}  residual {:.4e}", l.iteration, l.residual),
        }
    }
    let res = engine.finish();

    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("recon"));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    io::write_c64(&out.join("estimate.c64"), &res.object_estimate)?;
    write_atomic(&out.join("log.csv"), res.log_csv().as_bytes())?;
    let g = &ds.grid;
    let img = phase_image(&res.object_estimate, g.pad_px, g.pad_px, g.object_h, g.object_w);
    write_atomic(&out.join("phase.pgm"), &encode_pgm(&img))?;

    let last = res.per_iteration_log.last().expect("at least one iteration");
    print!("{} x{}: residual {:.4e}", a.algo.name(), n_itr, last.residual);
    match last.nrmse_db {
        Some(n) => println!(", NRMSE {n:.4} dB"),
        None => println!(),
    }
    Ok(0)
}

fn parse_region(s: &str) -> Result<EvalRegion> {
    let parts: Vec<usize> = match s.split(',').map(|t| t.trim().parse::<usize>()).collect() {
        Ok(p) => p,
        Err(_) => return usage(format!("--region expects top,left,height,width; got '{s}'")),
    };
    match parts[..] {
        [top, left, height, width] => Ok(EvalRegion {
            top,
            left,
            height,
            width,
        }),
        _ => usage(format!("--region expects four integers; got '{s}'")),
    }
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<i32> {
    let (truth, default_region) = match (&a.truth, &a.bundle) {
        (Some(t), _) => (io::read_c64(t)?, None),
        (None, Some(dir)) => {
            let ds = io::load_dataset(dir)?;
            let region = EvalRegion::central(&ds.grid);
            let truth = ds
                .object_truth
                .with_context(|| format!("bundle {} has no object_truth.c64", dir.display()))?;
            (truth, Some(region))
        }
        (None, None) => return usage("evaluate needs --truth or --bundle"),
    };
    let estimate = io::read_c64(&a.estimate)?;
    if truth.dims() != estimate.dims() {
        anyhow::bail!(
            "shape mismatch: truth is {}x{}, estimate is {}x{}",
            truth.height(),
            truth.width(),
            estimate.height(),
            estimate.width()
        );
    }
    let region = match &a.region {
        Some(s) => parse_region(s)?,
        None => default_region.unwrap_or_else(|| EvalRegion::full(truth.dims())),
    };
    println!("{:.4}", nrmse_db(&truth, &estimate, region)?);
    Ok(0)
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for t in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match t.parse() {
            Ok(v) => out.push(v),
            Err(_) => return usage(format!("--{flag}: cannot parse '{t}'")),
        }
    }
    Ok(out)
}

fn sweep_plan(cli: &Cli, a: &SweepArgs) -> Result<SweepPlan> {
    let v = cli.preset.values();
    let rho_values = match (&a.rho_values, a.rho_min, a.rho_max, a.rho_step) {
        (Some(list), ..) => parse_list("rho-values", list)?,
        (None, None, None, None) => v.sweep_rhos.clone(),
        (None, min, max, step) => {
            let (min, max, step) = (min.unwrap_or(0.0), max.unwrap_or(0.95), step.unwrap_or(0.05));
            check_rho_range(min, max, step)?;
            rho_grid(min, max, step)
        }
    };
    let msnr_values_db = match &a.msnr {
        Some(s) => parse_msnr_list(s).map_err(UsageError)?,
        None => v.sweep_msnr_db.clone(),
    };
    let algorithms = parse_list("algos", &a.algos)?;
    let replicate_seeds = match &a.seeds {
        Some(s) => parse_list("seeds", s)?,
        None => vec![cli.seed],
    };
    let plan = SweepPlan {
        rho_values,
        msnr_values_db,
        algorithms,
        replicate_seeds,
    };
    if let Err(e) = plan.validate() {
        return usage(e.to_string());
    }
    Ok(plan)
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> Result<i32> {
    let plan = sweep_plan(cli, a)?;
    let (n_itr, alpha_o) = a.recon.resolve(cli.preset)?;
    let sim = a.object.sim_params(cli.preset, 0.0, NoiseConfig::noiseless(cli.seed))?;
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("sweep"));
    let opts = SweepOptions {
        out_dir: out_dir.clone(),
        sim,
        n_itr,
        alpha_o,
        order: a.recon.order.into(),
        force: a.force,
        timing: a.timing,
    };
    let outcome = run_sweep(&plan, &opts)?;
    println!(
        "{} cells ({} computed, {} reused, {} failed) -> {}",
        outcome.records.len(),
        outcome.computed,
        outcome.reused,
        outcome.failed(),
        summary_path(&out_dir).display()
    );
    Ok(if outcome.failed() > 0 { 1 } else { 0 })
}

fn summary_path(dir: &Path) -> PathBuf {
    dir.join("summary.csv")
}
