//! Overlap × noise × algorithm sweeps.
//!
//! Every cell is simulated, reconstructed and scored on its own and stored as
//! `cells/<key>.json` (plus a phase image) through an atomic rename, so an
//! interrupted sweep resumes where it stopped. The summary is rebuilt from
//! the cell records in plan order and contains no wall-clock data unless
//! timing was requested; it is therefore byte-identical across runs and
//! thread counts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ptycho_core::io::{encode_pgm, phase_image, write_atomic};
use ptycho_core::recon::PositionOrder;
use ptycho_core::{achieved_overlap, reconstruct, Algorithm, NoiseConfig, ReconConfig};

use crate::setup::SimParams;

pub const SUMMARY_HEADER: &str = "rho,rho_achieved,msnr_target,msnr_achieved,algo,seed,final_nrmse_db,runtime_s,error";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub rho_values: Vec<f64>,
    /// `None` is the noiseless arm.
    pub msnr_values_db: Vec<Option<f64>>,
    pub algorithms: Vec<Algorithm>,
    pub replicate_seeds: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub rho: f64,
    pub msnr_db: Option<f64>,
    pub algorithm: Algorithm,
    pub seed: u64,
}

impl Cell {
    pub fn key(&self) -> String {
        let noise = match self.msnr_db {
            None => "clean".to_string(),
            Some(m) => format!("msnr{m:.2}"),
        };
        format!("rho{:.4}_{noise}_{}_s{}", self.rho, self.algorithm.name(), self.seed)
    }

    fn noise(&self) -> NoiseConfig {
        match self.msnr_db {
            None => NoiseConfig::noiseless(self.seed),
            Some(m) => NoiseConfig::poisson(m, self.seed),
        }
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.rho_values.is_empty() {
            bail!("sweep plan needs at least one rho value");
        }
        if let Some(r) = self.rho_values.iter().find(|r| !(0.0..1.0).contains(*r)) {
            bail!("rho {r} outside [0, 1)");
        }
        if let Some(m) = self.msnr_values_db.iter().flatten().find(|m| !m.is_finite()) {
            bail!("mSNR target {m} is not finite");
        }
        if self.msnr_values_db.is_empty() || self.algorithms.is_empty() || self.replicate_seeds.is_empty() {
            bail!("sweep plan needs at least one noise level, algorithm and seed");
        }
        Ok(())
    }

    /// Cells in summary order: ρ, then noise, then algorithm, then seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &rho in &self.rho_values {
            for &msnr_db in &self.msnr_values_db {
                for &algorithm in &self.algorithms {
                    for &seed in &self.replicate_seeds {
                        out.push(Cell {
                            rho,
                            msnr_db,
                            algorithm,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub out_dir: PathBuf,
    /// Dataset template; ρ and noise are overwritten per cell.
    pub sim: SimParams,
    pub n_itr: usize,
    pub alpha_o: f64,
    pub order: PositionOrder,
    pub force: bool,
    pub timing: bool,
}

impl SweepOptions {
    fn fingerprint(&self) -> String {
        format!(
            "{};n_itr={};alpha_o={};order={:?}",
            self.sim.fingerprint(),
            self.n_itr,
            self.alpha_o,
            self.order
        )
    }
}

/// Stored outcome of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub fingerprint: String,
    pub rho: f64,
    pub rho_achieved: Option<f64>,
    pub msnr_target: Option<f64>,
    pub msnr_achieved: Option<f64>,
    pub algo: String,
    pub seed: u64,
    pub final_nrmse_db: Option<f64>,
    pub runtime_s: f64,
    pub error: Option<String>,
}

impl CellRecord {
    fn csv_row(&self, timing: bool) -> String {
        let opt = |v: Option<f64>, prec: usize| v.map(|x| format!("{x:.prec$}")).unwrap_or_default();
        let runtime = if timing {
            format!("{:.3}", self.runtime_s)
        } else {
            String::new()
        };
        format!(
            "{},{},{},{},{},{},{},{},{}",
            format_args!("{:.4}", self.rho),
            opt(self.rho_achieved, 6),
            opt(self.msnr_target, 2),
            opt(self.msnr_achieved, 4),
            self.algo,
            self.seed,
            opt(self.final_nrmse_db, 6),
            runtime,
            self.error.as_deref().map(csv_quote).unwrap_or_default(),
        )
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub records: Vec<CellRecord>,
    pub computed: usize,
    pub reused: usize,
}

impl SweepOutcome {
    pub fn failed(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }
}

fn run_cell(cell: &Cell, opts: &SweepOptions, fingerprint: &str, cells_dir: &Path) -> CellRecord {
    let start = Instant::now();
    let mut record = CellRecord {
        fingerprint: fingerprint.to_string(),
        rho: cell.rho,
        rho_achieved: None,
        msnr_target: cell.msnr_db,
        msnr_achieved: None,
        algo: cell.algorithm.name().to_string(),
        seed: cell.seed,
        final_nrmse_db: None,
        runtime_s: 0.0,
        error: None,
    };
    let result = (|| -> Result<()> {
        let mut sim = opts.sim.clone();
        sim.rho = cell.rho;
        sim.noise = cell.noise();
        let ds = sim.simulate()?;
        record.rho_achieved = Some(achieved_overlap(&ds.grid).value());
        record.msnr_achieved = ds.meta.msnr_achieved_db;
        let cfg = ReconConfig {
            n_itr: opts.n_itr,
            alpha_o: opts.alpha_o,
            seed: cell.seed,
            order: opts.order,
            ..ReconConfig::new(cell.algorithm)
        };
        let res = reconstruct(&ds, &ds.probe, cfg)?;
        record.final_nrmse_db = res.final_nrmse_db();
        let g = &ds.grid;
        let img = phase_image(&res.object_estimate, g.pad_px, g.pad_px, g.object_h, g.object_w);
        write_atomic(&cells_dir.join(format!("{}.pgm", cell.key())), &encode_pgm(&img))?;
        Ok(())
    })();
    if let Err(e) = result {
        log::warn!("cell {} failed: {e:#}", cell.key());
        record.error = Some(format!("{e:#}"));
    }
    record.runtime_s = start.elapsed().as_secs_f64();
    record
}

fn load_record(path: &Path, fingerprint: &str) -> Option<CellRecord> {
    let bytes = fs::read(path).ok()?;
    let rec: CellRecord = serde_json::from_slice(&bytes).ok()?;
    (rec.fingerprint == fingerprint && rec.error.is_none()).then_some(rec)
}

/// Runs (or resumes) the sweep and writes `summary.csv` and `timings.csv`.
pub fn run_sweep(plan: &SweepPlan, opts: &SweepOptions) -> Result<SweepOutcome> {
    plan.validate()?;
    let cells_dir = opts.out_dir.join("cells");
    fs::create_dir_all(&cells_dir).with_context(|| format!("creating {}", cells_dir.display()))?;
    let fingerprint = opts.fingerprint();
    let cells = plan.cells();

    let results: Vec<(CellRecord, bool)> = cells
        .par_iter()
        .map(|cell| {
            let path = cells_dir.join(format!("{}.json", cell.key()));
            if !opts.force {
                if let Some(rec) = load_record(&path, &fingerprint) {
                    log::info!("cell {} reused", cell.key());
                    return Ok((rec, false));
                }
            }
            let rec = run_cell(cell, opts, &fingerprint, &cells_dir);
            write_atomic(&path, &serde_json::to_vec_pretty(&rec)?)?;
            log::info!("cell {} done in {:.2} s", cell.key(), rec.runtime_s);
            Ok((rec, true))
        })
        .collect::<Result<_>>()?;

    let computed = results.iter().filter(|(_, fresh)| *fresh).count();
    let records: Vec<CellRecord> = results.into_iter().map(|(r, _)| r).collect();

    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut timings = String::from("key,runtime_s\n");
    for (cell, rec) in cells.iter().zip(&records) {
        summary.push_str(&rec.csv_row(opts.timing));
        summary.push('\n');
        timings.push_str(&format!("{},{:.3}\n", cell.key(), rec.runtime_s));
    }
    write_atomic(&opts.out_dir.join("summary.csv"), summary.as_bytes())?;
    write_atomic(&opts.out_dir.join("timings.csv"), timings.as_bytes())?;
    Ok(SweepOutcome {
        reused: records.len() - computed,
        computed,
        records,
    })
}

/// Parses `none,20,26` style noise lists.
pub fn parse_msnr_list(s: &str) -> Result<Vec<Option<f64>>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t {
            "none" | "clean" | "inf" => Ok(None),
            v => v.parse::<f64>().map(Some).map_err(|_| format!("bad mSNR value '{v}'")),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_enumerate_in_plan_order() {
        let plan = SweepPlan {
            rho_values: vec![0.1, 0.2],
            msnr_values_db: vec![None, Some(20.0)],
            algorithms: vec![Algorithm::Pie, Algorithm::Cpie],
            replicate_seeds: vec![3],
        };
        let cells = plan.cells();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0].key(), "rho0.1000_clean_pie_s3");
        assert_eq!(cells[3].key(), "rho0.1000_msnr20.00_cpie_s3");
        assert_eq!(cells[7].key(), "rho0.2000_msnr20.00_cpie_s3");
    }

    #[test]
    fn plan_validation() {
        let mut plan = SweepPlan {
            rho_values: vec![],
            msnr_values_db: vec![None],
            algorithms: vec![Algorithm::Cpie],
            replicate_seeds: vec![0],
        };
        assert!(plan.validate().is_err());
        plan.rho_values = vec![1.0];
        assert!(plan.validate().is_err());
        plan.rho_values = vec![0.5];
        plan.validate().unwrap();
    }

    #[test]
    fn msnr_lists() {
        assert_eq!(
            parse_msnr_list("none,20,26.5").unwrap(),
            vec![None, Some(20.0), Some(26.5)]
        );
        assert!(parse_msnr_list("loud").is_err());
    }

    #[test]
    fn error_column_is_quoted() {
        assert_eq!(csv_quote("plain"), "plain");
        assert_eq!(csv_quote("a, \"b\""), "\"a, \"\"b\"\"\"");
    }
}
