//! Defocused-probe 4D-STEM simulation and ptychographic reconstruction with a
//! known probe, plus the recovery-agnostic geometry of raster scan overlap.
//!
//! The pipeline is: [`probe::synthesize_probe`] builds the illumination,
//! [`simulator::build_scan_grid`] lays out a raster for a requested overlap
//! ratio, [`simulator::simulate_dataset`] produces (optionally Poisson-noisy)
//! diffraction patterns, [`recon::reconstruct`] runs PIE or CPIE, and
//! [`metrics::nrmse_db`] scores the estimate up to a global complex constant.

pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod probe;
pub mod recon;
pub mod simulator;

pub use error::{Error, Result};
pub use field::{crop_window, dft2_unitary, idft2_unitary, insert_window, ComplexField2D, Dft2, WindowOffset};
pub use geometry::{
    count_overlapping, inverse_overlap_approx, inverse_overlap_exact, overlap_ratio, pixel_coverage_stats,
    sweep_geometry, CoverageStats, GeometryReport, InverseRule, OverlapRatio, StepRatio,
};
pub use metrics::{achieved_overlap, nrmse_db, EvalRegion};
pub use probe::{probe_radius_m, real_space_pixel_m, synthesize_probe, ProbeSpec};
pub use recon::{reconstruct, single_position_update, Algorithm, ReconConfig, ReconResult};
pub use simulator::{
    build_scan_grid, calibrate_intensity, expected_poisson_snr_db, forward_pattern, load_phase_object, pad_symmetric,
    simulate_dataset, Dataset4D, GrayImage, NoiseConfig, PatternStack, ScanGrid,
};

pub use num_complex::Complex64;
