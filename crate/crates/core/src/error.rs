use thiserror::Error;

/// Errors produced by the simulation, geometry and reconstruction routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("window at (row {row}, col {col}) of size {height}x{width} exceeds canvas {canvas_h}x{canvas_w}")]
    OutOfRange {
        row: i64,
        col: i64,
        height: usize,
        width: usize,
        canvas_h: usize,
        canvas_w: usize,
    },

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("overlap count is unbounded for gamma = 0 (rho = 1); cap the count by the scan grid extent")]
    UnboundedCount,

    #[error("scan step rounds to 0 px for gamma = {gamma} and probe diameter {diameter_px} px")]
    Resolution { gamma: f64, diameter_px: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("aperture radius {radius_px:.3} reciprocal px is under-resolved (need >= 2)")]
    UnderResolvedAperture { radius_px: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("Poisson mean {0:e} exceeds 1e12; lower the target mSNR")]
    Intensity(f64),

    #[error("reconstruction diverged (NaN) at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("invalid {what}: {reason}")]
    Format { what: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
