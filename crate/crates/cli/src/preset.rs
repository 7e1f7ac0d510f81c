use clap::ValueEnum;

/// Problem scale. `Paper` is the full 512²/256² protocol; `Ci` shrinks it so
/// a whole sweep runs in about a minute on one core.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, ValueEnum)]
pub enum Preset {
    Ci,
    #[default]
    Paper,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PresetValues {
    pub object_px: usize,
    pub detector_px: usize,
    pub n_itr: usize,
    pub alpha_o: f64,
    pub defocus_m: f64,
    /// Probe diameter used by the `geometry` subcommand.
    pub probe_diameter_px: usize,
    pub sweep_rhos: Vec<f64>,
    pub sweep_msnr_db: Vec<Option<f64>>,
}

pub const ALPHA_RAD: f64 = 6e-3;
pub const LAMBDA_M: f64 = 1.96e-12;
pub const FILL_FRACTION: f64 = 0.5;

impl Preset {
    pub fn values(self) -> PresetValues {
        match self {
            // Δf is scaled with the detector so the aperture keeps the same
            // fraction of the reciprocal window; 25 iterations at α_o = 0.1
            // barely leave the starting point, hence the larger step.
            Preset::Ci => PresetValues {
                object_px: 128,
                detector_px: 64,
                n_itr: 25,
                alpha_o: 1.0,
                defocus_m: 0.25e-6,
                probe_diameter_px: 64,
                sweep_rhos: (0..10).map(|i| i as f64 / 10.0).collect(),
                sweep_msnr_db: vec![None, Some(20.0), Some(26.0)],
            },
            Preset::Paper => PresetValues {
                object_px: 512,
                detector_px: 256,
                n_itr: 100,
                alpha_o: 0.1,
                defocus_m: 1e-6,
                probe_diameter_px: 256,
                sweep_rhos: (0..20).map(|i| i as f64 / 20.0).collect(),
                sweep_msnr_db: vec![None, Some(20.0), Some(26.0)],
            },
        }
    }
}
