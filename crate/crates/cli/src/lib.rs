//! The `ptycho` command line: geometry tables, dataset simulation,
//! reconstruction, evaluation and resumable overlap × noise sweeps.

pub mod cli;
pub mod preset;
pub mod setup;
pub mod sweep;

pub use cli::{run, Cli, UsageError};
pub use preset::{Preset, PresetValues};
pub use setup::{ObjectSource, SimParams};
pub use sweep::{run_sweep, SweepOptions, SweepPlan};
