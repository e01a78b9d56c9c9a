//! Configuration, training loop, sweeps and curve output behind the CLI.

pub mod config;
pub mod record;
pub mod sweep;
pub mod train;

pub use config::{is_compatible, LossKind, OptimizerKind, RunConfig, SamplerKind, Task};
pub use record::{emit_curves, EvalRow, RunCounters, RunRecord, Split};
pub use sweep::{run_sweep, SweepAxis, SweepResult};
pub use train::{resume_training, run_training, Trainer};

/// Reads and validates a configuration file.
pub fn parse_config(path: &std::path::Path) -> crate::Result<RunConfig> {
    RunConfig::from_path(path)
}
