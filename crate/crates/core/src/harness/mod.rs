//! Experiment plumbing: configuration, dataset generation, gradient checks and
//! the drivers behind each CLI mode.

pub mod config;
pub mod data;
pub mod experiments;

pub use config::{ExperimentConfig, Mode, PredictorKind};
pub use data::{gen_dataset, grad_check_blackbox, grad_check_greybox, nominal_incoming, GradCheckReport};
pub use experiments::{run_experiment, ExperimentOutput};
