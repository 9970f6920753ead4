//! Experiment runner for the step-oscillator laboratory: configuration,
//! orchestration of the classical/spectral/statistical pipelines, and
//! plot-ready data export with reproducibility manifests.

pub mod config;
pub mod manifest;
pub mod outputs;
pub mod presets;
pub mod runner;

pub use config::ExperimentConfig;
pub use runner::{CommandOutcome, RunError};
