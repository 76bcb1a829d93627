//! Config files, built-in campaigns and the sweep runner.

pub mod config;
pub mod preset;
pub mod runner;

pub use config::{AnalysisRequest, ExperimentConfig, MatrixSource, RunPlan, RunSpec, StateSource};
pub use preset::{build_preset, ExperimentPreset, PresetName, PresetOverrides};
pub use runner::{plan_digest, relative_norm_growth, run_experiment, RunManifest, RunOptions, RunRecord, RunSidecar};
