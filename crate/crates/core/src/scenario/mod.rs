//! Config-driven experiment runs: prepare a register, let it wait under the
//! configured channels, measure, analyse, and collect report files.
//!
//! Every run is a pure function of its [`ExperimentConfig`]; random draws come
//! from substreams of the configured seed, so identical configs give
//! byte-identical [`Artifacts`].

mod config;
mod report;
mod runner;

pub use config::{Detection, ExperimentConfig, InitialState, ScenarioKind};
pub use report::{
    Artifacts, CharacterizeReport, DecayReport, DecayRow, DfsReport, ScalingRate, ScalingReport, ScalingRow,
};
pub use runner::{
    coherence_time, run_dfs_contrast, run_ghz_characterize, run_ghz_decay, run_scaling_study, run_scenario,
};
