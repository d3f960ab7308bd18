//! Scenario configuration, end-to-end orchestration and parameter sweeps.

mod config;
mod pipeline;
mod sweep;

pub use config::{FrontendConfig, GridConfig, Profile, ReceiverConfig, ScenarioConfig, FULL_SCALE_PAYLOAD};
pub use pipeline::{numeric_artifacts, run_scenario, simulate, Manifest, ReportBundle, ScenarioOutcome};
pub use sweep::{sweep, sweep_configs, sweep_to_dir, write_sweep_csv, SweepRow};
