//! Experiment configuration, evaluation, sweeps, reports, and the command
//! line.

pub mod checks;
pub mod cli;
pub mod config;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod sweep;

pub use config::ExperimentConfig;
pub use metrics::{evaluate, Metrics};
pub use report::{emit_run_report, emit_sweep_report, Format};
pub use runner::{run_experiment, run_experiment_with, RunOutcome, RunReport};
pub use sweep::{
    run_sweep, sweep_comm_snr, sweep_output_size, sweep_sensing_snr, SweepKind, SweepPoint, SweepResult,
};
