//! Experiment orchestration: configs, the round loop, logs, exports and reports.

pub mod config;
pub mod export;
pub mod log;
pub mod report;
pub mod run;

pub use config::{ConfigError, RunConfig};
pub use export::{export_csv, verify_log, ExportError};
pub use log::{RunLog, LOG_FILE};
pub use report::{stats_report, StatsReport};
pub use run::{compute_baselines, resume_experiment, run_experiment, RunError, RunOptions, RunOutcome};
