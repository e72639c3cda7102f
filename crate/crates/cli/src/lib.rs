//! Experiment driver for the federated-training simulator: config parsing,
//! single runs and parameter sweeps, and plot-ready CSV/JSON output.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{parse_config, parse_config_str, FileConfig, SweepSpec};
pub use output::{parse_metrics_csv, render_metrics_csv, time_to_target, RunSummary, CSV_HEADER};
