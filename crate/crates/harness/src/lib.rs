//! Experiment runner for encrypted federated averaging: configuration, a toy
//! training task, traffic prediction, capacity tables, and metrics output.

pub mod capacity;
pub mod config;
pub mod error;
pub mod experiment;
pub mod selftest;
pub mod toy;
pub mod traffic;

pub use capacity::{capacity_table, format_table, CapacityRow};
pub use config::{ExperimentConfig, Overrides, ToyConfig, TrainerKind, TransportKind};
pub use error::HarnessError;
pub use experiment::{metrics_header, run_experiment, ExperimentReport, MetricsRecord, Summary};
pub use toy::ToyTask;
pub use traffic::{predict_traffic, TrafficPrediction};
