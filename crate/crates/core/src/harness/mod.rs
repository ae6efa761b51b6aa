//! Experiment driver: datasets, training runs, evaluation reports and the CLI.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod experiments;

pub use config::{DatasetSizes, ExperimentConfig, Preset, TestChannel, TrainChannel, DESK_BATCH};
pub use dataset::{generate_dataset, Dataset, Record, Split};
pub use eval::{
    evaluate_mse, ChannelEstimator, EvalReport, EvalRow, LmmseBaseline, LsEstimator, NetworkEstimator,
    OracleEstimator, ReportMetadata, ZeroEstimator, COLUMNS,
};
pub use experiments::{calibrate_lmmse, emit_complexity_table, sweep_n_ici, ComplexityRow, ComplexityTable, SweepRow, SweepTable};
