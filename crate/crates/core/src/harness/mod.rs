//! Experiment orchestration: declarative configs, reproducible parallel
//! runs with file outputs, and the self-validation suite.

pub mod config;
pub mod run;
pub mod validate;

pub use config::{EstimatorChoice, ExperimentConfig, FitCfg, ProcessKind, CONFIG_SCHEMA};
pub use run::{
    merge_outcomes, read_record, replay, run_experiment, write_outputs, RunRecord, WallOutcome,
};
pub use validate::{
    run_validation, run_validation_filtered, CriterionOutcome, ValidationLevel, ValidationReport,
};
