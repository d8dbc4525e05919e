//! Experiment driver behind the `ldfkit` binary: JSON config model, the
//! cross-validated benchmark pipeline, standalone regressor persistence,
//! and result-table reporting.

pub mod config;
pub mod pipeline;
pub mod regressor;
pub mod report;
