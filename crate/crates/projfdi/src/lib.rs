//! File formats, scenario harness and report export on top of `projfdi-core`.

pub mod benchmark;
pub mod cli;
pub mod dto;
pub mod error;
pub mod export;
pub mod harness;

pub use error::{Error, Result};
pub use harness::{run_scenario, DetectionReport, ScenarioConfig};
