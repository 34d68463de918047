//! Experiment orchestration for importance-aware M-QAM.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod sweep;
pub mod synth;
pub mod verify;

pub use error::{CliError, Result};
