//! Command-line front end: argument parsing, analysis runs, reports and
//! artifact output.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod report;

pub use analysis::{run_analysis, Analysis, TauSummary};
pub use config::{AnalysisConfig, ContrastSpec, DataSource, Mode, OutputKind, PredictAt};
pub use error::{CliError, Result};
