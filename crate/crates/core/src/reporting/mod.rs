//! Experiment configuration, trace persistence, multi-seed summaries and
//! CSV/SVG export.

mod config;
mod export;
mod summary;
mod trace;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{parse_config, ExperimentConfig, RunOverride};
pub use export::{export, render_csv, render_svg, ExportFormat};
pub use summary::{quantile, summarize, trace_value_at, BudgetMode, SummaryCell, SummaryTable, BUDGET_FRACTIONS};
pub use trace::{append_trace_record, read_trace, read_trace_dir, trace_file_name};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("config is not valid TOML: {0}")]
    ConfigSyntax(#[from] toml::de::Error),
    #[error("config could not be serialized: {0}")]
    ConfigWrite(#[from] toml::ser::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}, line {line}: {source}", path.display())]
    BadRecord { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("record could not be serialized: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error("trace {0} is empty")]
    EmptyTrace(String),
    #[error("no traces to summarize")]
    NoTraces,
    #[error("unknown format `{0}`; valid formats: csv, svg")]
    UnknownFormat(String),
    #[error("unknown budget mode `{0}`; valid modes: iterations, cost")]
    UnknownBudgetMode(String),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl ReportError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
