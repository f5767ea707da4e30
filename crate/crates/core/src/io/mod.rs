//! Configuration, graph serialization, runs, traces and self-checks.

mod config;
mod generate;
mod graph;
mod run;
mod selfcheck;

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

pub use config::{
    load_config, parse_config, GenerateSpec, LinearBlock, OutputSpec, RunConfig, Schedule, ScheduleMode, UpdateConfig,
};
pub use generate::{gen_graph, test_pattern, FieldInit};
pub use graph::{
    graph_to_json, load_graph, parse_graph, rep_entries, rep_space, save_graph, GraphDocument, NodeRecord, RepEntry,
};
pub use run::{
    config_hash, initial_field, run, run_with_field, step_equivariance, trace_csv, EnergySummary, ReadoutSummary,
    RunSummary, TraceRecord, SPOT_CHECK_TOL,
};
pub use selfcheck::{selfcheck, CheckResult, SelfCheckReport, Suite};

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Writes `contents`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub(crate) fn parse_json<T: DeserializeOwned>(text: &str, source_name: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        source_name: source_name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}
