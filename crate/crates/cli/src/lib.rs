//! Command-line experiment runner for the `indexforms` workbench.

pub mod config;
pub mod experiments;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, OutputFormat};
pub use experiments::{run, EXPERIMENTS};
pub use report::{Assertion, Report, Series};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error(transparent)]
    Core(#[from] indexforms_core::Error),
    #[error("output error: {0}")]
    Output(String),
}

/// Write the report in the chosen format plus one CSV file per series.
/// Returns the paths written.
pub fn write_outputs(
    report: &Report,
    dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>, CliError> {
    let io = |e: std::io::Error| CliError::Output(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let (ext, body) = match format {
        OutputFormat::Json => ("json", report.to_json()?),
        OutputFormat::Csv => ("csv", report.assertions_csv()?),
        OutputFormat::Markdown => ("md", report.to_markdown()),
    };
    let main = dir.join(format!("{}.{ext}", report.experiment));
    write_atomic(&main, body.as_bytes()).map_err(io)?;
    let mut written = vec![main];
    for s in &report.series {
        let path = dir.join(format!("{}_{}.csv", report.experiment, s.name));
        write_atomic(&path, Report::series_csv(s)?.as_bytes()).map_err(io)?;
        written.push(path);
    }
    Ok(written)
}

/// Write through a temporary file in the same directory so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
