//! Offline commands: experiments, calibration, reports from logs.

use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use adaptutor_core::bank::{load_response_matrix, BankError};
use adaptutor_core::config::ConfigError;
use adaptutor_core::irt::{calibrate_2pl, CalibrationOptions, IrtError, QuadratureGrid};
use adaptutor_core::session::{read_log, report_from_events, SessionError, SessionReport};
use adaptutor_core::sim::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport, SimError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Irt(#[from] IrtError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Runs one experiment. `seed` overrides the config file's seed.
pub fn simulate(kind: ExperimentKind, config: Option<&Path>, seed: Option<u64>) -> Result<ExperimentReport, CliError> {
    let cfg = match config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    Ok(run_experiment(kind, &cfg, seed.unwrap_or(cfg.seed))?)
}

/// Path of the summary file written next to a series CSV.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}_summary.csv"))
}

pub fn write_report(report: &ExperimentReport, out: &Path) -> Result<PathBuf, CliError> {
    let io = |source| CliError::Io { path: out.display().to_string(), source };
    std::fs::write(out, report.to_csv()?).map_err(io)?;
    let summary = summary_path(out);
    std::fs::write(&summary, report.summaries_csv()?).map_err(io)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibratedItem {
    pub id: String,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationOutput {
    pub items: Vec<CalibratedItem>,
    pub students: usize,
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits 2PL parameters to a response CSV.
pub fn calibrate(responses: &Path) -> Result<CalibrationOutput, CliError> {
    let matrix = load_response_matrix(responses)?;
    let fit = calibrate_2pl(&matrix.rows, &matrix.item_ids, &QuadratureGrid::standard(), &CalibrationOptions::default())?;
    let items = matrix
        .item_ids
        .iter()
        .zip(&fit.items)
        .map(|(id, p)| CalibratedItem { id: id.clone(), a: p.a, b: p.b })
        .collect();
    Ok(CalibrationOutput {
        items,
        students: matrix.student_ids.len(),
        log_likelihood: fit.log_likelihood,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

/// Report reconstructed from a session log.
pub fn report(session_log: &Path) -> Result<SessionReport, CliError> {
    Ok(report_from_events(&read_log(session_log)?)?)
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}
