//! Python bindings. Structured results cross the boundary as plain dicts and
//! lists with the same shape as the HTTP API's JSON.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde_json::json;

use adaptutor_core::bank::load_response_matrix;
use adaptutor_core::config::EngineConfig;
use adaptutor_core::irt::{calibrate_2pl, estimate_theta_eap, CalibrationOptions, ItemParams, QuadratureGrid, Response};
use adaptutor_core::knowledge::{bkt_update as core_bkt_update, hmm_forward, BktParams};
use adaptutor_core::policy::{map_presentation as core_map_presentation, MappingWeights};
use adaptutor_core::profile::{mh_update as core_mh_update, Gaussian, HierarchicalSpec};
use adaptutor_core::session::{
    parse_log, read_log, report_from_events, run_script, scripted_student, to_jsonl, Engine, JsonlLog, ResponseInput,
    Session,
};
use adaptutor_core::sim::{run_experiment, ExperimentConfig, ExperimentKind};

create_exception!(adaptutor, AdaptutorError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    AdaptutorError::new_err(e.to_string())
}

fn invalid(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(invalid)
}

/// Item bank, configuration and policies shared by sessions.
#[pyclass(name = "Engine", module = "adaptutor", frozen)]
struct PyEngine {
    inner: Arc<Engine>,
}

#[pymethods]
impl PyEngine {
    /// `config_toml` is engine config text; `overrides` is a dict merged on top.
    #[new]
    #[pyo3(signature = (config_toml=None, overrides=None, bank_path=None))]
    fn new(config_toml: Option<&str>, overrides: Option<&Bound<'_, PyAny>>, bank_path: Option<PathBuf>) -> PyResult<Self> {
        let mut cfg = match config_toml {
            Some(text) => EngineConfig::from_toml_str(text).map_err(invalid)?,
            None => EngineConfig::default(),
        };
        if let Some(o) = overrides {
            cfg = cfg.with_overrides(&from_py(o)?).map_err(invalid)?;
        }
        if bank_path.is_some() {
            cfg.bank_path = bank_path;
        }
        Ok(Self { inner: Arc::new(Engine::new(cfg).map_err(err)?) })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let cfg = EngineConfig::load(path).map_err(invalid)?;
        Ok(Self { inner: Arc::new(Engine::new(cfg).map_err(err)?) })
    }

    #[getter]
    fn constructs(&self) -> Vec<String> {
        self.inner.config.all_constructs()
    }

    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.config)
    }

    fn item_ids(&self) -> Vec<String> {
        self.inner.bank.items().iter().map(|i| i.id.clone()).collect()
    }

    /// Full item record, answer key included.
    fn item<'py>(&self, py: Python<'py>, item_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let item = self.inner.bank.get(item_id).ok_or_else(|| invalid(format!("no item {item_id}")))?;
        to_py(py, item)
    }

    fn session(&self, session_id: &str, seed: u64) -> PyResult<PySession> {
        PySession::new(self, session_id, seed, None)
    }
}

/// One learner's event-sourced session.
#[pyclass(name = "Session", module = "adaptutor")]
struct PySession {
    inner: Session,
}

#[pymethods]
impl PySession {
    /// With `log_path`, every event is also appended to that JSONL file.
    #[new]
    #[pyo3(signature = (engine, session_id, seed, log_path=None))]
    fn new(engine: &PyEngine, session_id: &str, seed: u64, log_path: Option<PathBuf>) -> PyResult<Self> {
        let mut inner = Session::create(Arc::clone(&engine.inner), session_id, seed).map_err(err)?;
        if let Some(path) = log_path {
            inner = inner.with_log(JsonlLog::create(path).map_err(err)?).map_err(err)?;
        }
        Ok(Self { inner })
    }

    /// Rebuild a session from JSONL text.
    #[staticmethod]
    fn replay(jsonl: &str) -> PyResult<Self> {
        let events = parse_log(jsonl).map_err(err)?;
        Ok(Self { inner: Session::replay(events).map_err(err)? })
    }

    /// Reopen a logged session; new events keep appending to the same file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let events = read_log(&path).map_err(err)?;
        let written = events.len();
        let inner = Session::replay(events).map_err(err)?;
        let inner = inner.with_log(JsonlLog::open_append(&path, written).map_err(err)?).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id().to_string()
    }

    #[getter]
    fn phase<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.phase())
    }

    #[getter]
    fn responses(&self) -> usize {
        self.inner.state().responses
    }

    fn next_step<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let step = self.inner.next_step().map_err(err)?;
        to_py(py, &step)
    }

    #[pyo3(signature = (answer, latency_ms, item_id=None, construct=None, free_text=None))]
    fn submit_response<'py>(
        &mut self,
        py: Python<'py>,
        answer: &str,
        latency_ms: u64,
        item_id: Option<String>,
        construct: Option<String>,
        free_text: Option<String>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let input = ResponseInput { item_id, construct, answer: answer.into(), latency_ms, free_text };
        let summary = self.inner.submit_response(&input).map_err(err)?;
        to_py(py, &summary)
    }

    /// Answer `responses` items as the built-in scripted student seeded by `seed`.
    fn run_script<'py>(&mut self, py: Python<'py>, seed: u64, responses: usize) -> PyResult<Bound<'py, PyAny>> {
        let mut student = scripted_student(&self.inner.engine().config, seed);
        let out = run_script(&mut self.inner, &mut student, responses).map_err(err)?;
        to_py(py, &out)
    }

    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.report())
    }

    fn state<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.state())
    }

    #[pyo3(signature = (start=0))]
    fn events<'py>(&self, py: Python<'py>, start: u64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.events_from(start))
    }

    fn to_jsonl(&self) -> String {
        to_jsonl(self.inner.events())
    }

    fn __repr__(&self) -> String {
        format!("Session(id={:?}, phase={:?}, responses={})", self.inner.id(), self.inner.phase(), self.inner.state().responses)
    }
}

fn item(a: f64, b: f64) -> PyResult<ItemParams> {
    ItemParams::new(a, b).map_err(invalid)
}

/// 2PL probability of a correct answer.
#[pyfunction]
fn prob_correct(a: f64, b: f64, theta: f64) -> PyResult<f64> {
    item(a, b)?.prob_correct(theta).map_err(invalid)
}

#[pyfunction]
fn fisher_information(a: f64, b: f64, theta: f64) -> PyResult<f64> {
    item(a, b)?.fisher_information(theta).map_err(invalid)
}

/// EAP ability from `(a, b, correct)` triples; returns `(mean, sd)`.
#[pyfunction]
#[pyo3(signature = (responses, prior_mean=0.0, prior_sd=1.0, points=61))]
fn estimate_eap(responses: Vec<(f64, f64, bool)>, prior_mean: f64, prior_sd: f64, points: usize) -> PyResult<(f64, f64)> {
    let grid = QuadratureGrid::normal(prior_mean, prior_sd, points, prior_mean - 5.0 * prior_sd, prior_mean + 5.0 * prior_sd)
        .map_err(invalid)?;
    let rs = responses
        .into_iter()
        .map(|(a, b, correct)| Ok(Response { params: item(a, b)?, correct }))
        .collect::<PyResult<Vec<_>>>()?;
    let est = estimate_theta_eap(&rs, &grid).map_err(invalid)?;
    Ok((est.theta_mean, est.theta_sd))
}

fn bkt(p_init: f64, p_learn: f64, p_forget: f64, p_guess: f64, p_slip: f64) -> PyResult<BktParams> {
    BktParams::new(p_init, p_learn, p_forget, p_guess, p_slip).map_err(invalid)
}

/// One mastery step: condition on the answer, then apply the transition.
#[pyfunction]
#[pyo3(signature = (mastery, correct, p_learn=0.15, p_forget=0.0, p_guess=0.2, p_slip=0.1))]
fn bkt_update(mastery: f64, correct: bool, p_learn: f64, p_forget: f64, p_guess: f64, p_slip: f64) -> PyResult<f64> {
    Ok(core_bkt_update(mastery, correct, &bkt(BktParams::default().p_init, p_learn, p_forget, p_guess, p_slip)?))
}

/// Predictive mastery after each observation.
#[pyfunction]
#[pyo3(signature = (observations, p_init=0.3, p_learn=0.15, p_forget=0.0, p_guess=0.2, p_slip=0.1))]
fn mastery_trace(
    observations: Vec<bool>,
    p_init: f64,
    p_learn: f64,
    p_forget: f64,
    p_guess: f64,
    p_slip: f64,
) -> PyResult<Vec<f64>> {
    Ok(hmm_forward(&observations, &bkt(p_init, p_learn, p_forget, p_guess, p_slip)?))
}

/// Text complexity and chunk size from working-memory and reading ability.
#[pyfunction]
fn map_presentation(theta_vwm: f64, theta_rc: f64) -> (f64, u32) {
    core_map_presentation(theta_vwm, theta_rc, &MappingWeights::default())
}

/// Random-walk Metropolis-Hastings on a Gaussian likelihood times a Gaussian prior.
#[pyfunction]
#[pyo3(signature = (likelihood, prior, proposal_sd, n_samples, seed, burn_in=0))]
fn mh_update<'py>(
    py: Python<'py>,
    likelihood: (f64, f64),
    prior: (f64, f64),
    proposal_sd: f64,
    n_samples: usize,
    seed: u64,
    burn_in: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let spec = HierarchicalSpec::new(
        Gaussian::new(likelihood.0, likelihood.1),
        Gaussian::new(prior.0, prior.1),
        proposal_sd,
        n_samples,
        seed,
    )
    .with_burn_in(burn_in);
    let r = core_mh_update(&spec).map_err(invalid)?;
    to_py(py, &json!({
        "posterior_mean": r.posterior_mean,
        "posterior_sd": r.posterior_sd,
        "acceptance_rate": r.acceptance_rate,
        "samples": r.samples,
    }))
}

/// Runs a named experiment; returns `{"csv": ..., "summaries": [...]}`.
#[pyfunction]
#[pyo3(signature = (experiment, config_toml=None, seed=None))]
fn simulate<'py>(py: Python<'py>, experiment: &str, config_toml: Option<&str>, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let kind: ExperimentKind = experiment.parse().map_err(invalid)?;
    let cfg = match config_toml {
        Some(text) => ExperimentConfig::from_toml_str(text).map_err(invalid)?,
        None => ExperimentConfig::default(),
    };
    let report = run_experiment(kind, &cfg, seed.unwrap_or(cfg.seed)).map_err(err)?;
    let csv = report.to_csv().map_err(err)?;
    to_py(py, &json!({ "csv": csv, "summaries": report.summaries }))
}

/// 2PL calibration of a response CSV.
#[pyfunction]
fn calibrate<'py>(py: Python<'py>, responses_path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let m = load_response_matrix(responses_path).map_err(invalid)?;
    let fit = calibrate_2pl(&m.rows, &m.item_ids, &QuadratureGrid::standard(), &CalibrationOptions::default()).map_err(err)?;
    let items: Vec<_> = m.item_ids.iter().zip(&fit.items).map(|(id, p)| json!({ "id": id, "a": p.a, "b": p.b })).collect();
    to_py(py, &json!({
        "items": items,
        "log_likelihood": fit.log_likelihood,
        "iterations": fit.iterations,
        "converged": fit.converged,
    }))
}

/// Report rebuilt from a JSONL session log.
#[pyfunction]
fn report_from_log<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let events = read_log(path).map_err(err)?;
    to_py(py, &report_from_events(&events).map_err(err)?)
}

#[pymodule]
fn adaptutor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AdaptutorError", m.py().get_type::<AdaptutorError>())?;
    m.add_class::<PyEngine>()?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(prob_correct, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_information, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_eap, m)?)?;
    m.add_function(wrap_pyfunction!(bkt_update, m)?)?;
    m.add_function(wrap_pyfunction!(mastery_trace, m)?)?;
    m.add_function(wrap_pyfunction!(map_presentation, m)?)?;
    m.add_function(wrap_pyfunction!(mh_update, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(report_from_log, m)?)?;
    Ok(())
}
