//! Python bindings. Documents cross the boundary as plain Python objects
//! (dicts, lists, numbers) by way of the `json` module.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use serde_json::Value;

use audit_harness::agents::{Agent, DriftSpec, DriftyAgent, PolicyScript, ScriptedAgent, TrialContext};
use audit_harness::benchmark::{self, CaseFixture, TaskId};
use audit_harness::canonical;
use audit_harness::determinism::{self, DeterminismReport};
use audit_harness::faithfulness::{self, EvidenceItem};
use audit_harness::model::{AgentConfig, Architecture, Trial};
use audit_harness::report::{self, ReportFormat};
use audit_harness::runner::{self, RunConfig};
use audit_harness::stats;
use audit_harness::store::{Integrity, TranscriptStore, TrialFilter};
use audit_harness::stress;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse<T: serde::de::DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    serde_json::from_value(from_py(obj)?).map_err(value_err)
}

fn task(name: &str) -> PyResult<TaskId> {
    name.parse().map_err(value_err)
}

fn run_err(e: runner::RunError) -> PyErr {
    match e {
        runner::RunError::Io { .. } => PyIOError::new_err(e.to_string()),
        runner::RunError::Config(_) | runner::RunError::Parse { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Canonical JSON text of a document.
#[pyfunction]
fn canonicalize(doc: &Bound<'_, PyAny>) -> PyResult<String> {
    canonical::canonical_string(&from_py(doc)?).map_err(value_err)
}

/// Hex SHA-256 of a document's canonical bytes.
#[pyfunction]
fn digest(doc: &Bound<'_, PyAny>) -> PyResult<String> {
    Ok(canonical::digest(&from_py(doc)?).map_err(value_err)?.to_hex())
}

#[pyfunction]
#[pyo3(signature = (task_id, n, seed=42))]
fn generate_cases(py: Python<'_>, task_id: &str, n: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let cases = benchmark::generate_cases(task(task_id)?, n, seed).map_err(value_err)?;
    to_py(py, &cases)
}

#[pyfunction]
fn execute_tool(py: Python<'_>, case: &Bound<'_, PyAny>, tool: &str, args: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let case: CaseFixture = parse(case)?;
    let result = benchmark::execute_tool(&case, tool, &from_py(args)?).map_err(value_err)?;
    to_py(py, &result)
}

/// Run one trial of the scripted (or, with `q > 0`, drifty) agent.
#[pyfunction]
#[pyo3(signature = (case, run_index=0, schema_first=true, q=0.0, drift_seed=0))]
fn run_agent(
    py: Python<'_>,
    case: &Bound<'_, PyAny>,
    run_index: usize,
    schema_first: bool,
    q: f64,
    drift_seed: u64,
) -> PyResult<Py<PyAny>> {
    let case: CaseFixture = parse(case)?;
    let mode = if schema_first { Architecture::SchemaFirst } else { Architecture::Unconstrained };
    let policy = PolicyScript::new(case.task_id, mode);
    let agent: Box<dyn Agent> = if q > 0.0 {
        Box::new(DriftyAgent { policy, drift: DriftSpec::flips(q, drift_seed) })
    } else {
        Box::new(ScriptedAgent { policy })
    };
    let ctx = TrialContext {
        run_id: format!("{}-py-r{run_index}", case.case_id),
        run_index,
        config: AgentConfig::local(agent.name(), mode),
        perturbation: None,
    };
    let trial = agent.run(&case, &ctx).map_err(value_err)?;
    to_py(py, &trial)
}

/// Determinism of a list of trials of one case, in run order.
#[pyfunction]
fn grade_trials(py: Python<'_>, trials: Vec<Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
    let mut parsed = Vec::with_capacity(trials.len());
    for (i, t) in trials.iter().enumerate() {
        let mut trial: Trial = parse(t)?;
        trial.run_index = i;
        parsed.push(trial);
    }
    to_py(py, &DeterminismReport::grade(&parsed).map_err(value_err)?)
}

#[pyfunction]
fn pass_at_k(n: u64, s: u64, k: u64) -> PyResult<f64> {
    determinism::pass_at_k(n, s, k).map_err(value_err)
}

#[pyfunction]
fn pass_all_k(n: u64, s: u64, k: u64) -> PyResult<f64> {
    determinism::pass_all_k(n, s, k).map_err(value_err)
}

/// Share of claims aligned with at least one evidence text.
#[pyfunction]
fn evidence_grounding(claims: Vec<String>, evidence: Vec<String>) -> f64 {
    let items: Vec<EvidenceItem> = evidence.iter().enumerate().map(|(i, t)| EvidenceItem::new(i, t.as_str())).collect();
    faithfulness::evidence_grounding(&claims, &items).value()
}

/// Grounding of a trial's decision against its own trajectory; `None`
/// when the decision makes no claims.
#[pyfunction]
fn trial_grounding(trial: &Bound<'_, PyAny>) -> PyResult<Option<f64>> {
    let trial: Trial = parse(trial)?;
    let Some(decision) = &trial.decision else { return Ok(None) };
    let g = faithfulness::evidence_grounding(
        &faithfulness::extract_claims(decision),
        &faithfulness::evidence_from_trajectory(&trial.steps),
    );
    Ok((!g.vacuous).then(|| g.value()))
}

#[pyfunction]
fn jaccard(a: &str, b: &str) -> f64 {
    let (fa, fb) = (faithfulness::extract_features(a), faithfulness::extract_features(b));
    faithfulness::jaccard(&fa.tokens, &fb.tokens)
}

#[pyfunction]
#[pyo3(signature = (successes, n, confidence=0.95))]
fn wilson_interval(successes: u64, n: u64, confidence: f64) -> PyResult<(f64, f64)> {
    let iv = stats::wilson_interval(successes, n, confidence).map_err(value_err)?;
    Ok((iv.lo, iv.hi))
}

#[pyfunction]
fn scaling_factor(sigma2_drift: f64) -> f64 {
    stats::scaling_factor(sigma2_drift)
}

#[pyfunction]
fn validation_sample_size(sigma_drift: f64, epsilon: f64, phi: f64) -> PyResult<u64> {
    stats::validation_sample_size(sigma_drift, epsilon, phi).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (case_level_dec_det, api=false))]
fn classify_tier(case_level_dec_det: f64, api: bool) -> &'static str {
    stats::classify_with_provenance(case_level_dec_det, api).as_str()
}

/// `(delta, robust)` for a baseline and perturbed decision determinism.
#[pyfunction]
fn determinism_delta(baseline: f64, perturbed: f64) -> (f64, bool) {
    let d = stress::determinism_delta(baseline, perturbed);
    (d.delta, d.robust)
}

/// Fault a case's tool responses; returns `(case, manifest)`.
#[pyfunction]
#[pyo3(signature = (case, rate=0.10, seed=0))]
fn inject_dq_fault(py: Python<'_>, case: &Bound<'_, PyAny>, rate: f64, seed: u64) -> PyResult<(Py<PyAny>, Py<PyAny>)> {
    let mut case: CaseFixture = parse(case)?;
    let (table, manifest) = stress::inject_dq_fault(&case.tool_response_table, rate, seed).map_err(value_err)?;
    case.tool_response_table = table;
    case.refresh_evidence_texts();
    Ok((to_py(py, &case)?, to_py(py, &manifest)?))
}

#[pyfunction]
#[pyo3(signature = (case, sigma_multiplier=3.0, seed=0))]
fn market_shock(py: Python<'_>, case: &Bound<'_, PyAny>, sigma_multiplier: f64, seed: u64) -> PyResult<Py<PyAny>> {
    let case: CaseFixture = parse(case)?;
    to_py(py, &stress::market_shock_case(&case, sigma_multiplier, seed).map_err(value_err)?)
}

/// Execute a run described by a RunConfig document into `out`; returns the reports.
#[pyfunction]
#[pyo3(signature = (config, out, workers=None))]
fn run_evaluation(py: Python<'_>, config: &Bound<'_, PyAny>, out: PathBuf, workers: Option<usize>) -> PyResult<Py<PyAny>> {
    let cfg: RunConfig = parse(config)?;
    let reports = py.detach(|| runner::run_evaluation(&cfg, &out, workers)).map_err(run_err)?;
    to_py(py, &reports)
}

#[pyfunction]
fn grade_store(py: Python<'_>, out: PathBuf) -> PyResult<Py<PyAny>> {
    let reports = py.detach(|| runner::grade_store(&out)).map_err(run_err)?;
    to_py(py, &reports)
}

/// Re-grade `out` and write the report tables; returns the paths written.
#[pyfunction]
#[pyo3(signature = (out, format="md"))]
fn emit_report(out: PathBuf, format: &str) -> PyResult<Vec<PathBuf>> {
    let format: ReportFormat = format.parse().map_err(PyValueError::new_err)?;
    let reports = runner::grade_store(&out).map_err(run_err)?;
    report::emit_report(&reports, format, &out.join("report")).map_err(|e| PyIOError::new_err(e.to_string()))
}

/// `None` when every chain verifies, else the first bad sequence number.
#[pyfunction]
fn verify(out: PathBuf) -> PyResult<Option<u64>> {
    match runner::verify(&out).map_err(run_err)? {
        Integrity::Ok => Ok(None),
        Integrity::FirstBadSeq(seq) => Ok(Some(seq)),
    }
}

/// Append-only transcript store.
#[pyclass(name = "TranscriptStore")]
struct PyTranscriptStore {
    inner: TranscriptStore,
}

#[pymethods]
impl PyTranscriptStore {
    #[new]
    fn new(root: PathBuf) -> PyResult<Self> {
        let inner = TranscriptStore::open(root).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(PyTranscriptStore { inner })
    }

    fn append(&self, trial: &Bound<'_, PyAny>) -> PyResult<u64> {
        let trial: Trial = parse(trial)?;
        self.inner.append_trial(&trial).map_err(value_err)
    }

    #[pyo3(signature = (case_id=None, perturbation=None))]
    fn load(&self, py: Python<'_>, case_id: Option<String>, perturbation: Option<String>) -> PyResult<Py<PyAny>> {
        let filter = TrialFilter { case_id, perturbation, config: None };
        let trials = self.inner.load_trials(&filter).map_err(value_err)?;
        to_py(py, &trials)
    }

    fn verify(&self) -> PyResult<Option<u64>> {
        match self.inner.verify_integrity().map_err(value_err)? {
            Integrity::Ok => Ok(None),
            Integrity::FirstBadSeq(seq) => Ok(Some(seq)),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pymodule]
fn audit_harness_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTranscriptStore>()?;
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(digest, m)?)?;
    m.add_function(wrap_pyfunction!(generate_cases, m)?)?;
    m.add_function(wrap_pyfunction!(execute_tool, m)?)?;
    m.add_function(wrap_pyfunction!(run_agent, m)?)?;
    m.add_function(wrap_pyfunction!(grade_trials, m)?)?;
    m.add_function(wrap_pyfunction!(pass_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(pass_all_k, m)?)?;
    m.add_function(wrap_pyfunction!(evidence_grounding, m)?)?;
    m.add_function(wrap_pyfunction!(trial_grounding, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_factor, m)?)?;
    m.add_function(wrap_pyfunction!(validation_sample_size, m)?)?;
    m.add_function(wrap_pyfunction!(classify_tier, m)?)?;
    m.add_function(wrap_pyfunction!(determinism_delta, m)?)?;
    m.add_function(wrap_pyfunction!(inject_dq_fault, m)?)?;
    m.add_function(wrap_pyfunction!(market_shock, m)?)?;
    m.add_function(wrap_pyfunction!(run_evaluation, m)?)?;
    m.add_function(wrap_pyfunction!(grade_store, m)?)?;
    m.add_function(wrap_pyfunction!(emit_report, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("TASKS", TaskId::ALL.iter().map(|t| t.as_str()).collect::<Vec<_>>())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_round_trips_documents() {
        Python::initialize();
        Python::attach(|py| {
            let doc = py.eval(c"{'b': [1, 2.5, None], 'a': 'x'}", None, None).unwrap();
            assert_eq!(canonicalize(&doc).unwrap(), r#"{"a":"x","b":[1,2.5,null]}"#);
            let back = to_py(py, &from_py(&doc).unwrap()).unwrap();
            assert!(back.bind(py).eq(&doc).unwrap());
        });
    }

    #[test]
    fn scripted_trial_from_python_objects() {
        Python::initialize();
        Python::attach(|py| {
            let cases = generate_cases(py, "compliance", 2, 1).unwrap();
            let first = cases.bind(py).get_item(0).unwrap();
            let a = run_agent(py, &first, 0, true, 0.0, 0).unwrap();
            let b = run_agent(py, &first, 1, true, 0.0, 0).unwrap();
            let report = grade_trials(py, vec![a.into_bound(py), b.into_bound(py)]).unwrap();
            let all: bool = report.bind(py).get_item("all_identical_decision").unwrap().extract().unwrap();
            assert!(all);
        });
    }
}
