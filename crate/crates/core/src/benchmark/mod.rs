//! The three benchmark tasks: definitions, fixtures, mock tool execution,
//! accuracy grading and SLO gates.

pub mod generate;
pub mod rules;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::canonical::{self, CanonicalizationError, Digest};
use crate::determinism::{DeterminismReport, Fraction};
use crate::faithfulness::{flatten_leaves, render_leaf, ConstraintSpec};
use crate::model::Trial;

pub use generate::{generate_cases, MAX_CASES};

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("out of range: {0}")]
    Range(String),
    #[error("tool {tool:?} is not part of {task}")]
    UnknownTool { task: TaskId, tool: String },
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error(transparent)]
    Canonical(#[from] CanonicalizationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    ComplianceTriage,
    PortfolioConstraint,
    DataopsException,
}

impl TaskId {
    pub const ALL: [TaskId; 3] =
        [TaskId::ComplianceTriage, TaskId::PortfolioConstraint, TaskId::DataopsException];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskId::ComplianceTriage => "compliance_triage",
            TaskId::PortfolioConstraint => "portfolio_constraint",
            TaskId::DataopsException => "dataops_exception",
        }
    }

    fn case_prefix(self) -> &'static str {
        match self {
            TaskId::ComplianceTriage => "CT",
            TaskId::PortfolioConstraint => "PC",
            TaskId::DataopsException => "DO",
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskId {
    type Err = BenchmarkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "compliance_triage" | "compliance" => Ok(TaskId::ComplianceTriage),
            "portfolio_constraint" | "portfolio" => Ok(TaskId::PortfolioConstraint),
            "dataops_exception" | "dataops" => Ok(TaskId::DataopsException),
            other => Err(BenchmarkError::UnknownTask(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolSchema {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub result_fields: &'static [&'static str],
}

/// Thresholds a configuration must meet to pass audit. All inclusive except
/// the stress bound, which is strict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SloSpec {
    pub min_dec_det_escalate: f64,
    pub min_trajectory_det: f64,
    pub min_evidence_grounding: f64,
    pub max_stress_delta: f64,
}

impl Default for SloSpec {
    fn default() -> Self {
        SloSpec {
            min_dec_det_escalate: 0.95,
            min_trajectory_det: 0.90,
            min_evidence_grounding: 0.80,
            max_stress_delta: 0.10,
        }
    }
}

impl SloSpec {
    /// Named profiles accepted by the CLI.
    pub fn profile(name: &str) -> Option<SloSpec> {
        let base = SloSpec::default();
        match name {
            "default" => Some(base),
            "tier1" => Some(SloSpec { min_dec_det_escalate: 1.0, min_trajectory_det: 1.0, ..base }),
            "tier2" => Some(SloSpec { min_dec_det_escalate: 0.80, min_trajectory_det: 0.50, ..base }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskDefinition {
    pub task_id: TaskId,
    pub decision_space: Vec<String>,
    pub tool_schemas: Vec<ToolSchema>,
    pub slo: SloSpec,
    /// Label counts at 50 cases, in decision-space order.
    pub ground_truth_mix: Vec<(String, u64)>,
    /// Category counts at 50 cases.
    pub categories: Vec<(String, u64)>,
    /// Labels from most to least severe; breaks majority-vote ties.
    pub severity_order: Vec<String>,
    /// Ground-truth label whose cases carry the determinism SLO.
    pub critical_label: String,
}

impl TaskDefinition {
    pub fn tool_names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.tool_schemas.iter().map(|t| t.name)
    }

    pub fn has_tool(&self, name: &str) -> bool {
        self.tool_schemas.iter().any(|t| t.name == name)
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.decision_space.iter().position(|l| l == label)
    }
}

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn counts(xs: &[(&str, u64)]) -> Vec<(String, u64)> {
    xs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

const COMPLIANCE_TOOLS: [ToolSchema; 3] = [
    ToolSchema {
        name: "check_sanctions_list",
        args: &["entity_name"],
        result_fields: &["match_status", "match_score", "list_type"],
    },
    ToolSchema {
        name: "get_customer_profile",
        args: &["customer_id"],
        result_fields: &["risk_rating", "kyc_status", "account_age", "pep", "sector", "last_review_date"],
    },
    ToolSchema {
        name: "calculate_risk_score",
        args: &["transaction_id"],
        result_fields: &["score", "factors", "threshold_status", "amount", "near_threshold_txn_7d"],
    },
];

const PORTFOLIO_TOOLS: [ToolSchema; 5] = [
    ToolSchema {
        name: "get_portfolio_positions",
        args: &["portfolio_id"],
        result_fields: &["holdings", "sector_weights", "cash_weight", "valuation_date"],
    },
    ToolSchema {
        name: "get_market_data",
        args: &["ticker"],
        result_fields: &["price", "volume", "volatility", "beta", "sector", "as_of_date"],
    },
    ToolSchema {
        name: "check_concentration_limits",
        args: &["portfolio_id", "ticker", "proposed_weight"],
        result_fields: &["compliant", "limit", "current", "proposed"],
    },
    ToolSchema {
        name: "calculate_var",
        args: &["portfolio_id", "horizon", "confidence"],
        result_fields: &["var", "cvar", "contribution"],
    },
    ToolSchema {
        name: "get_regulatory_constraints",
        args: &["account_type"],
        result_fields: &["constraints", "thresholds"],
    },
];

const DATAOPS_TOOLS: [ToolSchema; 6] = [
    ToolSchema {
        name: "get_exception_details",
        args: &["exception_id"],
        result_fields: &["type", "field", "value", "rule_violated", "affected_records", "detected_at"],
    },
    ToolSchema {
        name: "query_reference_data",
        args: &["field", "value"],
        result_fields: &["valid", "canonical_value", "alternatives"],
    },
    ToolSchema {
        name: "get_historical_fixes",
        args: &["exception_type"],
        result_fields: &["fixes", "avg_resolution_time"],
    },
    ToolSchema {
        name: "validate_fix",
        args: &["exception_id", "proposed_fix"],
        result_fields: &["valid", "conflicts", "warnings"],
    },
    ToolSchema {
        name: "apply_fix",
        args: &["exception_id", "fix"],
        result_fields: &["success", "audit_trail"],
    },
    ToolSchema {
        name: "escalate_to_human",
        args: &["exception_id", "reason"],
        result_fields: &["ticket_id", "assigned_to"],
    },
];

pub fn task_definition(task: TaskId) -> TaskDefinition {
    let slo = SloSpec::default();
    match task {
        TaskId::ComplianceTriage => TaskDefinition {
            task_id: task,
            decision_space: labels(&["ESCALATE", "DISMISS", "INVESTIGATE"]),
            tool_schemas: COMPLIANCE_TOOLS.to_vec(),
            slo,
            ground_truth_mix: counts(&[("ESCALATE", 15), ("DISMISS", 25), ("INVESTIGATE", 10)]),
            categories: counts(&[
                ("sanctions", 8),
                ("pep", 4),
                ("structuring", 6),
                ("high_value", 7),
                ("high_risk_sector", 10),
                ("standard", 15),
            ]),
            severity_order: labels(&["ESCALATE", "INVESTIGATE", "DISMISS"]),
            critical_label: "ESCALATE".into(),
        },
        TaskId::PortfolioConstraint => TaskDefinition {
            task_id: task,
            decision_space: labels(&["APPROVE", "REJECT", "MODIFY"]),
            tool_schemas: PORTFOLIO_TOOLS.to_vec(),
            slo,
            ground_truth_mix: counts(&[("APPROVE", 25), ("REJECT", 18), ("MODIFY", 7)]),
            categories: counts(&[
                ("position_limit", 12),
                ("sector_cap", 6),
                ("liquidity", 8),
                ("cash_reserve", 3),
                ("clean", 21),
            ]),
            severity_order: labels(&["REJECT", "MODIFY", "APPROVE"]),
            critical_label: "REJECT".into(),
        },
        TaskId::DataopsException => TaskDefinition {
            task_id: task,
            decision_space: labels(&["AUTO_FIX", "ESCALATE", "QUARANTINE"]),
            tool_schemas: DATAOPS_TOOLS.to_vec(),
            slo,
            ground_truth_mix: counts(&[("AUTO_FIX", 30), ("ESCALATE", 15), ("QUARANTINE", 5)]),
            categories: counts(&[
                ("format_error", 15),
                ("business_rule", 18),
                ("reference_mismatch", 10),
                ("missing_field", 7),
            ]),
            severity_order: labels(&["QUARANTINE", "ESCALATE", "AUTO_FIX"]),
            critical_label: "ESCALATE".into(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolResponse {
    pub tool: String,
    pub args: Value,
    pub result: Value,
}

/// Mock tool backend of one case, keyed by (tool, canonical args).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ToolResponseTable {
    pub entries: Vec<ToolResponse>,
}

impl ToolResponseTable {
    pub fn insert(&mut self, tool: &str, args: Value, result: Value) {
        let key = canonical::canonicalize(&args).ok();
        if let Some(e) = self
            .entries
            .iter_mut()
            .find(|e| e.tool == tool && canonical::canonicalize(&e.args).ok() == key)
        {
            e.result = result;
        } else {
            self.entries.push(ToolResponse { tool: tool.to_string(), args, result });
        }
    }

    pub fn lookup(&self, tool: &str, args: &Value) -> Option<&Value> {
        let key = canonical::canonicalize(args).ok()?;
        self.entries
            .iter()
            .find(|e| e.tool == tool && canonical::canonicalize(&e.args).ok().as_ref() == Some(&key))
            .map(|e| &e.result)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFixture {
    pub case_id: String,
    pub task_id: TaskId,
    pub category: String,
    pub query: String,
    /// Parameters the agent sees alongside the query.
    pub inputs: BTreeMap<String, Value>,
    pub as_of: String,
    pub tool_response_table: ToolResponseTable,
    pub constraints: Vec<ConstraintSpec>,
    pub facts: BTreeMap<String, f64>,
    pub ground_truth: String,
    pub evidence_texts: Vec<String>,
    pub rules_version: String,
}

impl CaseFixture {
    pub fn digest(&self) -> Result<Digest, BenchmarkError> {
        Ok(Digest::of(&canonical::canonical_bytes_of(self)?))
    }

    /// Recompute the rendered evidence from the response table.
    pub fn refresh_evidence_texts(&mut self) {
        self.evidence_texts = self.tool_response_table.entries.iter().map(|e| render_result(&e.result)).collect();
    }
}

/// Whole-result rendering shared by fixtures and the evidence extractor.
pub fn render_result(result: &Value) -> String {
    flatten_leaves(result)
        .iter()
        .map(|(p, v)| render_leaf(p, v))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Pure lookup against the case's mock backend. Unknown argument sets give a
/// well-formed `not_found` document.
pub fn execute_tool(case: &CaseFixture, tool: &str, args: &Value) -> Result<Value, BenchmarkError> {
    let def = task_definition(case.task_id);
    if !def.has_tool(tool) {
        return Err(BenchmarkError::UnknownTool { task: case.task_id, tool: tool.to_string() });
    }
    Ok(case
        .tool_response_table
        .lookup(tool, args)
        .cloned()
        .unwrap_or_else(|| json!({"status": "not_found", "tool": tool, "args": args})))
}

/// Write each fixture as `<digest>.json` in canonical form. Existing files
/// are left alone: same name means same bytes.
pub fn write_fixtures(dir: &Path, cases: &[CaseFixture]) -> Result<Vec<PathBuf>, BenchmarkError> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(cases.len());
    for case in cases {
        let bytes = canonical::canonical_bytes_of(case)?;
        let path = dir.join(format!("{}.json", Digest::of(&bytes)));
        if !path.exists() {
            fs::write(&path, &bytes)?;
        }
        paths.push(path);
    }
    Ok(paths)
}

/// Read a fixture and check it against its digest name when it has one.
pub fn load_fixture(path: &Path) -> Result<CaseFixture, BenchmarkError> {
    let bytes = fs::read(path)?;
    let case: CaseFixture =
        serde_json::from_slice(&bytes).map_err(|e| BenchmarkError::Fixture(format!("{}: {e}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    if let Some(expected) = Digest::from_hex(stem) {
        if case.digest()? != expected {
            return Err(BenchmarkError::Fixture(format!("{} does not match its digest", path.display())));
        }
    }
    Ok(case)
}

/// All fixtures in a directory, ordered by case id.
pub fn load_fixtures(dir: &Path) -> Result<Vec<CaseFixture>, BenchmarkError> {
    let mut cases = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            cases.push(load_fixture(&path)?);
        }
    }
    cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    Ok(cases)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub per_run_accuracy: Fraction,
    pub majority_vote_accuracy: Fraction,
    pub majority: BTreeMap<String, Option<String>>,
}

/// Most frequent label; ties go to the most severe.
pub fn majority_vote<'a>(votes: impl IntoIterator<Item = &'a str>, severity_order: &[String]) -> Option<String> {
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for v in votes {
        *tally.entry(v).or_default() += 1;
    }
    let top = *tally.values().max()?;
    let rank = |l: &str| severity_order.iter().position(|s| s == l).unwrap_or(usize::MAX);
    tally
        .into_iter()
        .filter(|(_, c)| *c == top)
        .min_by_key(|(l, _)| (rank(l), *l))
        .map(|(l, _)| l.to_string())
}

/// Per-run and per-case (majority vote) accuracy. Errored runs are left out;
/// a case with no usable run counts as wrong.
pub fn grade_accuracy(
    trials_by_case: &BTreeMap<String, Vec<Trial>>,
    ground_truth: &BTreeMap<String, String>,
    severity_order: &[String],
) -> AccuracyReport {
    let (mut run_ok, mut run_n, mut case_ok) = (0u64, 0u64, 0u64);
    let mut majority = BTreeMap::new();
    for (case_id, trials) in trials_by_case {
        let truth = ground_truth.get(case_id);
        let labels: Vec<&str> = trials
            .iter()
            .filter(|t| t.is_completed())
            .filter_map(|t| t.decision.as_ref().map(|d| d.label.as_str()))
            .collect();
        run_n += labels.len() as u64;
        run_ok += labels.iter().filter(|l| Some(**l) == truth.map(String::as_str)).count() as u64;
        let vote = majority_vote(labels.iter().copied(), severity_order);
        if vote.is_some() && vote.as_ref() == truth {
            case_ok += 1;
        }
        majority.insert(case_id.clone(), vote);
    }
    AccuracyReport {
        per_run_accuracy: Fraction::new(run_ok, run_n.max(1)),
        majority_vote_accuracy: Fraction::new(case_ok, (trials_by_case.len() as u64).max(1)),
        majority,
    }
}

/// Measured quantities the SLO gate compares against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SloMeasurements {
    /// Mean decision determinism over critical-label cases; `None` if there
    /// are none.
    pub dec_det_escalate: Option<f64>,
    pub trajectory_det: Option<f64>,
    /// Mean grounding over non-vacuous decisions.
    pub evidence_grounding: Option<f64>,
    /// Largest ΔDet over gated perturbations.
    pub max_stress_delta: Option<f64>,
}

impl SloMeasurements {
    pub fn collect(
        reports: &[DeterminismReport],
        ground_truth: &BTreeMap<String, String>,
        critical_label: &str,
        grounding: &[f64],
        stress_deltas: &[f64],
    ) -> Self {
        fn mean(xs: &[f64]) -> Option<f64> {
            (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
        }
        let critical: Vec<f64> = reports
            .iter()
            .filter(|r| ground_truth.get(&r.case_id).map(String::as_str) == Some(critical_label))
            .map(|r| r.dec_det.value())
            .collect();
        let traj: Vec<f64> = reports.iter().map(|r| r.act_det.value()).collect();
        SloMeasurements {
            dec_det_escalate: mean(&critical),
            trajectory_det: mean(&traj),
            evidence_grounding: mean(grounding),
            max_stress_delta: stress_deltas.iter().copied().reduce(f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SloViolation {
    pub metric: String,
    pub got: f64,
    pub need: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SloOutcome {
    pub pass: bool,
    pub violations: Vec<SloViolation>,
}

/// Compare measurements to thresholds. Absent measurements are not gated.
pub fn check_slo(m: &SloMeasurements, slo: &SloSpec) -> SloOutcome {
    let mut violations = Vec::new();
    let mut at_least = |metric: &str, got: Option<f64>, need: f64| {
        if let Some(got) = got {
            if got < need {
                violations.push(SloViolation { metric: metric.into(), got, need });
            }
        }
    };
    at_least("dec_det_escalate", m.dec_det_escalate, slo.min_dec_det_escalate);
    at_least("trajectory_det", m.trajectory_det, slo.min_trajectory_det);
    at_least("evidence_grounding", m.evidence_grounding, slo.min_evidence_grounding);
    if let Some(d) = m.max_stress_delta {
        if d >= slo.max_stress_delta {
            violations.push(SloViolation { metric: "stress_delta".into(), got: d, need: slo.max_stress_delta });
        }
    }
    SloOutcome { pass: violations.is_empty(), violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AgentConfig, Architecture, Decision};

    fn trial(case: &str, i: usize, label: &str) -> Trial {
        Trial {
            run_id: format!("{case}-{i}"),
            case_id: case.into(),
            config: AgentConfig::local("m", Architecture::SchemaFirst),
            perturbation: None,
            steps: vec![],
            decision: Some(Decision::label(label)),
            error: None,
            t_start: String::new(),
            t_end: String::new(),
            run_index: i,
        }
    }

    fn runs(case: &str, labels: &[(&str, usize)]) -> Vec<Trial> {
        let mut out = Vec::new();
        for (l, n) in labels {
            for _ in 0..*n {
                out.push(trial(case, out.len(), l));
            }
        }
        out
    }

    fn severity() -> Vec<String> {
        task_definition(TaskId::ComplianceTriage).severity_order
    }

    #[test]
    fn definitions() {
        for (task, tools, labels) in [
            (TaskId::ComplianceTriage, 3, ["ESCALATE", "DISMISS", "INVESTIGATE"]),
            (TaskId::PortfolioConstraint, 5, ["APPROVE", "REJECT", "MODIFY"]),
            (TaskId::DataopsException, 6, ["AUTO_FIX", "ESCALATE", "QUARANTINE"]),
        ] {
            let d = task_definition(task);
            assert_eq!(d.tool_schemas.len(), tools);
            assert_eq!(d.decision_space, labels);
            assert_eq!(d.ground_truth_mix.iter().map(|(_, c)| c).sum::<u64>(), 50);
            assert_eq!(d.categories.iter().map(|(_, c)| c).sum::<u64>(), 50);
            assert_eq!(task.as_str().parse::<TaskId>().unwrap(), task);
        }
    }

    #[test]
    fn majority_and_ties() {
        let truth: BTreeMap<_, _> = [("a".to_string(), "ESCALATE".to_string())].into();
        let by_case: BTreeMap<_, _> = [("a".to_string(), runs("a", &[("ESCALATE", 5), ("DISMISS", 3)]))].into();
        let r = grade_accuracy(&by_case, &truth, &severity());
        assert_eq!(r.majority_vote_accuracy, Fraction::new(1, 1));
        assert_eq!(r.per_run_accuracy, Fraction::new(5, 8));

        let truth: BTreeMap<_, _> = [("a".to_string(), "DISMISS".to_string())].into();
        let by_case: BTreeMap<_, _> = [("a".to_string(), runs("a", &[("ESCALATE", 4), ("DISMISS", 4)]))].into();
        let r = grade_accuracy(&by_case, &truth, &severity());
        assert_eq!(r.majority_vote_accuracy, Fraction::new(0, 1));
        assert_eq!(r.majority["a"].as_deref(), Some("ESCALATE"));
    }

    #[test]
    fn all_correct() {
        let mut by_case = BTreeMap::new();
        let mut truth = BTreeMap::new();
        for i in 0..10 {
            let id = format!("c{i}");
            by_case.insert(id.clone(), runs(&id, &[("DISMISS", 8)]));
            truth.insert(id, "DISMISS".to_string());
        }
        let r = grade_accuracy(&by_case, &truth, &severity());
        assert!(r.per_run_accuracy.is_one() && r.majority_vote_accuracy.is_one());
    }

    fn perfect() -> SloMeasurements {
        SloMeasurements {
            dec_det_escalate: Some(1.0),
            trajectory_det: Some(1.0),
            evidence_grounding: Some(1.0),
            max_stress_delta: Some(0.0),
        }
    }

    #[test]
    fn slo_gate() {
        let slo = SloSpec::default();
        assert_eq!(check_slo(&perfect(), &slo), SloOutcome { pass: true, violations: vec![] });

        let m = SloMeasurements { dec_det_escalate: Some(0.93), ..perfect() };
        let out = check_slo(&m, &slo);
        assert!(!out.pass);
        assert_eq!(
            out.violations,
            vec![SloViolation { metric: "dec_det_escalate".into(), got: 0.93, need: 0.95 }]
        );

        let m = SloMeasurements { evidence_grounding: Some(0.80), ..perfect() };
        assert!(check_slo(&m, &slo).pass);
        let m = SloMeasurements { evidence_grounding: Some(0.79), ..perfect() };
        assert!(!check_slo(&m, &slo).pass);
        let m = SloMeasurements { max_stress_delta: Some(0.10), ..perfect() };
        assert!(!check_slo(&m, &slo).pass);
    }

    #[test]
    fn slo_profiles() {
        assert_eq!(SloSpec::profile("default"), Some(SloSpec::default()));
        assert_eq!(SloSpec::profile("tier1").unwrap().min_trajectory_det, 1.0);
        assert!(SloSpec::profile("nope").is_none());
    }
}
