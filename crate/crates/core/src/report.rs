//! Graded results and their markdown / CSV / JSON renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::benchmark::{AccuracyReport, SloMeasurements, SloOutcome, SloSpec, TaskId};
use crate::canonical::{self, CanonicalizationError};
use crate::determinism::{AggregateDeterminism, DeterminismReport};
use crate::model::AgentConfig;
use crate::stats::{Interval, Recommendation, Tier};
use crate::stress::{DeltaDet, TierDeltaTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassK {
    pub k: u64,
    pub pass_at_k: f64,
    pub pass_all_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub run_id: String,
    pub case_id: String,
    pub error: String,
}

/// Everything measured under one perturbation kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub perturbation: String,
    pub cases: Vec<DeterminismReport>,
    pub decision: AggregateDeterminism,
    pub action: AggregateDeterminism,
    pub signature: AggregateDeterminism,
    pub accuracy: AccuracyReport,
    /// Mean grounding over decisions that made at least one claim.
    pub evidence_grounding: Option<f64>,
    pub vacuous_decisions: usize,
    pub constraint_satisfaction: Option<f64>,
    pub tools_per_run: f64,
    pub pass_k: Vec<PassK>,
    pub exclusions: Vec<Exclusion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StressCell {
    /// Run-level decision determinism, measured or projected.
    pub value: Option<f64>,
    pub projected: bool,
    pub delta: Option<DeltaDet>,
}

impl StressCell {
    pub const EMPTY: StressCell = StressCell { value: None, projected: false, delta: None };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressRow {
    pub baseline: StressCell,
    pub redeploy: StressCell,
    pub dq_fault: StressCell,
    pub market_shock: StressCell,
    pub temporal_shift: StressCell,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constants {
    pub sigma2_ref: f64,
    pub tier1_min: f64,
    pub tier2_min: f64,
    pub robustness_bound: f64,
    pub jaccard_threshold: String,
    pub numeric_rel_tol: f64,
    pub stopwords_version: String,
    pub rules_version: String,
    pub confidence: f64,
    pub bootstrap_resamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatSummary {
    /// δ = 1 − DecDet per (case, perturbation) configuration.
    pub drift_rates: Vec<f64>,
    pub sigma2_drift: f64,
    pub phi: f64,
    pub epsilon: f64,
    pub n_val_star: u64,
    /// Cases with identical decisions across all baseline runs.
    pub wilson_successes: u64,
    pub wilson_n: u64,
    pub wilson: Interval,
    pub bootstrap_phi: Interval,
    /// Per-case decision determinism against majority-vote correctness.
    pub pearson_r: Option<f64>,
    pub pearson_n: usize,
    pub tier: Tier,
    pub recommendation: Recommendation,
    pub constants: Constants,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SloSection {
    pub profile: String,
    pub spec: SloSpec,
    pub measurements: SloMeasurements,
    pub outcome: SloOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    /// Model/Config row label.
    pub label: String,
    pub task: TaskId,
    pub agent: String,
    pub config: AgentConfig,
    pub conditions: Vec<ConditionResult>,
    pub stress: StressRow,
    pub tier_deltas: TierDeltaTable,
    pub stats: StatSummary,
    pub slo: SloSection,
}

impl Report {
    pub fn condition(&self, perturbation: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.perturbation == perturbation)
    }

    pub fn baseline(&self) -> Option<&ConditionResult> {
        self.condition("baseline")
    }
}

const AGENTIC_HEADER: [&str; 5] = ["Model/Config", "Dec.Det", "Act.Det", "Acc", "Tools/Run"];
const STRESS_HEADER: [&str; 5] = ["Model/Config", "Baseline", "Redeploy", "DQ Fault", "Vol. Shock"];
const STATS_HEADER: [&str; 10] =
    ["Model/Config", "Tier", "sigma2_drift", "phi", "n_val*", "Wilson lo", "Wilson hi", "Bootstrap phi lo", "Bootstrap phi hi", "Recommendation"];

fn pct(x: f64) -> String {
    format!("{:.1}", x * 100.0)
}

fn cell(c: &StressCell) -> String {
    match c.value {
        None => "n/a".into(),
        Some(v) if c.projected => format!("{}*", pct(v)),
        Some(v) => pct(v),
    }
}

fn agentic_rows(reports: &[Report]) -> Vec<[String; 5]> {
    reports
        .iter()
        .filter_map(|r| {
            let b = r.baseline()?;
            Some([
                r.label.clone(),
                pct(b.decision.run_level.value()),
                pct(b.action.run_level.value()),
                pct(b.accuracy.majority_vote_accuracy.value()),
                format!("{:.1}", b.tools_per_run),
            ])
        })
        .collect()
}

fn stress_rows(reports: &[Report]) -> Vec<[String; 5]> {
    reports
        .iter()
        .map(|r| {
            let s = &r.stress;
            [r.label.clone(), cell(&s.baseline), cell(&s.redeploy), cell(&s.dq_fault), cell(&s.market_shock)]
        })
        .collect()
}

fn stats_rows(reports: &[Report]) -> Vec<[String; 10]> {
    reports
        .iter()
        .map(|r| {
            let s = &r.stats;
            [
                r.label.clone(),
                s.tier.as_str().to_string(),
                format!("{:.4}", s.sigma2_drift),
                format!("{:.2}", s.phi),
                s.n_val_star.to_string(),
                format!("{:.3}", s.wilson.lo),
                format!("{:.3}", s.wilson.hi),
                format!("{:.2}", s.bootstrap_phi.lo),
                format!("{:.2}", s.bootstrap_phi.hi),
                serde_json::to_value(s.recommendation.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
            ]
        })
        .collect()
}

fn md_table<const N: usize>(out: &mut String, header: [&str; N], rows: &[[String; N]]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(N));
    for row in rows {
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
}

pub fn render_markdown(reports: &[Report]) -> String {
    let mut out = String::new();
    out.push_str("# Assurance report\n\n## Agentic evaluation\n\n");
    md_table(&mut out, AGENTIC_HEADER, &agentic_rows(reports));
    out.push_str("\n## Stress matrix (decision determinism, %)\n\n");
    md_table(&mut out, STRESS_HEADER, &stress_rows(reports));
    out.push_str("\n\\* projected from the tier degradation table\n\n## Statistical summary\n\n");
    md_table(&mut out, STATS_HEADER, &stats_rows(reports));
    for r in reports {
        let _ = writeln!(out, "\n## SLO: {} ({} profile)\n", r.label, r.slo.profile);
        if r.slo.outcome.pass {
            out.push_str("PASS\n");
        } else {
            out.push_str("FAIL\n\n");
            for v in &r.slo.outcome.violations {
                let _ = writeln!(out, "- {}: got {:.4}, need {:.4}", v.metric, v.got, v.need);
            }
        }
        let excluded: usize = r.conditions.iter().map(|c| c.exclusions.len()).sum();
        if excluded > 0 {
            let _ = writeln!(out, "\n{excluded} errored trials excluded from metrics (see report.json)");
        }
    }
    out
}

fn csv_bytes<const N: usize>(header: [&str; N], rows: &[[String; N]]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Canonical(#[from] CanonicalizationError),
}

/// Canonical JSON of the report list.
pub fn render_json(reports: &[Report]) -> Result<Vec<u8>, CanonicalizationError> {
    canonical::canonical_bytes_of(&reports)
}

/// Write the reports in `format` under `dir`; returns the files written.
/// Output bytes depend only on `reports`.
pub fn emit_report(reports: &[Report], format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir)?;
    let files: Vec<(&str, Vec<u8>)> = match format {
        ReportFormat::Json => vec![("report.json", render_json(reports)?)],
        ReportFormat::Markdown => vec![("report.md", render_markdown(reports).into_bytes())],
        ReportFormat::Csv => vec![
            ("agentic.csv", csv_bytes(AGENTIC_HEADER, &agentic_rows(reports))?),
            ("stress.csv", csv_bytes(STRESS_HEADER, &stress_rows(reports))?),
            ("stats.csv", csv_bytes(STATS_HEADER, &stats_rows(reports))?),
        ],
    };
    let mut paths = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Process exit status for a graded report: 0 when every SLO holds, 2 on a
/// violation.
pub fn cli_gate(reports: &[Report]) -> i32 {
    if reports.iter().all(|r| r.slo.outcome.pass) {
        0
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_results_are_header_only() {
        let md = render_markdown(&[]);
        assert!(md.contains("| Model/Config | Dec.Det | Act.Det | Acc | Tools/Run |"));
        assert!(md.contains("| Model/Config | Baseline | Redeploy | DQ Fault | Vol. Shock |"));
        assert_eq!(md.matches("\n| ").count(), 3);
        let csv = csv_bytes(AGENTIC_HEADER, &agentic_rows(&[])).unwrap();
        assert_eq!(csv, b"Model/Config,Dec.Det,Act.Det,Acc,Tools/Run\n");
        assert_eq!(render_json(&[]).unwrap(), b"[]");
        assert_eq!(cli_gate(&[]), 0);
    }

    #[test]
    fn projected_cells_are_starred() {
        let c = StressCell { value: Some(0.94), projected: true, delta: None };
        assert_eq!(cell(&c), "94.0*");
        assert_eq!(cell(&StressCell { projected: false, ..c }), "94.0");
        assert_eq!(cell(&StressCell::EMPTY), "n/a");
    }

    #[test]
    fn formats_parse() {
        assert_eq!("md".parse::<ReportFormat>(), Ok(ReportFormat::Markdown));
        assert_eq!("json".parse::<ReportFormat>(), Ok(ReportFormat::Json));
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
