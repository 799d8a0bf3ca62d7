use std::fs;
use std::path::PathBuf;

use audit_harness::agents::DriftSpec;
use audit_harness::benchmark::TaskId;
use audit_harness::model::Architecture;
use audit_harness::runner::{self, AgentSelection, RunConfig, RunError};
use audit_harness::store::{Integrity, TranscriptStore, TrialFilter};
use audit_harness::stress::{PerturbationKind, PerturbationSpec};

fn small(task: TaskId) -> RunConfig {
    RunConfig { n_cases: 6, runs_per_case: 4, ..RunConfig::new(task, 0.05) }
}

fn agent_script() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/first_tool_agent.py").display().to_string()
}

#[test]
fn tool_swaps_leave_decisions_alone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        agent: AgentSelection::Drifty {
            mode: Architecture::SchemaFirst,
            drift: DriftSpec { p_tool_swap: 0.5, ..DriftSpec::flips(0.0, 7) },
        },
        n_cases: 10,
        runs_per_case: 8,
        ..RunConfig::new(TaskId::ComplianceTriage, 0.05)
    };
    let reports = runner::run_evaluation(&cfg, dir.path(), None).unwrap();
    let base = reports[0].baseline().unwrap();
    assert!(base.cases.iter().all(|c| c.dec_det.is_one()));
    assert!(base.cases.iter().any(|c| !c.act_det.is_one()));
    assert!(base.decision.case_level.is_one());
}

#[test]
fn grading_a_store_reproduces_the_run_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        perturbations: PerturbationKind::ALL.iter().map(|k| PerturbationSpec::new(*k)).collect(),
        ..small(TaskId::DataopsException)
    };
    let ran = runner::run_evaluation(&cfg, dir.path(), Some(1)).unwrap();
    let graded = runner::grade_store(dir.path()).unwrap();
    assert_eq!(ran, graded);
    let r = &ran[0];
    assert_eq!(r.conditions.len(), 5);
    assert!(!r.stress.redeploy.projected && r.stress.redeploy.value.is_some());
    assert!(r.stress.temporal_shift.value.is_some());
    assert_eq!(fs::read_dir(dir.path().join(runner::MANIFESTS_DIR)).unwrap().count(), 4);
    assert_eq!(fs::read_dir(dir.path().join(runner::FIXTURES_DIR)).unwrap().count(), 6);
}

#[test]
fn unmeasured_stress_cells_are_projected() {
    let dir = tempfile::tempdir().unwrap();
    let reports = runner::run_evaluation(&small(TaskId::ComplianceTriage), dir.path(), None).unwrap();
    let s = &reports[0].stress;
    assert_eq!(s.baseline.value, Some(1.0));
    assert!(s.dq_fault.projected);
    assert_eq!(s.dq_fault.value, Some(0.94));
    assert_eq!(s.redeploy.value, Some(1.0));
    assert!(s.temporal_shift.value.is_none());
    assert!(reports[0].slo.outcome.pass);
}

#[test]
fn refuses_a_used_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(TaskId::PortfolioConstraint);
    runner::run_evaluation(&cfg, dir.path(), None).unwrap();
    assert!(matches!(runner::run_evaluation(&cfg, dir.path(), None), Err(RunError::NonEmptyStore(_))));
}

#[test]
fn grading_refuses_a_tampered_store() {
    let dir = tempfile::tempdir().unwrap();
    runner::run_evaluation(&small(TaskId::ComplianceTriage), dir.path(), None).unwrap();
    let store = TranscriptStore::open(dir.path().join(runner::TRANSCRIPTS_DIR)).unwrap();
    let file = store.group_files().unwrap().remove(2);
    let mut bytes = fs::read(&file).unwrap();
    let at = bytes.len() / 2;
    bytes[at] ^= 0x20;
    fs::write(&file, bytes).unwrap();
    assert!(matches!(runner::verify(dir.path()).unwrap(), Integrity::FirstBadSeq(_)));
    assert!(matches!(runner::grade_store(dir.path()), Err(RunError::Integrity(_))));
}

#[test]
fn unconstrained_prose_is_graded_by_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { agent: AgentSelection::Scripted { mode: Architecture::Unconstrained }, ..small(TaskId::ComplianceTriage) };
    let reports = runner::run_evaluation(&cfg, dir.path(), None).unwrap();
    let base = reports[0].baseline().unwrap();
    // Every rationale ends with an unsupported recommendation sentence.
    let g = base.evidence_grounding.unwrap();
    assert!(g > 0.5 && g < 1.0, "{g}");
    assert_eq!(base.vacuous_decisions, 0);
    assert!(reports[0].slo.outcome.violations.iter().any(|v| v.metric == "evidence_grounding"));
    assert_eq!(base.constraint_satisfaction.map(|c| c > 0.0), Some(true));
}

#[test]
fn external_agent_failures_are_excluded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        agent: AgentSelection::External {
            program: "python3".into(),
            args: vec![agent_script(), "CT-01".into()],
            mode: Architecture::SchemaFirst,
        },
        ..small(TaskId::ComplianceTriage)
    };
    let reports = runner::run_evaluation(&cfg, dir.path(), None).unwrap();
    let base = reports[0].baseline().unwrap();
    assert_eq!(base.exclusions.len(), 2);
    assert!(base.exclusions.iter().all(|e| e.case_id == "CT-01"));
    assert_eq!(base.cases.len(), 6);
    let ct01 = base.cases.iter().find(|c| c.case_id == "CT-01").unwrap();
    assert_eq!(ct01.n_runs, 2);
    assert!(base.decision.case_level.is_one());
    assert_eq!(base.tools_per_run, 1.0);
    // Errored trials are still on record.
    let store = TranscriptStore::open(dir.path().join(runner::TRANSCRIPTS_DIR)).unwrap();
    let all = store.load_trials(&TrialFilter::case("CT-01")).unwrap();
    assert_eq!(all.iter().filter(|t| t.error.is_some()).count(), 2);
}

#[test]
fn drifty_runs_replay_exactly() {
    let cfg = RunConfig {
        agent: AgentSelection::Drifty {
            mode: Architecture::SchemaFirst,
            drift: DriftSpec { p_tool_swap: 0.1, p_arg_jitter: 0.1, p_decision_flip: 0.2, master_seed: 3, session_entangled: true },
        },
        perturbations: vec![PerturbationSpec::new(PerturbationKind::Baseline), PerturbationSpec::new(PerturbationKind::Redeploy)],
        ..small(TaskId::PortfolioConstraint)
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = runner::run_evaluation(&cfg, a.path(), None).unwrap();
    let rb = runner::run_evaluation(&cfg, b.path(), Some(1)).unwrap();
    assert_eq!(ra, rb);
    assert!(ra[0].baseline().unwrap().decision.run_level.value() < 1.0);
}
