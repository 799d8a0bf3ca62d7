//! Built-in agents: a scripted rule follower, a seeded drifty variant of it,
//! and an adapter for external agents speaking a JSON line protocol.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use chrono::{SecondsFormat, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::benchmark::generate::instantiate;
use crate::benchmark::rules::{self, Observations, StepTemplate};
use crate::benchmark::{execute_tool, task_definition, BenchmarkError, CaseFixture, TaskId};
use crate::canonical::{self, CanonicalizationError};
use crate::faithfulness::{flatten_leaves, render_leaf};
use crate::model::{AgentConfig, Architecture, Decision, ToolCall, Trial};
use crate::seeding::{derive_seed, rng};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("policy error: {0}")]
    Policy(String),
    #[error("case {case} belongs to {found}, policy is for {expected}")]
    WrongTask { case: String, expected: TaskId, found: TaskId },
    #[error("drift probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("external agent: {0}")]
    External(String),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error(transparent)]
    Canonical(#[from] CanonicalizationError),
}

/// How a rule-following agent works a task: the per-category sequences and
/// decision table come from the rules file, the mode decides how the
/// decision is explained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyScript {
    pub task: TaskId,
    pub mode: Architecture,
}

impl PolicyScript {
    pub fn new(task: TaskId, mode: Architecture) -> Self {
        PolicyScript { task, mode }
    }

    pub fn sequence(&self, category: &str) -> Result<&'static [StepTemplate], AgentError> {
        rules::expected_sequence(self.task, category)
            .ok_or_else(|| AgentError::Policy(format!("no sequence for {}/{category}", self.task)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    #[serde(default)]
    pub p_tool_swap: f64,
    #[serde(default)]
    pub p_arg_jitter: f64,
    #[serde(default)]
    pub p_decision_flip: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Fold the deployment session into the per-trial seed, so a redeploy
    /// changes which draws a trial sees.
    #[serde(default)]
    pub session_entangled: bool,
}

impl DriftSpec {
    pub fn flips(q: f64, master_seed: u64) -> Self {
        DriftSpec { p_tool_swap: 0.0, p_arg_jitter: 0.0, p_decision_flip: q, master_seed, session_entangled: false }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        for p in [self.p_tool_swap, self.p_arg_jitter, self.p_decision_flip] {
            if !(0.0..=1.0).contains(&p) {
                return Err(AgentError::Probability(p));
            }
        }
        Ok(())
    }
}

/// Identity and setting of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialContext {
    pub run_id: String,
    pub run_index: usize,
    pub config: AgentConfig,
    /// `None` for the unperturbed baseline.
    pub perturbation: Option<String>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Micros, true)
}

fn blank_trial(case: &CaseFixture, ctx: &TrialContext) -> Trial {
    Trial {
        run_id: ctx.run_id.clone(),
        case_id: case.case_id.clone(),
        config: ctx.config.clone(),
        perturbation: ctx.perturbation.clone(),
        steps: Vec::new(),
        decision: None,
        error: None,
        t_start: now(),
        t_end: String::new(),
        run_index: ctx.run_index,
    }
}

/// A trial recording an adapter failure; excluded from metrics downstream.
pub fn errored_trial(case: &CaseFixture, ctx: &TrialContext, error: impl Into<String>) -> Trial {
    let mut trial = blank_trial(case, ctx);
    trial.error = Some(error.into());
    trial.t_end = now();
    trial
}

/// Follow the policy on `case`: call the category's tools in order, apply
/// the decision table, and explain the decision per the policy's mode.
pub fn run_scripted(policy: &PolicyScript, case: &CaseFixture, ctx: &TrialContext) -> Result<Trial, AgentError> {
    if case.task_id != policy.task {
        return Err(AgentError::WrongTask { case: case.case_id.clone(), expected: policy.task, found: case.task_id });
    }
    let mut trial = blank_trial(case, ctx);
    let mut results = BTreeMap::new();
    for step in policy.sequence(&case.category)? {
        let args = instantiate(step, &case.inputs).map_err(|e| AgentError::Policy(e.to_string()))?;
        let result = execute_tool(case, step.tool, &args)?;
        results.insert(step.tool.to_string(), result.clone());
        trial.steps.push(ToolCall::new(trial.steps.len(), step.tool, args, result)?);
    }
    let outcome = rules::decide(policy.task, &Observations { inputs: &case.inputs, results: &results });
    if let Some(action) = rules::action_step(policy.task, &outcome.label) {
        let args = instantiate(&action, &case.inputs).map_err(|e| AgentError::Policy(e.to_string()))?;
        let result = execute_tool(case, action.tool, &args)?;
        trial.steps.push(ToolCall::new(trial.steps.len(), action.tool, args, result)?);
    }
    trial.decision = Some(explain(policy.mode, &outcome, &trial.steps));
    trial.t_end = now();
    Ok(trial)
}

/// Leaves a decision cites, as `(step index, rendered leaf)`.
fn cited_leaves(cited: &[(String, String)], steps: &[ToolCall]) -> Vec<(usize, String, String, String)> {
    let mut out = Vec::new();
    for (tool, path) in cited {
        let Some(step) = steps.iter().find(|s| &s.tool_name == tool) else { continue };
        for (p, v) in flatten_leaves(&step.result) {
            if &p == path {
                let entry = (step.step_index, tool.clone(), p, v);
                if !out.contains(&entry) {
                    out.push(entry);
                }
            }
        }
    }
    out
}

fn explain(mode: Architecture, outcome: &rules::RuleOutcome, steps: &[ToolCall]) -> Decision {
    let leaves = cited_leaves(&outcome.cited, steps);
    let mut refs: Vec<usize> = leaves.iter().map(|(i, ..)| *i).collect();
    refs.sort_unstable();
    refs.dedup();
    match mode {
        Architecture::SchemaFirst => Decision {
            label: outcome.label.clone(),
            rationale: format!("{} under {}", outcome.label, rules::RULES_VERSION),
            claims: leaves.iter().map(|(_, _, p, v)| render_leaf(p, v)).collect(),
            evidence_refs: refs,
        },
        Architecture::Unconstrained => {
            let mut text: Vec<String> = leaves.iter().map(|(_, _, p, v)| format!("The {p} is {v}.")).collect();
            text.push(format!("Recommended action: {}.", outcome.label));
            Decision { label: outcome.label.clone(), rationale: text.join(" "), claims: Vec::new(), evidence_refs: refs }
        }
    }
}

/// Per-trial seed of the drifty agent.
pub fn drift_seed(spec: &DriftSpec, case_id: &str, run_index: usize, session: Option<&str>) -> u64 {
    let run = run_index.to_string();
    match (spec.session_entangled, session) {
        (true, Some(s)) => derive_seed(spec.master_seed, &[case_id, &run, s]),
        _ => derive_seed(spec.master_seed, &[case_id, &run]),
    }
}

fn jitter(v: &Value) -> Value {
    match v {
        Value::String(s) => Value::String(format!("{s} ")),
        Value::Number(n) => match n.as_i64() {
            Some(i) => json!(i + 1),
            None => canonical::number(n.as_f64().unwrap_or(0.0) * 1.01).unwrap_or(Value::Null),
        },
        Value::Bool(b) => Value::Bool(!b),
        other => other.clone(),
    }
}

/// A scripted trial put through seeded post-hoc drift. Draws are consumed in
/// a fixed order whatever the probabilities: swap, jitter, flip.
pub fn run_drifty(
    policy: &PolicyScript,
    drift: &DriftSpec,
    case: &CaseFixture,
    ctx: &TrialContext,
) -> Result<Trial, AgentError> {
    drift.validate()?;
    let mut trial = run_scripted(policy, case, ctx)?;
    let mut r = rng(drift_seed(drift, &case.case_id, ctx.run_index, ctx.config.session.as_deref()));

    let u_swap: f64 = r.random();
    let swap_at: f64 = r.random();
    let u_jitter: f64 = r.random();
    let jitter_at: f64 = r.random();
    let u_flip: f64 = r.random();

    let n = trial.steps.len();
    if n >= 2 && u_swap < drift.p_tool_swap {
        let pos = ((swap_at * (n - 1) as f64) as usize).min(n - 2);
        trial.steps.swap(pos, pos + 1);
        for (i, s) in trial.steps.iter_mut().enumerate() {
            s.step_index = i;
        }
        if let Some(d) = trial.decision.as_mut() {
            for r in d.evidence_refs.iter_mut() {
                if *r == pos {
                    *r = pos + 1;
                } else if *r == pos + 1 {
                    *r = pos;
                }
            }
            d.evidence_refs.sort_unstable();
        }
    }
    if n >= 1 && u_jitter < drift.p_arg_jitter {
        let at = ((jitter_at * n as f64) as usize).min(n - 1);
        let step = &trial.steps[at];
        let mut args = step.args.clone();
        if let Some(slot) = args.as_object_mut().and_then(|m| m.values_mut().next()) {
            *slot = jitter(slot);
        }
        let result = execute_tool(case, &step.tool_name, &args)?;
        trial.steps[at] = ToolCall::new(at, step.tool_name.clone(), args, result)?;
    }
    if u_flip < drift.p_decision_flip {
        let space = task_definition(policy.task).decision_space;
        if let Some(d) = trial.decision.as_mut() {
            let i = space.iter().position(|l| *l == d.label).unwrap_or(0);
            d.label = space[(i + 1) % space.len()].clone();
        }
    }
    Ok(trial)
}

/// Anything that turns a case into a trial.
pub trait Agent: Send + Sync {
    fn name(&self) -> String;
    fn run(&self, case: &CaseFixture, ctx: &TrialContext) -> Result<Trial, AgentError>;
}

pub struct ScriptedAgent {
    pub policy: PolicyScript,
}

impl Agent for ScriptedAgent {
    fn name(&self) -> String {
        format!("scripted/{}", self.policy.mode.as_str())
    }

    fn run(&self, case: &CaseFixture, ctx: &TrialContext) -> Result<Trial, AgentError> {
        run_scripted(&self.policy, case, ctx)
    }
}

pub struct DriftyAgent {
    pub policy: PolicyScript,
    pub drift: DriftSpec,
}

impl Agent for DriftyAgent {
    fn name(&self) -> String {
        format!("drifty/{}", self.policy.mode.as_str())
    }

    fn run(&self, case: &CaseFixture, ctx: &TrialContext) -> Result<Trial, AgentError> {
        run_drifty(&self.policy, &self.drift, case, ctx)
    }
}

/// Upper bound on tool calls an external agent may make in one trial.
pub const MAX_EXTERNAL_STEPS: usize = 64;

/// A subprocess speaking canonical JSON, one message per line.
///
/// The harness sends `{"type":"case",...}`; the agent answers with
/// `{"type":"tool_call","tool":..,"args":..}` (answered by
/// `{"type":"tool_result","result":..}` or `{"type":"tool_error",..}`) and
/// finishes with `{"type":"decision","label":..,"rationale":..,"claims":[..],"evidence_refs":[..]}`.
/// One process is spawned per trial, so every trial starts fresh.
pub struct ExternalAgent {
    pub program: String,
    pub args: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum AgentMessage {
    ToolCall { tool: String, #[serde(default)] args: Value },
    Decision(Decision),
}

impl ExternalAgent {
    fn converse(&self, case: &CaseFixture, ctx: &TrialContext, trial: &mut Trial) -> Result<(), AgentError> {
        let ext = |e: std::io::Error| AgentError::External(e.to_string());
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(ext)?;
        let mut stdin = child.stdin.take().ok_or_else(|| AgentError::External("no stdin".into()))?;
        let mut stdout = BufReader::new(child.stdout.take().ok_or_else(|| AgentError::External("no stdout".into()))?);
        let def = task_definition(case.task_id);
        let hello = json!({
            "type": "case",
            "case_id": case.case_id,
            "task": case.task_id.as_str(),
            "query": case.query,
            "inputs": case.inputs,
            "tools": def.tool_schemas,
            "decision_space": def.decision_space,
            "config": ctx.config,
            "run_index": ctx.run_index,
        });
        let mut send = |v: &Value| -> Result<(), AgentError> {
            let mut line = canonical::canonicalize(v)?;
            line.push(b'\n');
            stdin.write_all(&line).map_err(ext)?;
            stdin.flush().map_err(ext)
        };
        send(&hello)?;
        let outcome = loop {
            let mut line = String::new();
            if stdout.read_line(&mut line).map_err(ext)? == 0 {
                break Err(AgentError::External("agent closed its output before deciding".into()));
            }
            let msg: AgentMessage =
                serde_json::from_str(line.trim()).map_err(|e| AgentError::External(format!("bad message: {e}")))?;
            match msg {
                AgentMessage::ToolCall { tool, args } => {
                    if trial.steps.len() >= MAX_EXTERNAL_STEPS {
                        break Err(AgentError::External(format!("more than {MAX_EXTERNAL_STEPS} tool calls")));
                    }
                    match execute_tool(case, &tool, &args) {
                        Ok(result) => {
                            send(&json!({"type": "tool_result", "result": result}))?;
                            trial.steps.push(ToolCall::new(trial.steps.len(), tool, args, result)?);
                        }
                        Err(e) => send(&json!({"type": "tool_error", "message": e.to_string()}))?,
                    }
                }
                AgentMessage::Decision(d) => {
                    trial.decision = Some(d);
                    break Ok(());
                }
            }
        };
        drop(send);
        let _ = child.kill();
        let _ = child.wait();
        outcome
    }
}

impl Agent for ExternalAgent {
    fn name(&self) -> String {
        format!("external/{}", self.program)
    }

    /// Adapter failures come back as an errored trial, not an `Err`.
    fn run(&self, case: &CaseFixture, ctx: &TrialContext) -> Result<Trial, AgentError> {
        let mut trial = blank_trial(case, ctx);
        if let Err(e) = self.converse(case, ctx, &mut trial) {
            trial.error = Some(e.to_string());
            trial.decision = None;
        }
        trial.t_end = now();
        Ok(trial)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::generate_cases;
    use crate::faithfulness::{evidence_from_trajectory, evidence_grounding, extract_claims};
    use crate::model::signature;
    use crate::stress::redeploy_marker;

    fn ctx(i: usize) -> TrialContext {
        TrialContext {
            run_id: format!("r{i}"),
            run_index: i,
            config: AgentConfig::local("scripted", Architecture::SchemaFirst),
            perturbation: None,
        }
    }

    fn strip(mut t: Trial) -> Trial {
        t.run_id.clear();
        t.t_start.clear();
        t.t_end.clear();
        t.run_index = 0;
        t
    }

    #[test]
    fn scripted_is_repeatable() {
        let policy = PolicyScript::new(TaskId::ComplianceTriage, Architecture::SchemaFirst);
        for case in generate_cases(TaskId::ComplianceTriage, 10, 42).unwrap() {
            let a = strip(run_scripted(&policy, &case, &ctx(0)).unwrap());
            let b = strip(run_scripted(&policy, &case, &ctx(1)).unwrap());
            assert_eq!(a, b);
            let mut c = ctx(2);
            c.config = redeploy_marker(&c.config, 1);
            let d = run_scripted(&policy, &case, &c).unwrap();
            assert_eq!(signature(&d.steps).unwrap(), signature(&a.steps).unwrap());
            assert_eq!(d.decision, a.decision);
        }
    }

    #[test]
    fn sanctions_case() {
        let policy = PolicyScript::new(TaskId::ComplianceTriage, Architecture::SchemaFirst);
        let cases = generate_cases(TaskId::ComplianceTriage, 50, 1).unwrap();
        let case = cases.iter().find(|c| c.category == "sanctions" && c.ground_truth == "ESCALATE").unwrap();
        let t = run_scripted(&policy, case, &ctx(0)).unwrap();
        let tools: Vec<&str> = t.steps.iter().map(|s| s.tool_name.as_str()).collect();
        assert_eq!(tools, ["check_sanctions_list", "get_customer_profile", "calculate_risk_score"]);
        assert_eq!(t.decision.unwrap().label, "ESCALATE");
    }

    #[test]
    fn scripted_matches_ground_truth_and_grounds_claims() {
        for task in TaskId::ALL {
            let policy = PolicyScript::new(task, Architecture::SchemaFirst);
            for case in generate_cases(task, 50, 42).unwrap() {
                let t = run_scripted(&policy, &case, &ctx(0)).unwrap();
                let d = t.decision.as_ref().unwrap();
                assert_eq!(d.label, case.ground_truth, "{}", case.case_id);
                let g = evidence_grounding(&extract_claims(d), &evidence_from_trajectory(&t.steps));
                assert!(g.grounding.is_one() && !g.vacuous, "{}: {:?}", case.case_id, g.records);
            }
        }
    }

    #[test]
    fn unconstrained_uses_prose() {
        let policy = PolicyScript::new(TaskId::PortfolioConstraint, Architecture::Unconstrained);
        let case = &generate_cases(TaskId::PortfolioConstraint, 3, 42).unwrap()[0];
        let d = run_scripted(&policy, case, &ctx(0)).unwrap().decision.unwrap();
        assert!(d.claims.is_empty());
        assert!(d.rationale.ends_with(&format!("Recommended action: {}.", d.label)));
    }

    #[test]
    fn zero_drift_is_scripted() {
        let policy = PolicyScript::new(TaskId::DataopsException, Architecture::SchemaFirst);
        let spec = DriftSpec { master_seed: 5, ..DriftSpec::flips(0.0, 5) };
        for case in generate_cases(TaskId::DataopsException, 10, 42).unwrap() {
            let a = strip(run_scripted(&policy, &case, &ctx(3)).unwrap());
            let b = strip(run_drifty(&policy, &spec, &case, &ctx(3)).unwrap());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn drift_is_pure() {
        let policy = PolicyScript::new(TaskId::ComplianceTriage, Architecture::SchemaFirst);
        let spec = DriftSpec { p_tool_swap: 0.5, p_arg_jitter: 0.5, p_decision_flip: 0.5, master_seed: 9, session_entangled: false };
        let case = &generate_cases(TaskId::ComplianceTriage, 1, 42).unwrap()[0];
        for i in 0..20 {
            let a = run_drifty(&policy, &spec, case, &ctx(i)).unwrap();
            a.validate(None).unwrap();
            let b = run_drifty(&policy, &spec, case, &ctx(i)).unwrap();
            assert_eq!(strip(a), strip(b));
        }
    }

    #[test]
    fn bad_probability() {
        let policy = PolicyScript::new(TaskId::ComplianceTriage, Architecture::SchemaFirst);
        let case = &generate_cases(TaskId::ComplianceTriage, 1, 42).unwrap()[0];
        let spec = DriftSpec::flips(1.5, 0);
        assert!(matches!(run_drifty(&policy, &spec, case, &ctx(0)), Err(AgentError::Probability(_))));
    }

    #[test]
    fn wrong_task() {
        let policy = PolicyScript::new(TaskId::PortfolioConstraint, Architecture::SchemaFirst);
        let case = &generate_cases(TaskId::ComplianceTriage, 1, 42).unwrap()[0];
        assert!(matches!(run_scripted(&policy, case, &ctx(0)), Err(AgentError::WrongTask { .. })));
    }

    #[test]
    fn missing_external_program_is_an_errored_trial() {
        let agent = ExternalAgent { program: "/nonexistent/agent".into(), args: vec![] };
        let case = &generate_cases(TaskId::ComplianceTriage, 1, 42).unwrap()[0];
        let t = agent.run(case, &ctx(0)).unwrap();
        assert!(t.error.is_some() && t.decision.is_none());
    }
}
