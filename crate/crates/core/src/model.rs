//! Trials, trajectories and decisions, plus the signatures used for
//! equality checks during audit replay.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::canonical::{self, CanonicalizationError, Digest, Document};

#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("step {position} has step_index {found}, expected {position}")]
    StepGap { position: usize, found: usize },
    #[error("step {0}: result_digest does not match the canonical result")]
    ResultDigest(usize),
    #[error("evidence_ref {0} does not point at an existing step")]
    DanglingEvidenceRef(usize),
    #[error("decision label {label:?} is not in the decision space")]
    UnknownLabel { label: String },
    #[error("completed trial {0} has no decision")]
    MissingDecision(String),
    #[error("trial {0} has an empty trajectory")]
    EmptyTrajectory(String),
    #[error("temperature must be finite")]
    NonFiniteTemperature,
    #[error("empty run_id")]
    EmptyRunId,
    #[error(transparent)]
    Canonical(#[from] CanonicalizationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Unconstrained,
    SchemaFirst,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Unconstrained => "unconstrained",
            Architecture::SchemaFirst => "schema_first",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderClass {
    Local,
    Api,
}

/// One step of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolCall {
    #[serde(rename = "i")]
    pub step_index: usize,
    #[serde(rename = "tool")]
    pub tool_name: String,
    pub args: Document,
    pub result: Document,
    pub result_digest: Digest,
}

impl ToolCall {
    pub fn new(
        step_index: usize,
        tool_name: impl Into<String>,
        args: Document,
        result: Document,
    ) -> Result<Self, CanonicalizationError> {
        let result_digest = canonical::digest(&result)?;
        Ok(ToolCall {
            step_index,
            tool_name: tool_name.into(),
            args,
            result,
            result_digest,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decision {
    pub label: String,
    #[serde(default)]
    pub rationale: String,
    #[serde(default)]
    pub claims: Vec<String>,
    #[serde(default)]
    pub evidence_refs: Vec<usize>,
}

impl Decision {
    pub fn label(label: impl Into<String>) -> Self {
        Decision {
            label: label.into(),
            ..Default::default()
        }
    }
}

/// Model and inference settings a trial was run under.
///
/// `temperature` and `seed` are recorded as given; providers that ignore
/// seeds are still measured, not trusted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub model_id: String,
    pub architecture: Architecture,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub provider_class: ProviderClass,
    /// Deployment session. Changes on every redeploy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
}

impl AgentConfig {
    pub fn local(model_id: impl Into<String>, architecture: Architecture) -> Self {
        AgentConfig {
            model_id: model_id.into(),
            architecture,
            temperature: 0.0,
            seed: Some(42),
            provider_class: ProviderClass::Local,
            session: None,
        }
    }

    /// Stable key for grouping trials; the session is deliberately left out.
    pub fn group_key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}",
            self.model_id,
            self.architecture.as_str(),
            canonical::format_f64(self.temperature).unwrap_or_else(|| "nan".into()),
            self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into()),
            match self.provider_class {
                ProviderClass::Local => "local",
                ProviderClass::Api => "api",
            }
        )
    }
}

/// One attempt of an agent at a case.
///
/// The serialized field names are the transcript JSONL schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub run_id: String,
    pub case_id: String,
    #[serde(flatten)]
    pub config: AgentConfig,
    pub perturbation: Option<String>,
    pub steps: Vec<ToolCall>,
    pub decision: Option<Decision>,
    /// Set when the agent adapter failed; such trials are excluded from metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub t_start: String,
    pub t_end: String,
    /// Position within the trial's group; assigned by the store, not serialized.
    #[serde(skip)]
    pub run_index: usize,
}

impl Trial {
    pub fn is_completed(&self) -> bool {
        self.error.is_none()
    }

    pub fn trajectory(&self) -> &[ToolCall] {
        &self.steps
    }

    /// Checks step numbering, result digests, evidence references and,
    /// when a decision space is supplied, label membership.
    pub fn validate(&self, decision_space: Option<&[String]>) -> Result<(), ValidationError> {
        if self.run_id.is_empty() {
            return Err(ValidationError::EmptyRunId);
        }
        if !self.config.temperature.is_finite() {
            return Err(ValidationError::NonFiniteTemperature);
        }
        validate_trajectory(&self.steps)?;
        if !self.is_completed() {
            return Ok(());
        }
        let Some(decision) = &self.decision else {
            return Err(ValidationError::MissingDecision(self.run_id.clone()));
        };
        if self.steps.is_empty() {
            return Err(ValidationError::EmptyTrajectory(self.run_id.clone()));
        }
        if let Some(&bad) = decision.evidence_refs.iter().find(|&&r| r >= self.steps.len()) {
            return Err(ValidationError::DanglingEvidenceRef(bad));
        }
        if let Some(space) = decision_space {
            if !space.iter().any(|l| *l == decision.label) {
                return Err(ValidationError::UnknownLabel {
                    label: decision.label.clone(),
                });
            }
        }
        Ok(())
    }

    /// Canonical transcript bytes (the JSONL line content for this trial).
    pub fn canonical_bytes(&self) -> Result<Vec<u8>, CanonicalizationError> {
        canonical::canonical_bytes_of(self)
    }
}

pub fn validate_trajectory(steps: &[ToolCall]) -> Result<(), ValidationError> {
    for (position, step) in steps.iter().enumerate() {
        if step.step_index != position {
            return Err(ValidationError::StepGap {
                position,
                found: step.step_index,
            });
        }
        if canonical::digest(&step.result)? != step.result_digest {
            return Err(ValidationError::ResultDigest(position));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrajectorySignature {
    pub tool_sequence: Vec<String>,
    pub full_signature: Digest,
}

pub fn tool_sequence(steps: &[ToolCall]) -> Vec<String> {
    steps.iter().map(|s| s.tool_name.clone()).collect()
}

/// Digest over the ordered `(tool_name, args)` pairs. Results and
/// timestamps do not participate.
pub fn signature(steps: &[ToolCall]) -> Result<TrajectorySignature, CanonicalizationError> {
    let pairs: Vec<Value> = steps
        .iter()
        .map(|s| json!([s.tool_name, s.args]))
        .collect();
    Ok(TrajectorySignature {
        tool_sequence: tool_sequence(steps),
        full_signature: canonical::digest(&Value::Array(pairs))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(i: usize, tool: &str, args: Value) -> ToolCall {
        ToolCall::new(i, tool, args, json!({"ok": true})).unwrap()
    }

    fn trial(steps: Vec<ToolCall>) -> Trial {
        Trial {
            run_id: "r1".into(),
            case_id: "C01".into(),
            config: AgentConfig::local("m", Architecture::SchemaFirst),
            perturbation: None,
            steps,
            decision: Some(Decision::label("ESCALATE")),
            error: None,
            t_start: "2025-01-01T00:00:00Z".into(),
            t_end: "2025-01-01T00:00:01Z".into(),
            run_index: 0,
        }
    }

    #[test]
    fn sequence_projection() {
        let t = vec![
            call(0, "check_sanctions_list", json!({"entity_name": "Acme Corp"})),
            call(1, "get_customer_profile", json!({"customer_id": "C001"})),
        ];
        assert_eq!(tool_sequence(&t), ["check_sanctions_list", "get_customer_profile"]);
        assert!(tool_sequence(&[]).is_empty());
        let permuted = vec![
            call(0, "get_customer_profile", json!({"customer_id": "C001"})),
            call(1, "check_sanctions_list", json!({"entity_name": "Acme Corp"})),
        ];
        assert_eq!(tool_sequence(&permuted), ["get_customer_profile", "check_sanctions_list"]);
    }

    #[test]
    fn signature_equality() {
        let a = vec![
            call(0, "get_customer_profile", json!({"customer_id": "C001"})),
            call(1, "calculate_risk_score", json!({"transaction_id": "T1"})),
        ];
        let b = a.clone();
        assert_eq!(signature(&a).unwrap(), signature(&b).unwrap());

        let mut c = a.clone();
        c[0] = call(0, "get_customer_profile", json!({"customer_id": "C002"}));
        let (sa, sc) = (signature(&a).unwrap(), signature(&c).unwrap());
        assert_ne!(sa.full_signature, sc.full_signature);
        assert_eq!(sa.tool_sequence, sc.tool_sequence);

        let swapped = vec![
            call(0, "calculate_risk_score", json!({"transaction_id": "T1"})),
            call(1, "get_customer_profile", json!({"customer_id": "C001"})),
        ];
        assert_ne!(sa.full_signature, signature(&swapped).unwrap().full_signature);
    }

    #[test]
    fn signature_ignores_results_and_key_order() {
        let a = vec![ToolCall::new(0, "t", json!({"x": 1, "y": 2}), json!({"r": 1})).unwrap()];
        let b = vec![ToolCall::new(0, "t", json!({"y": 2, "x": 1.0}), json!({"r": 2})).unwrap()];
        assert_eq!(signature(&a).unwrap(), signature(&b).unwrap());
    }

    #[test]
    fn validation() {
        let ok = trial(vec![call(0, "a", json!({})), call(1, "b", json!({}))]);
        ok.validate(None).unwrap();

        let mut gap = ok.clone();
        gap.steps[1].step_index = 2;
        assert_eq!(gap.validate(None), Err(ValidationError::StepGap { position: 1, found: 2 }));

        let mut tampered = ok.clone();
        tampered.steps[0].result = json!({"ok": false});
        assert_eq!(tampered.validate(None), Err(ValidationError::ResultDigest(0)));

        let mut dangling = ok.clone();
        dangling.decision.as_mut().unwrap().evidence_refs = vec![5];
        assert_eq!(dangling.validate(None), Err(ValidationError::DanglingEvidenceRef(5)));

        let space = vec!["DISMISS".to_string()];
        assert!(matches!(ok.validate(Some(&space)), Err(ValidationError::UnknownLabel { .. })));

        let mut undecided = ok.clone();
        undecided.decision = None;
        assert!(matches!(undecided.validate(None), Err(ValidationError::MissingDecision(_))));
        undecided.error = Some("adapter crashed".into());
        undecided.validate(None).unwrap();

        assert!(matches!(trial(vec![]).validate(None), Err(ValidationError::EmptyTrajectory(_))));
    }

    #[test]
    fn transcript_field_names() {
        let t = trial(vec![call(0, "a", json!({"k": "v"}))]);
        let v = serde_json::to_value(&t).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "architecture", "case_id", "decision", "model_id", "perturbation",
                "provider_class", "run_id", "seed", "steps", "t_end", "t_start", "temperature"
            ]
        );
        let step = &v["steps"][0];
        assert_eq!(step["i"], 0);
        assert_eq!(step["tool"], "a");
        assert_eq!(step["result_digest"].as_str().unwrap().len(), 64);
        let back: Trial = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }
}
