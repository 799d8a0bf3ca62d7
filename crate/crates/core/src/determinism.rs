//! Code-based determinism graders: action, signature and decision
//! determinism against a reference run, run/case-level aggregation, and the
//! combinatorial pass@k / pass^k estimators.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::canonical::CanonicalizationError;
use crate::model::{self, Trial};

#[derive(Debug, Error, PartialEq)]
pub enum DeterminismError {
    #[error("no trials to grade")]
    EmptyRunSet,
    #[error("trials span several cases ({0} and {1})")]
    MixedCases(String, String),
    #[error("cases have unequal run counts ({expected} vs {found})")]
    Shape { expected: usize, found: usize },
    #[error("k={k} out of range for n={n}, s={s}")]
    Range { n: u64, s: u64, k: u64 },
    #[error("completed trial {0} has no decision")]
    MissingDecision(String),
    #[error(transparent)]
    Canonical(#[from] CanonicalizationError),
}

/// An exact ratio `num/den`, always emitted with its decimal value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        Fraction { num, den }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    pub fn to_json(&self) -> Value {
        json!({"ratio": self.to_string(), "value": self.value()})
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl PartialOrd for Fraction {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fraction {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl Serialize for Fraction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            ratio: String,
        }
        let r = Repr::deserialize(d)?;
        let (n, m) = r
            .ratio
            .split_once('/')
            .ok_or_else(|| serde::de::Error::custom("expected k/N"))?;
        let num = n.parse().map_err(serde::de::Error::custom)?;
        let den: u64 = m.parse().map_err(serde::de::Error::custom)?;
        if den == 0 {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(Fraction { num, den })
    }
}

/// Completed trials of one case, reference first (lowest `run_index`).
fn anchored<'a>(trials: &'a [Trial]) -> Result<Vec<&'a Trial>, DeterminismError> {
    let mut runs: Vec<&Trial> = trials.iter().filter(|t| t.is_completed()).collect();
    let first = runs.first().ok_or(DeterminismError::EmptyRunSet)?;
    if let Some(other) = runs.iter().find(|t| t.case_id != first.case_id) {
        return Err(DeterminismError::MixedCases(
            first.case_id.clone(),
            other.case_id.clone(),
        ));
    }
    runs.sort_by_key(|t| t.run_index);
    Ok(runs)
}

fn match_fraction<K: PartialEq>(
    trials: &[Trial],
    key: impl Fn(&Trial) -> Result<K, DeterminismError>,
) -> Result<Fraction, DeterminismError> {
    let runs = anchored(trials)?;
    let reference = key(runs[0])?;
    let mut hits = 0;
    for t in &runs {
        if key(t)? == reference {
            hits += 1;
        }
    }
    Ok(Fraction::new(hits, runs.len() as u64))
}

/// Fraction of runs whose tool-name sequence equals the reference run's.
pub fn action_determinism(trials: &[Trial]) -> Result<Fraction, DeterminismError> {
    match_fraction(trials, |t| Ok(model::tool_sequence(&t.steps)))
}

/// Fraction of runs whose tool sequence and canonical arguments equal the reference's.
pub fn signature_determinism(trials: &[Trial]) -> Result<Fraction, DeterminismError> {
    match_fraction(trials, |t| Ok(model::signature(&t.steps)?.full_signature))
}

/// Fraction of runs whose decision label equals the reference's.
pub fn decision_determinism(trials: &[Trial]) -> Result<Fraction, DeterminismError> {
    match_fraction(trials, decision_label)
}

fn decision_label(t: &Trial) -> Result<String, DeterminismError> {
    t.decision
        .as_ref()
        .map(|d| d.label.clone())
        .ok_or_else(|| DeterminismError::MissingDecision(t.run_id.clone()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterminismReport {
    pub case_id: String,
    pub n_runs: usize,
    pub act_det: Fraction,
    pub sig_det: Fraction,
    pub dec_det: Fraction,
    pub all_identical_decision: bool,
    pub all_identical_signature: bool,
    pub all_identical_actions: bool,
    /// Run ids in run order, reference first.
    pub run_ids: Vec<String>,
}

impl DeterminismReport {
    pub fn grade(trials: &[Trial]) -> Result<Self, DeterminismError> {
        let runs = anchored(trials)?;
        let act_det = action_determinism(trials)?;
        let sig_det = signature_determinism(trials)?;
        let dec_det = decision_determinism(trials)?;
        Ok(DeterminismReport {
            case_id: runs[0].case_id.clone(),
            n_runs: runs.len(),
            all_identical_decision: dec_det.is_one(),
            all_identical_signature: sig_det.is_one(),
            all_identical_actions: act_det.is_one(),
            run_ids: runs.iter().map(|t| t.run_id.clone()).collect(),
            act_det,
            sig_det,
            dec_det,
        })
    }
}

/// Which per-case metric an aggregate is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Decision,
    Action,
    Signature,
}

impl Metric {
    fn of(self, r: &DeterminismReport) -> (Fraction, bool) {
        match self {
            Metric::Decision => (r.dec_det, r.all_identical_decision),
            Metric::Action => (r.act_det, r.all_identical_actions),
            Metric::Signature => (r.sig_det, r.all_identical_signature),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateDeterminism {
    pub metric: Metric,
    /// Mean per-case fraction; exact because every case has the same run count.
    pub run_level: Fraction,
    /// Fraction of cases whose runs are all identical.
    pub case_level: Fraction,
    pub n_cases: usize,
    pub runs_per_case: usize,
}

/// Aggregates per-case reports. Run level is the mean per-case fraction,
/// case level the share of cases with every run identical.
pub fn aggregate(
    reports: &[DeterminismReport],
    metric: Metric,
) -> Result<AggregateDeterminism, DeterminismError> {
    let first = reports.first().ok_or(DeterminismError::EmptyRunSet)?;
    let n = first.n_runs;
    if let Some(bad) = reports.iter().find(|r| r.n_runs != n) {
        return Err(DeterminismError::Shape {
            expected: n,
            found: bad.n_runs,
        });
    }
    let mut matched = 0u64;
    let mut identical = 0u64;
    for r in reports {
        let (f, all) = metric.of(r);
        matched += f.num;
        identical += all as u64;
    }
    Ok(AggregateDeterminism {
        metric,
        run_level: Fraction::new(matched, (reports.len() * n) as u64),
        case_level: Fraction::new(identical, reports.len() as u64),
        n_cases: reports.len(),
        runs_per_case: n,
    })
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn check_range(n: u64, s: u64, k: u64) -> Result<(), DeterminismError> {
    if s > n || k == 0 || k > n {
        return Err(DeterminismError::Range { n, s, k });
    }
    Ok(())
}

/// Unbiased estimate of P(at least one success in k trials): 1 − C(n−s, k)/C(n, k).
pub fn pass_at_k(n_trials: u64, n_successes: u64, k: u64) -> Result<f64, DeterminismError> {
    check_range(n_trials, n_successes, k)?;
    let fail = binomial(n_trials - n_successes, k);
    let total = binomial(n_trials, k);
    Ok(1.0 - fail as f64 / total as f64)
}

/// Unbiased estimate of P(all k trials succeed): C(s, k)/C(n, k).
pub fn pass_all_k(n_trials: u64, n_successes: u64, k: u64) -> Result<f64, DeterminismError> {
    check_range(n_trials, n_successes, k)?;
    Ok(binomial(n_successes, k) as f64 / binomial(n_trials, k) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AgentConfig, Architecture, Decision, ToolCall};

    fn trial(run_index: usize, tools: &[&str], arg: &str, label: &str) -> Trial {
        let steps = tools
            .iter()
            .enumerate()
            .map(|(i, t)| ToolCall::new(i, *t, json!({"id": arg}), json!({})).unwrap())
            .collect();
        Trial {
            run_id: format!("r{run_index}"),
            case_id: "C01".into(),
            config: AgentConfig::local("m", Architecture::SchemaFirst),
            perturbation: None,
            steps,
            decision: Some(Decision {
                label: label.into(),
                rationale: format!("rationale {run_index}"),
                ..Default::default()
            }),
            error: None,
            t_start: String::new(),
            t_end: String::new(),
            run_index,
        }
    }

    const AB: &[&str] = &["a", "b"];
    const BA: &[&str] = &["b", "a"];

    #[test]
    fn identical_runs() {
        let ts: Vec<_> = (0..8).map(|i| trial(i, AB, "x", "ESCALATE")).collect();
        assert_eq!(action_determinism(&ts).unwrap(), Fraction::new(8, 8));
        assert_eq!(signature_determinism(&ts).unwrap(), Fraction::new(8, 8));
        assert_eq!(decision_determinism(&ts).unwrap(), Fraction::new(8, 8));
    }

    #[test]
    fn reference_run_is_the_odd_one_out() {
        let mut ts = vec![trial(0, BA, "x", "DISMISS")];
        ts.extend((1..8).map(|i| trial(i, AB, "x", "ESCALATE")));
        assert_eq!(action_determinism(&ts).unwrap().value(), 1.0 / 8.0);
        assert_eq!(decision_determinism(&ts).unwrap().value(), 1.0 / 8.0);
        // input order does not pick the reference; run_index does
        ts.reverse();
        assert_eq!(action_determinism(&ts).unwrap(), Fraction::new(1, 8));
    }

    #[test]
    fn six_of_eight_match() {
        let ts: Vec<_> = (0..8)
            .map(|i| if i < 6 { trial(i, AB, "x", "E") } else { trial(i, BA, "x", "E") })
            .collect();
        assert_eq!(action_determinism(&ts).unwrap().value(), 0.75);
    }

    #[test]
    fn argument_difference_only_hits_signature() {
        let ts: Vec<_> = (0..8)
            .map(|i| trial(i, AB, if i == 5 { "C002" } else { "C001" }, "E"))
            .collect();
        assert_eq!(signature_determinism(&ts).unwrap(), Fraction::new(7, 8));
        assert_eq!(action_determinism(&ts).unwrap(), Fraction::new(8, 8));
    }

    #[test]
    fn decisions_label_only() {
        let labels = ["ESCALATE", "ESCALATE", "DISMISS", "ESCALATE", "ESCALATE", "DISMISS", "ESCALATE", "ESCALATE"];
        let ts: Vec<_> = labels.iter().enumerate().map(|(i, l)| trial(i, AB, "x", l)).collect();
        assert_eq!(decision_determinism(&ts).unwrap(), Fraction::new(6, 8));
        // rationales differ across every run above, yet identical labels score 1
        let same: Vec<_> = (0..8).map(|i| trial(i, AB, "x", "ESCALATE")).collect();
        assert_eq!(decision_determinism(&same).unwrap().value(), 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(decision_determinism(&[]), Err(DeterminismError::EmptyRunSet));
        let mut other = trial(1, AB, "x", "E");
        other.case_id = "C02".into();
        assert!(matches!(
            decision_determinism(&[trial(0, AB, "x", "E"), other]),
            Err(DeterminismError::MixedCases(..))
        ));
    }

    #[test]
    fn failed_trials_are_excluded() {
        let mut ts: Vec<_> = (0..4).map(|i| trial(i, AB, "x", "E")).collect();
        ts[0].error = Some("timeout".into());
        ts[0].decision = None;
        let r = DeterminismReport::grade(&ts).unwrap();
        assert_eq!(r.n_runs, 3);
        assert_eq!(r.run_ids[0], "r1");
    }

    fn report(dec: (u64, u64)) -> DeterminismReport {
        let f = Fraction::new(dec.0, dec.1);
        DeterminismReport {
            case_id: "C".into(),
            n_runs: dec.1 as usize,
            act_det: f,
            sig_det: f,
            dec_det: f,
            all_identical_decision: f.is_one(),
            all_identical_signature: f.is_one(),
            all_identical_actions: f.is_one(),
            run_ids: vec![],
        }
    }

    #[test]
    fn aggregation() {
        let perfect: Vec<_> = (0..10).map(|_| report((8, 8))).collect();
        let agg = aggregate(&perfect, Metric::Decision).unwrap();
        assert_eq!(agg.run_level.value(), 1.0);
        assert_eq!(agg.case_level.value(), 1.0);

        let mut one_off = perfect.clone();
        one_off[3] = report((6, 8));
        let agg = aggregate(&one_off, Metric::Decision).unwrap();
        assert_eq!(agg.case_level, Fraction::new(9, 10));
        assert_eq!(agg.run_level.value(), 0.975);
        assert!(agg.case_level <= agg.run_level);

        let mut ragged = perfect.clone();
        ragged[0] = report((4, 4));
        assert_eq!(
            aggregate(&ragged, Metric::Decision),
            Err(DeterminismError::Shape { expected: 4, found: 8 })
        );
    }

    #[test]
    fn pass_estimators() {
        assert_eq!(pass_at_k(8, 8, 3).unwrap(), 1.0);
        assert!((pass_at_k(4, 2, 2).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(pass_at_k(8, 0, 5).unwrap(), 0.0);
        for k in 1..=8 {
            assert_eq!(pass_all_k(8, 8, k).unwrap(), 1.0);
        }
        assert!((pass_all_k(4, 2, 2).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(pass_all_k(8, 7, 8).unwrap(), 0.0);
        assert!(matches!(pass_at_k(3, 1, 4), Err(DeterminismError::Range { .. })));
        assert!(pass_all_k(3, 4, 1).is_err());
        assert!(pass_at_k(3, 1, 0).is_err());
    }

    #[test]
    fn fraction_serialization() {
        let f = Fraction::new(7, 8);
        let v = serde_json::to_value(f).unwrap();
        assert_eq!(v, json!({"ratio": "7/8", "value": 0.875}));
        assert_eq!(serde_json::from_value::<Fraction>(v).unwrap(), f);
    }
}
