//! Seeded stress transformations of fixtures and tool responses, plus
//! ΔDet and tier-based projection.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Months, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};
use thiserror::Error;

use crate::benchmark::{CaseFixture, ToolResponseTable};
use crate::canonical::Digest;
use crate::model::AgentConfig;
use crate::seeding::rng;
use crate::stats::Tier;

/// Degradation at or above this is not robust.
pub const ROBUSTNESS_BOUND: f64 = 0.10;
pub const OUTLIER_FACTOR: i64 = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum StressError {
    #[error("out of range: {0}")]
    Range(String),
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("no degradation recorded for {tier:?} under {kind}")]
    MissingDelta { tier: Tier, kind: PerturbationKind },
    #[error("unknown perturbation {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Baseline,
    Redeploy,
    DqFault,
    TemporalShift,
    MarketShock,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 5] = [
        PerturbationKind::Baseline,
        PerturbationKind::Redeploy,
        PerturbationKind::DqFault,
        PerturbationKind::TemporalShift,
        PerturbationKind::MarketShock,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbationKind::Baseline => "baseline",
            PerturbationKind::Redeploy => "redeploy",
            PerturbationKind::DqFault => "dq_fault",
            PerturbationKind::TemporalShift => "temporal_shift",
            PerturbationKind::MarketShock => "market_shock",
        }
    }

    /// Experimental kinds are measured but never gated.
    pub fn is_experimental(self) -> bool {
        self == PerturbationKind::TemporalShift
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PerturbationKind {
    type Err = StressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PerturbationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| StressError::UnknownKind(s.to_string()))
    }
}

fn default_rate() -> f64 {
    0.10
}
fn default_multiplier() -> f64 {
    3.0
}
fn default_offset() -> u32 {
    6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default = "default_multiplier")]
    pub sigma_multiplier: f64,
    #[serde(default = "default_offset")]
    pub offset_months: u32,
    #[serde(default)]
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind) -> Self {
        PerturbationSpec {
            kind,
            rate: default_rate(),
            sigma_multiplier: default_multiplier(),
            offset_months: default_offset(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), StressError> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(StressError::Range(format!("rate {} outside [0, 1]", self.rate)));
        }
        if !(self.sigma_multiplier > 0.0) {
            return Err(StressError::Range(format!("sigma multiplier {} must be positive", self.sigma_multiplier)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultType {
    Null,
    #[serde(rename = "nan")]
    NaN,
    Outlier,
}

impl FaultType {
    pub const ALL: [FaultType; 3] = [FaultType::Null, FaultType::NaN, FaultType::Outlier];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultRecord {
    /// Index into the (pooled) response list.
    pub response: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_id: Option<String>,
    pub tool: String,
    /// JSON pointer to the replaced leaf; empty when the result is scalar.
    pub field: String,
    pub drawn: FaultType,
    /// Differs from `drawn` only when no leaf would change under the drawn fault.
    pub applied: FaultType,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultManifest {
    pub seed: u64,
    pub rate: f64,
    pub n_responses: usize,
    pub faults: Vec<FaultRecord>,
}

fn is_sigma_key(pointer: &str) -> bool {
    pointer.rsplit('/').next().is_some_and(|k| k.ends_with("_sigma"))
}

/// JSON pointers of every scalar leaf, in document order.
fn leaf_pointers(v: &Value, prefix: &str, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                let esc = k.replace('~', "~0").replace('/', "~1");
                leaf_pointers(child, &format!("{prefix}/{esc}"), out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                leaf_pointers(child, &format!("{prefix}/{i}"), out);
            }
        }
        _ => out.push(prefix.to_string()),
    }
}

fn outlier(v: &Value) -> Option<Value> {
    let n = v.as_number()?;
    if let Some(i) = n.as_i64() {
        if let Some(x) = i.checked_mul(OUTLIER_FACTOR) {
            return Some(Value::Number(x.into()));
        }
    }
    let x = n.as_f64()? * OUTLIER_FACTOR as f64;
    Some(match Number::from_f64(x) {
        Some(num) if x.is_finite() => Value::Number(num),
        _ => Value::String(if x > 0.0 { "Infinity" } else { "-Infinity" }.into()),
    })
}

fn changes(v: &Value, fault: FaultType) -> bool {
    match fault {
        FaultType::Null => !v.is_null(),
        FaultType::NaN => v.as_str() != Some("NaN"),
        FaultType::Outlier => outlier(v).is_some_and(|o| o != *v),
    }
}

/// Corrupt one leaf of `result` and report where and how.
fn fault_one(result: &mut Value, drawn: FaultType, rng: &mut impl Rng) -> (String, FaultType) {
    let mut leaves = Vec::new();
    leaf_pointers(result, "", &mut leaves);
    let primary: Vec<String> = leaves.iter().filter(|p| !is_sigma_key(p)).cloned().collect();
    let pool = if primary.is_empty() { leaves } else { primary };
    if pool.is_empty() {
        // Empty object or array: replace the whole result.
        *result = match drawn {
            FaultType::NaN => Value::String("NaN".into()),
            _ => Value::Null,
        };
        let applied = if drawn == FaultType::NaN { FaultType::NaN } else { FaultType::Null };
        return (String::new(), applied);
    }
    // A fault must change the leaf: nulls stay null and 0 × 1000 is still 0,
    // so fall back to another type when the drawn one has no target.
    let fallbacks = [drawn, FaultType::Null, FaultType::NaN];
    let Some((applied, targets)) = fallbacks.iter().find_map(|&ft| {
        let hits: Vec<&String> = pool.iter().filter(|p| result.pointer(p).is_some_and(|v| changes(v, ft))).collect();
        (!hits.is_empty()).then_some((ft, hits))
    }) else {
        *result = Value::String("NaN".into());
        return (String::new(), FaultType::NaN);
    };
    let pointer = targets[rng.random_range(0..targets.len())].clone();
    let slot = result.pointer_mut(&pointer).expect("pointer from this document");
    *slot = match applied {
        FaultType::Null => Value::Null,
        FaultType::NaN => Value::String("NaN".into()),
        FaultType::Outlier => outlier(slot).expect("numeric leaf"),
    };
    (pointer, applied)
}

/// Perturb exactly `round(rate · n)` of `results`, chosen by seeded shuffle.
/// Returns `(index, field, drawn, applied)` per fault, ordered by index.
pub fn fault_responses(
    results: &mut [&mut Value],
    rate: f64,
    seed: u64,
) -> Result<Vec<(usize, String, FaultType, FaultType)>, StressError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(StressError::Range(format!("rate {rate} outside [0, 1]")));
    }
    let n = results.len();
    let k = (rate * n as f64).round() as usize;
    let mut r = rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut r);
    let mut targets = order[..k].to_vec();
    targets.sort_unstable();
    let mut out = Vec::with_capacity(k);
    for idx in targets {
        let drawn = FaultType::ALL[r.random_range(0..3)];
        let (field, applied) = fault_one(results[idx], drawn, &mut r);
        out.push((idx, field, drawn, applied));
    }
    Ok(out)
}

/// Inject NULL / "NaN" / ×1000 faults into a share of a table's responses.
pub fn inject_dq_fault(
    table: &ToolResponseTable,
    rate: f64,
    seed: u64,
) -> Result<(ToolResponseTable, FaultManifest), StressError> {
    if table.is_empty() {
        return Err(StressError::Fixture("empty response table".into()));
    }
    let mut out = table.clone();
    let mut refs: Vec<&mut Value> = out.entries.iter_mut().map(|e| &mut e.result).collect();
    let faults = fault_responses(&mut refs, rate, seed)?;
    let manifest = FaultManifest {
        seed,
        rate,
        n_responses: table.len(),
        faults: faults
            .into_iter()
            .map(|(i, field, drawn, applied)| FaultRecord {
                response: i,
                case_id: None,
                tool: table.entries[i].tool.clone(),
                field,
                drawn,
                applied,
            })
            .collect(),
    };
    Ok((out, manifest))
}

/// As [`inject_dq_fault`], pooling the responses of several cases so that
/// the rate applies to the whole set.
pub fn inject_dq_fault_pooled(
    cases: &[CaseFixture],
    rate: f64,
    seed: u64,
) -> Result<(Vec<CaseFixture>, FaultManifest), StressError> {
    let mut out: Vec<CaseFixture> = cases.to_vec();
    let mut owners = Vec::new();
    let mut refs: Vec<&mut Value> = Vec::new();
    for (ci, case) in out.iter_mut().enumerate() {
        for (ei, e) in case.tool_response_table.entries.iter_mut().enumerate() {
            owners.push((ci, ei));
            refs.push(&mut e.result);
        }
    }
    if refs.is_empty() {
        return Err(StressError::Fixture("empty response table".into()));
    }
    let n = refs.len();
    let faults = fault_responses(&mut refs, rate, seed)?;
    let records = faults
        .into_iter()
        .map(|(i, field, drawn, applied)| {
            let (ci, ei) = owners[i];
            FaultRecord {
                response: i,
                case_id: Some(cases[ci].case_id.clone()),
                tool: cases[ci].tool_response_table.entries[ei].tool.clone(),
                field,
                drawn,
                applied,
            }
        })
        .collect();
    for c in &mut out {
        c.refresh_evidence_texts();
    }
    Ok((out, FaultManifest { seed, rate, n_responses: n, faults: records }))
}

/// Shift every shock-eligible numeric field by ±`multiplier`·σ. A field is
/// eligible when it is a numeric object member not itself named `*_sigma`;
/// its σ lives in the sibling `<name>_sigma`.
pub fn market_shock(table: &ToolResponseTable, sigma_multiplier: f64, seed: u64) -> Result<ToolResponseTable, StressError> {
    if !(sigma_multiplier > 0.0) {
        return Err(StressError::Range(format!("sigma multiplier {sigma_multiplier} must be positive")));
    }
    let mut r = rng(seed);
    let mut out = table.clone();
    for e in &mut out.entries {
        shock_value(&mut e.result, &e.tool, "", sigma_multiplier, &mut r)?;
    }
    Ok(out)
}

fn shock_value(v: &mut Value, tool: &str, path: &str, mult: f64, r: &mut impl Rng) -> Result<(), StressError> {
    match v {
        Value::Object(m) => {
            let keys: Vec<String> = m.keys().cloned().collect();
            for k in &keys {
                let child_path = format!("{path}/{k}");
                if m[k].is_number() && !k.ends_with("_sigma") {
                    let sigma = m
                        .get(&format!("{k}_sigma"))
                        .and_then(Value::as_f64)
                        .ok_or_else(|| StressError::Fixture(format!("{tool}{child_path} has no σ companion")))?;
                    let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
                    if sigma != 0.0 {
                        let x = m[k].as_f64().expect("numeric") + sign * mult * sigma;
                        m.insert(k.clone(), crate::canonical::number(x).map_err(|e| StressError::Fixture(e.to_string()))?);
                    }
                } else {
                    shock_value(m.get_mut(k).expect("key present"), tool, &child_path, mult, r)?;
                }
            }
            Ok(())
        }
        Value::Array(items) => {
            for (i, item) in items.iter_mut().enumerate() {
                if item.is_object() || item.is_array() {
                    shock_value(item, tool, &format!("{path}/{i}"), mult, r)?;
                }
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Case-level market shock; evidence texts follow the shocked results.
pub fn market_shock_case(case: &CaseFixture, sigma_multiplier: f64, seed: u64) -> Result<CaseFixture, StressError> {
    let mut out = case.clone();
    out.tool_response_table = market_shock(&case.tool_response_table, sigma_multiplier, seed)?;
    out.refresh_evidence_texts();
    Ok(out)
}

fn shift_date(s: &str, months: u32) -> Option<String> {
    if s.len() != 10 {
        return None;
    }
    let d = NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
    Some(d.checked_sub_months(Months::new(months))?.format("%Y-%m-%d").to_string())
}

fn shift_dates(v: &mut Value, months: u32) {
    match v {
        Value::String(s) => {
            if let Some(shifted) = shift_date(s, months) {
                *s = shifted;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| shift_dates(x, months)),
        Value::Object(m) => m.values_mut().for_each(|x| shift_dates(x, months)),
        _ => {}
    }
}

/// Move every ISO date in the fixture `offset_months` into the past,
/// clamping the day of month. Experimental: not part of default gates.
pub fn temporal_shift(case: &CaseFixture, offset_months: u32) -> CaseFixture {
    if offset_months == 0 {
        return case.clone();
    }
    let mut out = case.clone();
    for v in out.inputs.values_mut() {
        shift_dates(v, offset_months);
    }
    for e in &mut out.tool_response_table.entries {
        shift_dates(&mut e.args, offset_months);
        shift_dates(&mut e.result, offset_months);
    }
    if let Some(d) = shift_date(&out.as_of, offset_months) {
        out.as_of = d;
    }
    out.refresh_evidence_texts();
    out
}

/// Mark a fresh deployment: same configuration, new session id derived from
/// the previous one and a deployment counter.
pub fn redeploy_marker(config: &AgentConfig, deployment: u64) -> AgentConfig {
    let prev = config.session.clone().unwrap_or_default();
    let d = Digest::of_parts([
        config.group_key().as_bytes(),
        &[0],
        prev.as_bytes(),
        &[0],
        &deployment.to_be_bytes(),
    ]);
    AgentConfig { session: Some(format!("session-{}", &d.to_hex()[..16])), ..config.clone() }
}

/// Snap to a 1e-12 grid so differences of two-decimal inputs are exact.
fn snap(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaDet {
    pub delta: f64,
    pub robust: bool,
}

/// ΔDet = baseline − perturbed; robust when below 0.10.
pub fn determinism_delta(baseline_dec_det: f64, perturbed_dec_det: f64) -> DeltaDet {
    let delta = snap(baseline_dec_det - perturbed_dec_det);
    DeltaDet { delta, robust: delta < ROBUSTNESS_BOUND }
}

/// Median degradation by (tier, perturbation).
#[derive(Debug, Clone, PartialEq)]
pub struct TierDeltaTable {
    entries: BTreeMap<(Tier, PerturbationKind), f64>,
}

impl Default for TierDeltaTable {
    fn default() -> Self {
        let mut t = TierDeltaTable { entries: BTreeMap::new() };
        for (tier, kind, d) in [
            (Tier::Tier1, PerturbationKind::Redeploy, 0.0),
            (Tier::Tier1, PerturbationKind::DqFault, 0.06),
            (Tier::Tier1, PerturbationKind::MarketShock, 0.0),
            (Tier::Frontier, PerturbationKind::Redeploy, 0.12),
            (Tier::Frontier, PerturbationKind::DqFault, 0.0),
            (Tier::Frontier, PerturbationKind::MarketShock, 0.0),
        ] {
            t.entries.insert((tier, kind), d);
        }
        t
    }
}

impl TierDeltaTable {
    pub fn empty() -> Self {
        TierDeltaTable { entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, tier: Tier, kind: PerturbationKind, delta: f64) -> Result<(), StressError> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(StressError::Range(format!("delta {delta} outside [0, 1]")));
        }
        self.entries.insert((tier, kind), delta);
        Ok(())
    }

    pub fn get(&self, tier: Tier, kind: PerturbationKind) -> Option<f64> {
        self.entries.get(&(tier, kind)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Tier, PerturbationKind, f64)> + '_ {
        self.entries.iter().map(|((t, k), d)| (*t, *k, *d))
    }
}

impl Serialize for TierDeltaTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Row {
            tier: Tier,
            kind: PerturbationKind,
            delta: f64,
        }
        let rows: Vec<Row> = self.iter().map(|(tier, kind, delta)| Row { tier, kind, delta }).collect();
        rows.serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Projection {
    pub value: f64,
    pub projected: bool,
}

/// clamp(baseline − Δ_tier,kind, 0, 1), flagged as projected.
pub fn project_stress_determinism(
    baseline_det: f64,
    tier: Tier,
    kind: PerturbationKind,
    table: &TierDeltaTable,
) -> Result<Projection, StressError> {
    let delta = table.get(tier, kind).ok_or(StressError::MissingDelta { tier, kind })?;
    Ok(Projection { value: snap(baseline_det - delta).clamp(0.0, 1.0), projected: true })
}
