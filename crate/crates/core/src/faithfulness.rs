//! Evidence-conditioned faithfulness.
//!
//! Claims are aligned to evidence with an inspectable lexical rule: token
//! Jaccard at least 0.6, every claim entity present in the evidence, and every
//! claim number matched by an evidence number. No model-based judging.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical;
use crate::determinism::Fraction;
use crate::model::{Decision, ToolCall};

/// Jaccard acceptance threshold as an exact ratio (0.6).
pub const JACCARD_THRESHOLD: (u64, u64) = (3, 5);
/// Relative tolerance for non-integer numbers.
pub const NUMERIC_REL_TOL: f64 = 1e-6;

/// Version tag of the stopword list below.
pub const STOPWORDS_VERSION: &str = "en-50-v1";

/// Fixed 50-word English stopword list.
pub const STOPWORDS: [&str; 50] = [
    "a", "an", "the", "is", "are", "was", "were", "be", "been", "being",
    "has", "have", "had", "do", "does", "did", "of", "to", "in", "on",
    "at", "by", "for", "with", "from", "as", "into", "than", "then", "and",
    "or", "but", "if", "this", "that", "these", "those", "it", "its", "there",
    "their", "which", "who", "what", "against", "over", "under", "per", "via", "so",
];

#[derive(Debug, Error, PartialEq)]
pub enum FaithfulnessError {
    #[error("constraint set is empty")]
    EmptyConstraintSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitTag {
    Plain,
    Currency,
    Fraction,
    Date,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumberValue {
    pub value: f64,
    pub unit: UnitTag,
}

impl NumberValue {
    pub fn matches(&self, other: &NumberValue) -> bool {
        if self.unit != other.unit {
            return false;
        }
        let exact = self.unit == UnitTag::Date
            || (self.value.fract() == 0.0 && other.value.fract() == 0.0);
        if exact {
            self.value == other.value
        } else {
            let scale = self.value.abs().max(other.value.abs());
            (self.value - other.value).abs() <= NUMERIC_REL_TOL * scale
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FeatureSet {
    pub tokens: BTreeSet<String>,
    pub entities: BTreeSet<String>,
    pub numbers: Vec<NumberValue>,
}

impl FeatureSet {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty() && self.entities.is_empty() && self.numbers.is_empty()
    }
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?x)
            (?P<date>\d{4}-\d{2}-\d{2})
            | (?P<sym>[$€£])\s?(?P<camt>(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?)
            | (?P<num>-?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?)
              (?: (?P<pct>\s?%) | \s?(?P<code>USD|EUR|GBP|JPY|CHF)\b )?
            ",
        )
        .expect("number regex")
    })
}

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z0-9]+").expect("word regex"))
}

fn is_ident_char(c: Option<char>) -> bool {
    c.is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_amount(s: &str) -> Option<f64> {
    s.replace(',', "").parse().ok()
}

fn epoch_day(s: &str) -> Option<f64> {
    let d = NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1)?;
    Some((d - epoch).num_days() as f64)
}

fn is_titlecase(w: &str) -> bool {
    let mut cs = w.chars();
    cs.next().is_some_and(|c| c.is_ascii_uppercase())
        && w.len() >= 2
        && cs.all(|c| c.is_ascii_lowercase())
}

fn is_all_caps(w: &str) -> bool {
    w.len() >= 2
        && w.chars().any(|c| c.is_ascii_uppercase())
        && w.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
}

fn is_identifier(w: &str) -> bool {
    w.chars().any(|c| c.is_ascii_alphabetic()) && w.chars().any(|c| c.is_ascii_digit())
}

/// Content tokens, key entities and numbers of a text.
///
/// - numbers: `$10,000` and `10000 USD` → (10000, currency); `5%` → (0.05,
///   fraction); ISO dates → (days since 1970-01-01, date); otherwise plain.
///   Digits inside identifiers such as `C001` are not numbers.
/// - tokens: lowercased alphanumeric words containing a letter, minus stopwords.
/// - entities: all-caps words (`OFAC`), letter+digit identifiers (`C001`) and
///   runs of two or more capitalized words (`Acme Corp`).
pub fn extract_features(text: &str) -> FeatureSet {
    let mut fs = FeatureSet::default();
    let mut masked: Vec<u8> = text.as_bytes().to_vec();

    for caps in number_re().captures_iter(text) {
        let m = caps.get(0).expect("whole match");
        let before = text[..m.start()].chars().next_back();
        let after = text[m.end()..].chars().next();
        if is_ident_char(before) || is_ident_char(after) {
            continue;
        }
        let parsed = if let Some(d) = caps.name("date") {
            epoch_day(d.as_str()).map(|v| NumberValue { value: v, unit: UnitTag::Date })
        } else if let Some(a) = caps.name("camt") {
            parse_amount(a.as_str()).map(|v| NumberValue { value: v, unit: UnitTag::Currency })
        } else {
            let n = caps.name("num").expect("num group");
            parse_amount(n.as_str()).map(|v| {
                if caps.name("pct").is_some() {
                    NumberValue { value: v / 100.0, unit: UnitTag::Fraction }
                } else if caps.name("code").is_some() {
                    NumberValue { value: v, unit: UnitTag::Currency }
                } else {
                    NumberValue { value: v, unit: UnitTag::Plain }
                }
            })
        };
        if let Some(n) = parsed {
            if !fs.numbers.iter().any(|x| x.unit == n.unit && x.value == n.value) {
                fs.numbers.push(n);
            }
            masked[m.start()..m.end()].fill(b' ');
        }
    }

    let masked = String::from_utf8_lossy(&masked).into_owned();
    let mut run: Vec<&str> = Vec::new();
    let mut last_end: Option<usize> = None;
    let flush = |run: &mut Vec<&str>, fs: &mut FeatureSet| {
        if run.len() >= 2 {
            fs.entities.insert(run.join(" "));
        }
        run.clear();
    };
    for m in word_re().find_iter(&masked) {
        let w = m.as_str();
        if !w.chars().any(|c| c.is_ascii_alphabetic()) {
            flush(&mut run, &mut fs);
            last_end = None;
            continue;
        }
        let lower = w.to_ascii_lowercase();
        if !STOPWORDS.contains(&lower.as_str()) {
            fs.tokens.insert(lower);
        }
        if is_all_caps(w) || is_identifier(w) {
            fs.entities.insert(w.to_string());
        }
        let adjacent = last_end.is_some_and(|e| &masked[e..m.start()] == " ");
        if is_titlecase(w) {
            if !adjacent {
                flush(&mut run, &mut fs);
            }
            run.push(w);
        } else {
            flush(&mut run, &mut fs);
        }
        last_end = Some(m.end());
    }
    flush(&mut run, &mut fs);
    fs
}

/// |a ∩ b| / |a ∪ b|, zero when both are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let (inter, union) = overlap(a, b);
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn overlap(a: &BTreeSet<String>, b: &BTreeSet<String>) -> (usize, usize) {
    let inter = a.intersection(b).count();
    (inter, a.len() + b.len() - inter)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentCheck {
    pub aligned: bool,
    pub similarity: f64,
    pub jaccard_pass: bool,
    pub entity_pass: bool,
    pub number_pass: bool,
}

/// The alignment relation between one claim and one evidence item.
pub fn is_aligned(claim: &FeatureSet, evidence: &FeatureSet) -> AlignmentCheck {
    let (inter, union) = overlap(&claim.tokens, &evidence.tokens);
    let similarity = if union == 0 { 0.0 } else { inter as f64 / union as f64 };
    let (num, den) = JACCARD_THRESHOLD;
    let jaccard_pass = union > 0 && inter as u64 * den >= union as u64 * num;
    let entity_pass = claim.entities.is_subset(&evidence.entities);
    let number_pass = claim
        .numbers
        .iter()
        .all(|c| evidence.numbers.iter().any(|e| c.matches(e)));
    AlignmentCheck {
        aligned: jaccard_pass && entity_pass && number_pass,
        similarity,
        jaccard_pass,
        entity_pass,
        number_pass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceItem {
    pub step_index: usize,
    pub text: String,
    #[serde(skip)]
    pub features: FeatureSet,
}

impl EvidenceItem {
    pub fn new(step_index: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        let features = extract_features(&text);
        EvidenceItem { step_index, text, features }
    }
}

fn render_scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("null".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => canonical::format_number(n).ok(),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

/// `(dotted path, rendered value)` for every scalar leaf; array indices are
/// left out of paths so they cannot masquerade as numbers.
pub fn flatten_leaves(doc: &Value) -> Vec<(String, String)> {
    fn walk(v: &Value, path: &str, out: &mut Vec<(String, String)>) {
        match v {
            Value::Object(m) => {
                for (k, child) in m {
                    let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                    walk(child, &p, out);
                }
            }
            Value::Array(items) => {
                for child in items {
                    walk(child, path, out);
                }
            }
            scalar => {
                if let Some(s) = render_scalar(scalar) {
                    out.push((path.to_string(), s));
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(doc, "", &mut out);
    out
}

/// Render a leaf the way evidence items and structured claims both spell it.
pub fn render_leaf(path: &str, value: &str) -> String {
    if path.is_empty() {
        value.to_string()
    } else {
        format!("{path}: {value}")
    }
}

/// Evidence items for a trajectory: one for each whole tool result, then one
/// for each scalar leaf of that result.
pub fn evidence_from_trajectory(steps: &[ToolCall]) -> Vec<EvidenceItem> {
    let mut items = Vec::new();
    for step in steps {
        let leaves = flatten_leaves(&step.result);
        let whole = leaves
            .iter()
            .map(|(p, v)| render_leaf(p, v))
            .collect::<Vec<_>>()
            .join("; ");
        items.push(EvidenceItem::new(step.step_index, whole));
        for (p, v) in &leaves {
            items.push(EvidenceItem::new(step.step_index, render_leaf(p, v)));
        }
    }
    items
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub text: String,
    #[serde(skip)]
    pub features: FeatureSet,
    pub aligned_to: Option<usize>,
    pub similarity: f64,
}

/// Claims of a decision: structured claims verbatim when present, otherwise
/// the rationale split into sentences.
pub fn extract_claims(decision: &Decision) -> Vec<String> {
    if !decision.claims.is_empty() {
        return decision.claims.clone();
    }
    split_sentences(&decision.rationale)
}

fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') && chars.peek().is_none_or(|n| n.is_whitespace()) {
            let s = current.trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            current.clear();
        }
    }
    let s = current.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
    out
}

/// Per-claim alignment outcome, serialized for auditor review.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentRecord {
    pub claim: String,
    pub aligned_to: Option<usize>,
    pub similarity: f64,
    pub entity_pass: bool,
    pub number_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundingResult {
    pub grounding: Fraction,
    /// No claims at all; grounding is reported as 1 but flagged.
    pub vacuous: bool,
    pub records: Vec<AlignmentRecord>,
}

impl GroundingResult {
    pub fn value(&self) -> f64 {
        self.grounding.value()
    }
}

/// Fraction of claims aligned with at least one evidence item.
pub fn evidence_grounding(claims: &[String], evidence: &[EvidenceItem]) -> GroundingResult {
    if claims.is_empty() {
        return GroundingResult {
            grounding: Fraction::new(1, 1),
            vacuous: true,
            records: Vec::new(),
        };
    }
    let mut records = Vec::with_capacity(claims.len());
    for claim in claims {
        let features = extract_features(claim);
        let mut best: Option<(usize, AlignmentCheck)> = None;
        let mut hit = None;
        for item in evidence {
            let check = is_aligned(&features, &item.features);
            if check.aligned {
                hit = Some((item.step_index, check));
                break;
            }
            if best.as_ref().is_none_or(|(_, b)| check.similarity > b.similarity) {
                best = Some((item.step_index, check));
            }
        }
        let record = match (hit, best) {
            (Some((step, c)), _) => AlignmentRecord {
                claim: claim.clone(),
                aligned_to: Some(step),
                similarity: c.similarity,
                entity_pass: c.entity_pass,
                number_pass: c.number_pass,
            },
            (None, Some((_, c))) => AlignmentRecord {
                claim: claim.clone(),
                aligned_to: None,
                similarity: c.similarity,
                entity_pass: c.entity_pass,
                number_pass: c.number_pass,
            },
            (None, None) => AlignmentRecord {
                claim: claim.clone(),
                aligned_to: None,
                similarity: 0.0,
                entity_pass: features.entities.is_empty(),
                number_pass: features.numbers.is_empty(),
            },
        };
        records.push(record);
    }
    let aligned = records.iter().filter(|r| r.aligned_to.is_some()).count();
    GroundingResult {
        grounding: Fraction::new(aligned as u64, claims.len() as u64),
        vacuous: false,
        records,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Comparator {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Le => lhs <= rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
        }
    }
}

/// A limit the decision must respect.
///
/// The constraint binds only when the decision label is in `applies_to`;
/// then `facts[metric] <comparator> threshold` must hold. A missing fact
/// counts as a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub id: String,
    pub limit_type: String,
    pub metric: String,
    pub comparator: Comparator,
    pub threshold: f64,
    pub applies_to: Vec<String>,
}

impl ConstraintSpec {
    pub fn satisfied_by(&self, decision: &Decision, facts: &BTreeMap<String, f64>) -> bool {
        if !self.applies_to.iter().any(|l| *l == decision.label) {
            return true;
        }
        facts
            .get(&self.metric)
            .is_some_and(|&v| v.is_finite() && self.comparator.holds(v, self.threshold))
    }
}

/// Fraction of constraints the decision satisfies in the case's context.
pub fn constraint_satisfaction(
    decision: &Decision,
    constraints: &[ConstraintSpec],
    facts: &BTreeMap<String, f64>,
) -> Result<Fraction, FaithfulnessError> {
    if constraints.is_empty() {
        return Err(FaithfulnessError::EmptyConstraintSet);
    }
    let ok = constraints
        .iter()
        .filter(|k| k.satisfied_by(decision, facts))
        .count();
    Ok(Fraction::new(ok as u64, constraints.len() as u64))
}
