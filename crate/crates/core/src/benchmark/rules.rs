//! Decision tables for the three tasks, plus the per-category tool sequences
//! a rule-following agent walks through. Ground truth and the scripted agent
//! both read from here, so the two can never disagree.

use std::collections::BTreeMap;

use serde_json::Value;

use super::TaskId;

/// Version tag carried into fixtures and reports.
pub const RULES_VERSION: &str = "rules-v1";

pub const SANCTIONS_ESCALATE: f64 = 0.85;
pub const SANCTIONS_INVESTIGATE: f64 = 0.50;
pub const RISK_ESCALATE: f64 = 80.0;
pub const RISK_INVESTIGATE: f64 = 60.0;
/// Transactions within 10% below the 10,000 reporting threshold in 7 days.
pub const STRUCTURING_COUNT: f64 = 3.0;

pub const POSITION_LIMIT: f64 = 0.05;
pub const SECTOR_CAP: f64 = 0.25;
pub const MAX_PARTICIPATION: f64 = 0.10;
pub const MIN_CASH: f64 = 0.02;
/// A lone violation at most this far past its limit (relative) is fixable.
pub const MODIFY_TOLERANCE: f64 = 0.20;

pub const FIX_SUCCESS_MIN: f64 = 0.90;
pub const QUARANTINE_RECORDS: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgSource {
    Input(&'static str),
    Literal(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepTemplate {
    pub tool: &'static str,
    pub args: &'static [(&'static str, ArgSource)],
}

use ArgSource::{Input, Literal};

const SANCTIONS: StepTemplate = StepTemplate {
    tool: "check_sanctions_list",
    args: &[("entity_name", Input("entity_name"))],
};
const PROFILE: StepTemplate = StepTemplate {
    tool: "get_customer_profile",
    args: &[("customer_id", Input("customer_id"))],
};
const RISK: StepTemplate = StepTemplate {
    tool: "calculate_risk_score",
    args: &[("transaction_id", Input("transaction_id"))],
};

const POSITIONS: StepTemplate = StepTemplate {
    tool: "get_portfolio_positions",
    args: &[("portfolio_id", Input("portfolio_id"))],
};
const MARKET: StepTemplate = StepTemplate {
    tool: "get_market_data",
    args: &[("ticker", Input("ticker"))],
};
const CONCENTRATION: StepTemplate = StepTemplate {
    tool: "check_concentration_limits",
    args: &[
        ("portfolio_id", Input("portfolio_id")),
        ("ticker", Input("ticker")),
        ("proposed_weight", Input("proposed_weight")),
    ],
};
const VAR: StepTemplate = StepTemplate {
    tool: "calculate_var",
    args: &[
        ("portfolio_id", Input("portfolio_id")),
        ("horizon", Input("horizon_days")),
        ("confidence", Input("confidence")),
    ],
};
const REGULATORY: StepTemplate = StepTemplate {
    tool: "get_regulatory_constraints",
    args: &[("account_type", Input("account_type"))],
};

const DETAILS: StepTemplate = StepTemplate {
    tool: "get_exception_details",
    args: &[("exception_id", Input("exception_id"))],
};
const REFERENCE: StepTemplate = StepTemplate {
    tool: "query_reference_data",
    args: &[("field", Input("field")), ("value", Input("value"))],
};
const HISTORY: StepTemplate = StepTemplate {
    tool: "get_historical_fixes",
    args: &[("exception_type", Input("exception_type"))],
};
const VALIDATE: StepTemplate = StepTemplate {
    tool: "validate_fix",
    args: &[("exception_id", Input("exception_id")), ("proposed_fix", Input("candidate_fix"))],
};
pub const APPLY_FIX: StepTemplate = StepTemplate {
    tool: "apply_fix",
    args: &[("exception_id", Input("exception_id")), ("fix", Input("candidate_fix"))],
};
pub const ESCALATE_REVIEW: StepTemplate = StepTemplate {
    tool: "escalate_to_human",
    args: &[("exception_id", Input("exception_id")), ("reason", Literal("manual_review"))],
};
pub const ESCALATE_QUARANTINE: StepTemplate = StepTemplate {
    tool: "escalate_to_human",
    args: &[("exception_id", Input("exception_id")), ("reason", Literal("quarantine"))],
};

/// Information-gathering steps for a category, in call order.
pub fn expected_sequence(task: TaskId, category: &str) -> Option<&'static [StepTemplate]> {
    let seq: &'static [StepTemplate] = match (task, category) {
        (TaskId::ComplianceTriage, "sanctions") => &[SANCTIONS, PROFILE, RISK],
        (TaskId::ComplianceTriage, "pep") => &[PROFILE, SANCTIONS, RISK],
        (TaskId::ComplianceTriage, "structuring") => &[RISK, PROFILE],
        (TaskId::ComplianceTriage, "high_value") => &[RISK, SANCTIONS, PROFILE],
        (TaskId::ComplianceTriage, "high_risk_sector") => &[PROFILE, RISK],
        (TaskId::ComplianceTriage, "standard") => &[SANCTIONS, RISK],
        (TaskId::PortfolioConstraint, "position_limit") => {
            &[POSITIONS, MARKET, CONCENTRATION, VAR, REGULATORY]
        }
        (TaskId::PortfolioConstraint, "sector_cap") => &[POSITIONS, MARKET, CONCENTRATION, REGULATORY],
        (TaskId::PortfolioConstraint, "liquidity") => &[MARKET, POSITIONS, CONCENTRATION, REGULATORY, VAR],
        (TaskId::PortfolioConstraint, "cash_reserve") => &[POSITIONS, CONCENTRATION, MARKET, REGULATORY],
        (TaskId::PortfolioConstraint, "clean") => &[POSITIONS, MARKET, CONCENTRATION, REGULATORY, VAR],
        (TaskId::DataopsException, "format_error") => &[DETAILS, REFERENCE, VALIDATE],
        (TaskId::DataopsException, "business_rule") => &[DETAILS, HISTORY, VALIDATE],
        (TaskId::DataopsException, "reference_mismatch") => &[DETAILS, REFERENCE, HISTORY, VALIDATE],
        (TaskId::DataopsException, "missing_field") => &[DETAILS, HISTORY, VALIDATE],
        _ => return None,
    };
    Some(seq)
}

/// Step taken after deciding, for tasks whose decisions are actions.
pub fn action_step(task: TaskId, label: &str) -> Option<StepTemplate> {
    match (task, label) {
        (TaskId::DataopsException, "AUTO_FIX") => Some(APPLY_FIX),
        (TaskId::DataopsException, "ESCALATE") => Some(ESCALATE_REVIEW),
        (TaskId::DataopsException, "QUARANTINE") => Some(ESCALATE_QUARANTINE),
        _ => None,
    }
}

/// Label taken when a field the rule needs cannot be read.
pub fn fallback_label(task: TaskId) -> &'static str {
    match task {
        TaskId::ComplianceTriage => "INVESTIGATE",
        TaskId::PortfolioConstraint => "REJECT",
        TaskId::DataopsException => "ESCALATE",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleOutcome {
    pub label: String,
    /// A required field was missing or unreadable.
    pub fallback: bool,
    /// `(tool, path)` of every field the decision read.
    pub cited: Vec<(String, String)>,
    /// Numeric facts behind the decision, used for constraint checks.
    pub facts: BTreeMap<String, f64>,
}

/// Everything the agent has seen: the case inputs and the latest result of
/// each tool called.
pub struct Observations<'a> {
    pub inputs: &'a BTreeMap<String, Value>,
    pub results: &'a BTreeMap<String, Value>,
}

/// Fetch a dotted path; `None` when missing.
pub fn lookup<'v>(doc: &'v Value, path: &str) -> Option<&'v Value> {
    let mut cur = doc;
    for part in path.split('.') {
        cur = cur.get(part)?;
    }
    Some(cur)
}

struct Reader<'a> {
    obs: &'a Observations<'a>,
    cited: Vec<(String, String)>,
    unreadable: bool,
}

impl<'a> Reader<'a> {
    fn called(&self, tool: &str) -> bool {
        self.obs.results.contains_key(tool)
    }

    fn num(&mut self, tool: &str, path: &str) -> f64 {
        let v = self.obs.results.get(tool).and_then(|r| lookup(r, path)).and_then(Value::as_f64);
        self.cited.push((tool.to_string(), path.to_string()));
        match v {
            Some(x) if x.is_finite() => x,
            _ => {
                self.unreadable = true;
                f64::NAN
            }
        }
    }

    fn flag(&mut self, tool: &str, path: &str) -> bool {
        let v = self.obs.results.get(tool).and_then(|r| lookup(r, path)).and_then(Value::as_bool);
        self.cited.push((tool.to_string(), path.to_string()));
        v.unwrap_or_else(|| {
            self.unreadable = true;
            false
        })
    }

    fn input_num(&mut self, key: &str) -> f64 {
        match self.obs.inputs.get(key).and_then(Value::as_f64) {
            Some(x) => x,
            None => {
                self.unreadable = true;
                f64::NAN
            }
        }
    }
}

/// Apply the task's decision table to what has been observed.
pub fn decide(task: TaskId, obs: &Observations) -> RuleOutcome {
    let mut r = Reader { obs, cited: Vec::new(), unreadable: false };
    let mut facts = BTreeMap::new();
    let label = match task {
        TaskId::ComplianceTriage => compliance(&mut r, &mut facts),
        TaskId::PortfolioConstraint => portfolio(&mut r, &mut facts),
        TaskId::DataopsException => dataops(&mut r, &mut facts),
    };
    let fallback = r.unreadable;
    RuleOutcome {
        label: if fallback { fallback_label(task).to_string() } else { label.to_string() },
        fallback,
        cited: r.cited,
        facts,
    }
}

fn compliance(r: &mut Reader, facts: &mut BTreeMap<String, f64>) -> &'static str {
    let match_score = if r.called("check_sanctions_list") {
        r.num("check_sanctions_list", "match_score")
    } else {
        0.0
    };
    let score = r.num("calculate_risk_score", "score");
    let near = r.num("calculate_risk_score", "near_threshold_txn_7d");
    facts.insert("match_score".into(), match_score);
    facts.insert("risk_score".into(), score);
    facts.insert("near_threshold_txn_7d".into(), near);
    if match_score >= SANCTIONS_ESCALATE || near >= STRUCTURING_COUNT || score >= RISK_ESCALATE {
        "ESCALATE"
    } else if match_score >= SANCTIONS_INVESTIGATE || score >= RISK_INVESTIGATE {
        "INVESTIGATE"
    } else {
        "DISMISS"
    }
}

fn portfolio(r: &mut Reader, facts: &mut BTreeMap<String, f64>) -> &'static str {
    let current = r.num("check_concentration_limits", "current");
    let proposed = r.num("check_concentration_limits", "proposed");
    let position_limit = r.num("get_regulatory_constraints", "thresholds.position_limit");
    let sector_cap = r.num("get_regulatory_constraints", "thresholds.sector_cap");
    let max_part = r.num("get_regulatory_constraints", "thresholds.max_participation");
    let min_cash = r.num("get_regulatory_constraints", "thresholds.min_cash");
    let price = r.num("get_market_data", "price");
    let volume = r.num("get_market_data", "volume");
    let cash = r.num("get_portfolio_positions", "cash_weight");
    let notional = r.input_num("trade_notional");

    let sector = r
        .obs
        .results
        .get("get_market_data")
        .and_then(|m| m.get("sector"))
        .and_then(Value::as_str)
        .map(str::to_string);
    let sector_weight = match sector {
        Some(s) => {
            let rows = r
                .obs
                .results
                .get("get_portfolio_positions")
                .and_then(|p| p.get("sector_weights"))
                .and_then(Value::as_array)
                .cloned()
                .unwrap_or_default();
            r.cited.push(("get_portfolio_positions".into(), "sector_weights.weight".into()));
            let row = rows.iter().find(|row| row.get("sector").and_then(Value::as_str) == Some(&s));
            match row.map(|row| row.get("weight").and_then(Value::as_f64)) {
                None => 0.0,
                Some(Some(w)) => w,
                Some(None) => {
                    r.unreadable = true;
                    f64::NAN
                }
            }
        }
        None => {
            r.unreadable = true;
            f64::NAN
        }
    };

    let delta = proposed - current;
    let sector_post = sector_weight + delta;
    let participation = notional / (price * volume);
    let cash_after = cash - delta;
    facts.insert("proposed_weight".into(), proposed);
    facts.insert("sector_weight_post".into(), sector_post);
    facts.insert("participation".into(), participation);
    facts.insert("cash_after".into(), cash_after);
    if r.unreadable || !participation.is_finite() {
        r.unreadable = true;
        return "REJECT";
    }

    let mut excess = Vec::new();
    if proposed > position_limit {
        excess.push((proposed - position_limit) / position_limit);
    }
    if sector_post > sector_cap {
        excess.push((sector_post - sector_cap) / sector_cap);
    }
    if participation > max_part {
        excess.push((participation - max_part) / max_part);
    }
    if cash_after < min_cash {
        excess.push((min_cash - cash_after) / min_cash);
    }
    match excess.as_slice() {
        [] => "APPROVE",
        [e] if *e <= MODIFY_TOLERANCE => "MODIFY",
        _ => "REJECT",
    }
}

fn dataops(r: &mut Reader, facts: &mut BTreeMap<String, f64>) -> &'static str {
    let records = r.num("get_exception_details", "affected_records");
    let valid = r.flag("validate_fix", "valid");
    let conflicts = r.num("validate_fix", "conflicts");
    let success = if r.called("get_historical_fixes") {
        Some(best_success_rate(r))
    } else {
        None
    };
    if r.called("query_reference_data") {
        r.flag("query_reference_data", "valid");
    }
    facts.insert("affected_records".into(), records);
    facts.insert("fix_valid".into(), if valid { 1.0 } else { 0.0 });
    facts.insert("conflicts".into(), conflicts);
    if let Some(s) = success {
        facts.insert("fix_success_rate".into(), s);
    }
    if valid && conflicts == 0.0 && success.is_none_or(|s| s >= FIX_SUCCESS_MIN) {
        "AUTO_FIX"
    } else if records >= QUARANTINE_RECORDS {
        "QUARANTINE"
    } else {
        "ESCALATE"
    }
}

fn best_success_rate(r: &mut Reader) -> f64 {
    r.cited.push(("get_historical_fixes".into(), "fixes.success_rate".into()));
    let fixes = r
        .obs
        .results
        .get("get_historical_fixes")
        .and_then(|h| h.get("fixes"))
        .and_then(Value::as_array);
    let Some(fixes) = fixes else {
        r.unreadable = true;
        return f64::NAN;
    };
    let mut best = f64::NEG_INFINITY;
    for f in fixes {
        match f.get("success_rate").and_then(Value::as_f64) {
            Some(x) => best = best.max(x),
            None => r.unreadable = true,
        }
    }
    if best.is_finite() { best } else {
        r.unreadable = true;
        f64::NAN
    }
}
