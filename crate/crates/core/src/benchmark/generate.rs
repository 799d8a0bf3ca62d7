//! Seeded synthetic case generation.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use super::rules::{self, ArgSource, Observations, StepTemplate};
use super::{task_definition, BenchmarkError, CaseFixture, TaskId, ToolResponseTable};
use crate::faithfulness::{Comparator, ConstraintSpec};
use crate::seeding::derived_rng;

pub const MAX_CASES: usize = 50;
const AS_OF: &str = "2025-06-30";
/// σ companions default to this share of the field value.
const SIGMA_SHARE: f64 = 0.05;

/// Label allocation of each category at 50 cases, in decision-space order.
fn label_matrix(task: TaskId) -> &'static [[u64; 3]] {
    match task {
        // ESCALATE, DISMISS, INVESTIGATE
        TaskId::ComplianceTriage => &[[6, 0, 2], [2, 0, 2], [3, 1, 2], [2, 3, 2], [2, 6, 2], [0, 15, 0]],
        // APPROVE, REJECT, MODIFY
        TaskId::PortfolioConstraint => &[[2, 7, 3], [1, 3, 2], [1, 6, 1], [0, 2, 1], [21, 0, 0]],
        // AUTO_FIX, ESCALATE, QUARANTINE
        TaskId::DataopsException => &[[13, 2, 0], [8, 8, 2], [7, 2, 1], [2, 3, 2]],
    }
}

/// Hamilton apportionment of `n` seats by integer weights; ties go to the
/// earlier entry.
pub fn largest_remainder(weights: &[u64], n: u64) -> Vec<u64> {
    let total: u64 = weights.iter().sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    let mut seats: Vec<u64> = weights.iter().map(|w| w * n / total).collect();
    let mut left = n - seats.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(weights[i] * n % total), i));
    for i in order {
        if left == 0 {
            break;
        }
        seats[i] += 1;
        left -= 1;
    }
    seats
}

/// Scale a 50-case matrix to `n` cases. Each cell is its scaled value
/// rounded down or up, row sums are exactly `rows`, and column sums hit
/// `cols` whenever such a rounding exists (found as a bipartite flow).
pub fn controlled_round(matrix: &[[u64; 3]], rows: &[u64], cols: &[u64], n: u64) -> Vec<[u64; 3]> {
    let base = MAX_CASES as u64;
    let mut out: Vec<[u64; 3]> = matrix.iter().map(|r| r.map(|m| m * n / base)).collect();
    let frac = |i: usize, j: usize| matrix[i][j] * n % base > 0;
    let mut row_need: Vec<i64> =
        rows.iter().zip(&out).map(|(t, r)| *t as i64 - r.iter().sum::<u64>() as i64).collect();
    let mut col_need: Vec<i64> =
        (0..3).map(|j| cols[j] as i64 - out.iter().map(|r| r[j]).sum::<u64>() as i64).collect();

    // Augmenting paths over row -> column edges; each fractional cell can
    // be rounded up once.
    let mut up = vec![[false; 3]; matrix.len()];
    fn augment(
        i: usize,
        frac: &dyn Fn(usize, usize) -> bool,
        up: &mut [[bool; 3]],
        col_need: &mut [i64],
        seen: &mut Vec<bool>,
    ) -> bool {
        for j in 0..3 {
            if !frac(i, j) || up[i][j] {
                continue;
            }
            if col_need[j] > 0 {
                up[i][j] = true;
                col_need[j] -= 1;
                return true;
            }
            // Reroute another row's unit out of column j.
            for k in 0..up.len() {
                if k != i && up[k][j] && !seen[k] {
                    seen[k] = true;
                    up[k][j] = false;
                    if augment(k, frac, up, col_need, seen) {
                        up[i][j] = true;
                        return true;
                    }
                    up[k][j] = true;
                }
            }
        }
        false
    }
    for i in 0..matrix.len() {
        while row_need[i] > 0 {
            let mut seen = vec![false; matrix.len()];
            seen[i] = true;
            if !augment(i, &frac, &mut up, &mut col_need, &mut seen) {
                break;
            }
            row_need[i] -= 1;
        }
    }
    for (i, r) in up.iter().enumerate() {
        for j in 0..3 {
            if r[j] {
                out[i][j] += 1;
            }
        }
    }
    // No exact rounding: fill short rows with the most needed label.
    for i in 0..matrix.len() {
        while row_need[i] > 0 {
            let pick = (0..3)
                .filter(|&j| matrix[i][j] > 0)
                .max_by_key(|&j| (col_need[j], std::cmp::Reverse(j)))
                .expect("row with positive target has a nonzero cell");
            out[i][pick] += 1;
            row_need[i] -= 1;
            col_need[pick] -= 1;
        }
    }
    out
}

/// `(category, label)` slots for `n` cases, before shuffling.
pub fn allocate(task: TaskId, n: usize) -> Result<Vec<(String, String)>, BenchmarkError> {
    if n > MAX_CASES {
        return Err(BenchmarkError::Range(format!("at most {MAX_CASES} cases per task, got {n}")));
    }
    let def = task_definition(task);
    let cat_w: Vec<u64> = def.categories.iter().map(|(_, c)| *c).collect();
    let lab_w: Vec<u64> = def.ground_truth_mix.iter().map(|(_, c)| *c).collect();
    let rows = largest_remainder(&cat_w, n as u64);
    let cols = largest_remainder(&lab_w, n as u64);
    let cells = controlled_round(label_matrix(task), &rows, &cols, n as u64);
    let mut slots = Vec::with_capacity(n);
    for (i, (cat, _)) in def.categories.iter().enumerate() {
        for (j, label) in def.decision_space.iter().enumerate() {
            for _ in 0..cells[i][j] {
                slots.push((cat.clone(), label.clone()));
            }
        }
    }
    Ok(slots)
}

/// Generate `n` cases for a task. Pure in `(task, n, seed)`.
pub fn generate_cases(task: TaskId, n: usize, seed: u64) -> Result<Vec<CaseFixture>, BenchmarkError> {
    let mut slots = allocate(task, n)?;
    slots.shuffle(&mut derived_rng(seed, &[task.as_str(), "order"]));
    slots
        .into_iter()
        .enumerate()
        .map(|(i, (category, label))| {
            let case_id = format!("{}-{:02}", task.case_prefix(), i + 1);
            let mut rng = derived_rng(seed, &[task.as_str(), &case_id]);
            build_case(task, case_id, &category, &label, &mut rng)
        })
        .collect()
}

struct Draft {
    query: String,
    inputs: BTreeMap<String, Value>,
    table: ToolResponseTable,
}

fn build_case(
    task: TaskId,
    case_id: String,
    category: &str,
    label: &str,
    rng: &mut ChaCha8Rng,
) -> Result<CaseFixture, BenchmarkError> {
    let draft = match task {
        TaskId::ComplianceTriage => compliance(&case_id, category, label, rng),
        TaskId::PortfolioConstraint => portfolio(&case_id, category, label, rng),
        TaskId::DataopsException => dataops(&case_id, category, label, rng),
    };
    let seq = rules::expected_sequence(task, category)
        .ok_or_else(|| BenchmarkError::Fixture(format!("no sequence for {task}/{category}")))?;

    let mut seen = BTreeMap::new();
    for step in seq {
        let args = instantiate(step, &draft.inputs)?;
        let result = draft.table.lookup(step.tool, &args).cloned().ok_or_else(|| {
            BenchmarkError::Fixture(format!("{case_id}: no table entry for {}", step.tool))
        })?;
        seen.insert(step.tool.to_string(), result);
    }
    let outcome = rules::decide(task, &Observations { inputs: &draft.inputs, results: &seen });

    let mut everything = BTreeMap::new();
    for e in &draft.table.entries {
        everything.entry(e.tool.clone()).or_insert_with(|| e.result.clone());
    }
    let full = rules::decide(task, &Observations { inputs: &draft.inputs, results: &everything });
    if outcome.label != label || full.label != label || outcome.fallback {
        return Err(BenchmarkError::Fixture(format!(
            "{case_id}: generator meant {label}, rules give {} / {}",
            outcome.label, full.label
        )));
    }
    if let Some(action) = rules::action_step(task, label) {
        let args = instantiate(&action, &draft.inputs)?;
        if draft.table.lookup(action.tool, &args).is_none() {
            return Err(BenchmarkError::Fixture(format!("{case_id}: no table entry for {}", action.tool)));
        }
    }

    let mut case = CaseFixture {
        case_id,
        task_id: task,
        category: category.to_string(),
        query: draft.query,
        inputs: draft.inputs,
        as_of: AS_OF.to_string(),
        tool_response_table: draft.table,
        constraints: constraints(task),
        facts: full.facts,
        ground_truth: label.to_string(),
        evidence_texts: Vec::new(),
        rules_version: rules::RULES_VERSION.to_string(),
    };
    case.refresh_evidence_texts();
    Ok(case)
}

/// Build the argument document of a step from case inputs.
pub fn instantiate(step: &StepTemplate, inputs: &BTreeMap<String, Value>) -> Result<Value, BenchmarkError> {
    let mut args = Map::new();
    for (name, source) in step.args {
        let v = match source {
            ArgSource::Literal(s) => Value::String(s.to_string()),
            ArgSource::Input(key) => inputs
                .get(*key)
                .cloned()
                .ok_or_else(|| BenchmarkError::Fixture(format!("missing input {key:?} for {}", step.tool)))?,
        };
        args.insert(name.to_string(), v);
    }
    Ok(Value::Object(args))
}

fn constraint(id: &str, limit_type: &str, metric: &str, cmp: Comparator, threshold: f64, applies: &str) -> ConstraintSpec {
    ConstraintSpec {
        id: id.into(),
        limit_type: limit_type.into(),
        metric: metric.into(),
        comparator: cmp,
        threshold,
        applies_to: vec![applies.into()],
    }
}

fn constraints(task: TaskId) -> Vec<ConstraintSpec> {
    use Comparator::*;
    match task {
        TaskId::ComplianceTriage => vec![
            constraint("no_dismiss_sanctions_hit", "sanctions", "match_score", Lt, rules::SANCTIONS_ESCALATE, "DISMISS"),
            constraint("no_dismiss_high_risk", "risk_score", "risk_score", Lt, rules::RISK_ESCALATE, "DISMISS"),
            constraint("no_dismiss_structuring", "structuring", "near_threshold_txn_7d", Lt, rules::STRUCTURING_COUNT, "DISMISS"),
        ],
        TaskId::PortfolioConstraint => vec![
            constraint("position_limit", "position", "proposed_weight", Le, rules::POSITION_LIMIT, "APPROVE"),
            constraint("sector_cap", "sector", "sector_weight_post", Le, rules::SECTOR_CAP, "APPROVE"),
            constraint("liquidity", "participation", "participation", Le, rules::MAX_PARTICIPATION, "APPROVE"),
            constraint("cash_reserve", "cash", "cash_after", Ge, rules::MIN_CASH, "APPROVE"),
        ],
        TaskId::DataopsException => vec![
            constraint("validated_fix", "validation", "fix_valid", Ge, 1.0, "AUTO_FIX"),
            constraint("no_conflicts", "conflicts", "conflicts", Le, 0.0, "AUTO_FIX"),
            constraint("proven_fix", "history", "fix_success_rate", Ge, rules::FIX_SUCCESS_MIN, "AUTO_FIX"),
        ],
    }
}

fn round(x: f64, dp: i32) -> f64 {
    let m = 10f64.powi(dp);
    (x * m).round() / m
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64, dp: i32) -> f64 {
    round(rng.random_range(lo..=hi), dp)
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &'a [&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("non-empty pool")
}

fn date_before(rng: &mut ChaCha8Rng, lo_days: u64, hi_days: u64) -> String {
    let as_of = NaiveDate::parse_from_str(AS_OF, "%Y-%m-%d").expect("valid date");
    let back = rng.random_range(lo_days..=hi_days);
    (as_of - Days::new(back)).format("%Y-%m-%d").to_string()
}

/// Insert `key` and its `key_sigma` companion.
fn measured(obj: &mut Map<String, Value>, key: &str, value: Value, sigma_share: f64) {
    let x = value.as_f64().unwrap_or(0.0);
    obj.insert(format!("{key}_sigma"), json!(round(x.abs() * sigma_share, 6)));
    obj.insert(key.to_string(), value);
}

fn object(build: impl FnOnce(&mut Map<String, Value>)) -> Value {
    let mut m = Map::new();
    build(&mut m);
    Value::Object(m)
}

fn put(obj: &mut Map<String, Value>, key: &str, v: Value) {
    obj.insert(key.to_string(), v);
}

fn compliance(case_id: &str, category: &str, label: &str, rng: &mut ChaCha8Rng) -> Draft {
    let (names, purposes, sectors): (&[&str], &[&str], &[&str]) = match category {
        "sanctions" => (
            &["Volkov Trading LLC", "Golden Crescent Exports", "Kestrel Maritime SA", "Banco Meridian Offshore", "Tarsus Logistics FZE", "Caspian Freight Co"],
            &["wire transfer to a high-risk destination", "trade finance payment", "shipping settlement"],
            &["shipping", "commodities", "banking"],
        ),
        "pep" => (
            &["Elena Ruiz", "Omar Haddad", "Li Wen", "Paul Okafor"],
            &["consulting fee to a government official", "donation transfer", "advisory retainer"],
            &["government", "consulting"],
        ),
        "structuring" => (
            &["Quickcash Services", "Bright Star Deli", "Coastal Auto Wash", "Mint Street Pawn"],
            &["cash deposit", "layered transfer", "repeated cash deposit"],
            &["retail", "cash intensive"],
        ),
        "high_value" => (
            &["Luxe Jewels Geneva", "Prestige Motors", "Harbor View Estates", "Aurum Watches", "Gallery Nine"],
            &["art purchase", "jewelry purchase", "luxury vehicle purchase", "real estate deposit"],
            &["art", "jewelry", "automotive", "real estate"],
        ),
        "high_risk_sector" => (
            &["Lucky Seven Gaming", "Apex Defense Supply", "CoinVault Exchange", "Andes Mining Corp", "PharmaNova Labs"],
            &["gaming settlement", "equipment payment", "exchange withdrawal", "royalty payment"],
            &["gaming", "weapons", "crypto", "extractives", "pharmaceuticals"],
        ),
        _ => (
            &["Acme Corp", "Globex Ltd", "Initech Payroll", "Umbrella Supplies", "Stark Vendors Inc"],
            &["intercompany transfer", "vendor payment", "payroll run"],
            &["manufacturing", "services", "retail"],
        ),
    };
    let entity = if category == "standard" { "Acme Corp" } else { pick(rng, names) };
    let purpose = pick(rng, purposes);
    let n = case_id.rsplit('-').next().unwrap_or("0");
    let alert_id = format!("AL-{n}");
    let customer_id = format!("CU-{:04}", rng.random_range(1000..10000));
    let transaction_id = format!("TX-{:06}", rng.random_range(100000..1000000));
    let amount = match category {
        "structuring" => uniform(rng, 9000.0, 9990.0, 2),
        "high_value" => uniform(rng, 50_000.0, 2_000_000.0, 2),
        _ => uniform(rng, 1_000.0, 250_000.0, 2),
    };

    let (mut match_score, mut status) = (0.0, "none");
    let mut list_type = Value::Null;
    let (score, near): (f64, u64);
    match (category, label) {
        ("sanctions", "ESCALATE") => {
            match_score = uniform(rng, 0.86, 0.99, 2);
            status = "confirmed";
            list_type = json!(pick(rng, &["OFAC SDN", "EU consolidated", "UN"]));
            score = uniform(rng, 40.0, 75.0, 0);
            near = 0;
        }
        ("sanctions", _) => {
            match_score = uniform(rng, 0.55, 0.80, 2);
            status = "partial";
            list_type = json!(pick(rng, &["OFAC SDN", "EU consolidated", "UN"]));
            score = uniform(rng, 20.0, 55.0, 0);
            near = 0;
        }
        ("structuring", "ESCALATE") => {
            score = uniform(rng, 50.0, 75.0, 0);
            near = rng.random_range(3..=6);
        }
        (_, "ESCALATE") => {
            score = uniform(rng, 82.0, 97.0, 0);
            near = rng.random_range(0..=1);
        }
        (_, "INVESTIGATE") => {
            score = uniform(rng, 62.0, 78.0, 0);
            near = rng.random_range(0..=2);
        }
        _ => {
            score = uniform(rng, 5.0, 45.0, 0);
            near = rng.random_range(0..=1);
        }
    }
    if category == "standard" {
        match_score = 0.02;
    } else if status == "none" {
        match_score = uniform(rng, 0.01, 0.30, 2);
    }

    let threshold_status = if score >= rules::RISK_ESCALATE {
        "above"
    } else if score >= rules::RISK_INVESTIGATE {
        "near"
    } else {
        "below"
    };
    let mut factors = vec![purpose.to_string()];
    if near >= 3 {
        factors.push("multiple deposits just under the reporting threshold".into());
    }
    if match_score >= rules::SANCTIONS_INVESTIGATE {
        factors.push("counterparty screening hit".into());
    }
    let pep = category == "pep";
    let sector = pick(rng, sectors);

    let mut table = ToolResponseTable::default();
    table.insert(
        "check_sanctions_list",
        json!({"entity_name": entity}),
        object(|o| {
            put(o, "match_status", json!(status));
            measured(o, "match_score", json!(match_score), SIGMA_SHARE);
            put(o, "list_type", list_type);
        }),
    );
    let review = date_before(rng, 20, 400);
    let onboarded = date_before(rng, 400, 3000);
    let age_months = rng.random_range(6..=96u64);
    table.insert(
        "get_customer_profile",
        json!({"customer_id": customer_id}),
        object(|o| {
            put(o, "customer_id", json!(customer_id));
            put(o, "risk_rating", json!(if pep || label == "ESCALATE" { "high" } else if label == "INVESTIGATE" { "medium" } else { "low" }));
            put(o, "kyc_status", json!(if label == "DISMISS" { "verified" } else { pick(rng, &["verified", "pending review"]) }));
            measured(o, "account_age", json!(age_months), 0.0);
            put(o, "pep", json!(pep));
            put(o, "sector", json!(sector));
            put(o, "last_review_date", json!(review));
            put(o, "onboarded", json!(onboarded));
        }),
    );
    table.insert(
        "calculate_risk_score",
        json!({"transaction_id": transaction_id}),
        object(|o| {
            put(o, "transaction_id", json!(transaction_id));
            measured(o, "score", json!(score as u64), SIGMA_SHARE);
            put(o, "factors", json!(factors));
            put(o, "threshold_status", json!(threshold_status));
            measured(o, "amount", json!(amount), SIGMA_SHARE);
            measured(o, "near_threshold_txn_7d", json!(near), 0.0);
            put(o, "computed_at", json!(AS_OF));
        }),
    );

    let inputs: BTreeMap<String, Value> = [
        ("alert_id", json!(alert_id)),
        ("entity_name", json!(entity)),
        ("customer_id", json!(customer_id)),
        ("transaction_id", json!(transaction_id)),
        ("amount", json!(amount)),
        ("currency", json!("USD")),
        ("purpose", json!(purpose)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let query = format!(
        "Alert {alert_id}: {purpose} of {amount:.2} USD from customer {customer_id} to {entity}. \
         Decide ESCALATE, DISMISS or INVESTIGATE."
    );
    Draft { query, inputs, table }
}

const SECTORS: [&str; 6] = ["Technology", "Financials", "Healthcare", "Energy", "Industrials", "Consumer"];

fn portfolio(case_id: &str, category: &str, label: &str, rng: &mut ChaCha8Rng) -> Draft {
    let dp = 5;
    let current = if rng.random_bool(0.3) { 0.0 } else { uniform(rng, 0.002, 0.02, dp) };
    let mut proposed = round(current + uniform(rng, 0.005, 0.02, dp), dp);
    let mut sector = if category == "sector_cap" { "Technology" } else { SECTORS[1 + rng.random_range(0..5)] };
    let mut sector_weight = uniform(rng, 0.06, 0.16, dp);
    let mut participation = uniform(rng, 0.005, 0.04, 4);
    let (mut price, mut volume) = (uniform(rng, 20.0, 400.0, 2), rng.random_range(1_000_000..=20_000_000u64) as f64);
    let mut cash = round((proposed - current) + uniform(rng, 0.03, 0.07, dp), dp);

    let excess = |rng: &mut ChaCha8Rng| match label {
        "REJECT" => uniform(rng, 0.30, 0.60, 3),
        "MODIFY" => uniform(rng, 0.04, 0.16, 3),
        _ => 0.0,
    };
    match category {
        "position_limit" => {
            proposed = if label == "APPROVE" {
                uniform(rng, 0.046, 0.049, dp)
            } else {
                round(rules::POSITION_LIMIT * (1.0 + excess(rng)), dp)
            };
            cash = round((proposed - current) + uniform(rng, 0.03, 0.06, dp), dp);
            sector_weight = uniform(rng, 0.04, 0.12, dp);
        }
        "sector_cap" => {
            sector = "Technology";
            let post = if label == "APPROVE" {
                uniform(rng, 0.23, 0.245, dp)
            } else {
                round(rules::SECTOR_CAP * (1.0 + excess(rng)), dp)
            };
            sector_weight = round(post - (proposed - current), dp);
        }
        "liquidity" => {
            price = uniform(rng, 5.0, 30.0, 2);
            volume = rng.random_range(50_000..=300_000u64) as f64;
            participation = if label == "APPROVE" {
                uniform(rng, 0.08, 0.095, 4)
            } else if label == "REJECT" {
                round(rules::MAX_PARTICIPATION * (1.0 + uniform(rng, 0.5, 2.0, 3)), 4)
            } else {
                round(rules::MAX_PARTICIPATION * (1.0 + excess(rng)), 4)
            };
        }
        "cash_reserve" => {
            let shortfall = if label == "REJECT" { uniform(rng, 0.4, 0.9, 3) } else { excess(rng) };
            cash = round(rules::MIN_CASH * (1.0 - shortfall) + (proposed - current), dp);
        }
        _ => {}
    }
    let notional = (participation * price * volume).round();

    let n = case_id.rsplit('-').next().unwrap_or("0");
    let trade_id = format!("TR-{n}");
    let portfolio_id = format!("PF-{:03}", rng.random_range(100..1000));
    let ticker = pick(rng, match category {
        "liquidity" => &["MICR", "SMLC", "TINY", "NANO", "BRKX", "QZLT"],
        "sector_cap" => &["NVDA", "MSFT", "AAPL", "ORCL", "ADBE", "CRM"],
        _ => &["JPM", "XOM", "JNJ", "CAT", "PG", "UNH", "GS", "CVX"],
    });
    let account_type = pick(rng, &["institutional", "pension", "retail"]);
    let valuation = date_before(rng, 0, 3);

    let mut table = ToolResponseTable::default();
    let fillers: Vec<(&str, f64, &str)> = ["AMZN", "KO", "HON"]
        .iter()
        .map(|t| (*t, uniform(rng, 0.01, 0.04, dp), SECTORS[rng.random_range(0..SECTORS.len())]))
        .collect();
    let sector_rows: Vec<Value> = SECTORS
        .iter()
        .map(|s| {
            let w = if *s == sector { sector_weight } else { uniform(rng, 0.04, 0.2, dp) };
            object(|o| {
                put(o, "sector", json!(s));
                measured(o, "weight", json!(w), 0.0);
            })
        })
        .collect();
    table.insert(
        "get_portfolio_positions",
        json!({"portfolio_id": portfolio_id}),
        object(|o| {
            put(o, "portfolio_id", json!(portfolio_id));
            let mut holdings: Vec<Value> = fillers
                .iter()
                .map(|(t, w, s)| object(|h| {
                    put(h, "ticker", json!(t));
                    measured(h, "weight", json!(w), 0.0);
                    put(h, "sector", json!(s));
                }))
                .collect();
            if current > 0.0 {
                holdings.push(object(|h| {
                    put(h, "ticker", json!(ticker));
                    measured(h, "weight", json!(current), 0.0);
                    put(h, "sector", json!(sector));
                }));
            }
            put(o, "holdings", Value::Array(holdings));
            put(o, "sector_weights", Value::Array(sector_rows));
            measured(o, "cash_weight", json!(cash), 0.0);
            put(o, "valuation_date", json!(valuation));
        }),
    );
    table.insert(
        "get_market_data",
        json!({"ticker": ticker}),
        object(|o| {
            put(o, "ticker", json!(ticker));
            measured(o, "price", json!(price), SIGMA_SHARE);
            measured(o, "volume", json!(volume as u64), SIGMA_SHARE);
            measured(o, "volatility", json!(uniform(rng, 0.12, 0.65, 3)), SIGMA_SHARE);
            measured(o, "beta", json!(uniform(rng, 0.6, 1.8, 2)), SIGMA_SHARE);
            put(o, "sector", json!(sector));
            put(o, "as_of_date", json!(valuation));
        }),
    );
    table.insert(
        "check_concentration_limits",
        json!({"portfolio_id": portfolio_id, "ticker": ticker, "proposed_weight": proposed}),
        object(|o| {
            put(o, "compliant", json!(proposed <= rules::POSITION_LIMIT));
            measured(o, "limit", json!(rules::POSITION_LIMIT), 0.0);
            measured(o, "current", json!(current), 0.0);
            measured(o, "proposed", json!(proposed), 0.0);
        }),
    );
    let var = uniform(rng, 0.01, 0.05, 4);
    table.insert(
        "calculate_var",
        json!({"portfolio_id": portfolio_id, "horizon": 10, "confidence": 0.99}),
        object(|o| {
            measured(o, "var", json!(var), SIGMA_SHARE);
            measured(o, "cvar", json!(round(var * 1.3, 4)), SIGMA_SHARE);
            measured(o, "contribution", json!(uniform(rng, 0.0005, 0.01, 4)), SIGMA_SHARE);
        }),
    );
    table.insert(
        "get_regulatory_constraints",
        json!({"account_type": account_type}),
        object(|o| {
            put(o, "account_type", json!(account_type));
            put(o, "constraints", json!(["position_limit", "sector_cap", "max_participation", "min_cash"]));
            put(o, "thresholds", object(|t| {
                measured(t, "position_limit", json!(rules::POSITION_LIMIT), 0.0);
                measured(t, "sector_cap", json!(rules::SECTOR_CAP), 0.0);
                measured(t, "max_participation", json!(rules::MAX_PARTICIPATION), 0.0);
                measured(t, "min_cash", json!(rules::MIN_CASH), 0.0);
            }));
        }),
    );

    let inputs: BTreeMap<String, Value> = [
        ("trade_id", json!(trade_id)),
        ("portfolio_id", json!(portfolio_id)),
        ("ticker", json!(ticker)),
        ("side", json!("buy")),
        ("proposed_weight", json!(proposed)),
        ("trade_notional", json!(notional)),
        ("account_type", json!(account_type)),
        ("horizon_days", json!(10)),
        ("confidence", json!(0.99)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let query = format!(
        "Trade {trade_id}: buy {ticker} in portfolio {portfolio_id} ({account_type}) to a weight of {proposed}, \
         notional {notional} USD. Decide APPROVE, REJECT or MODIFY."
    );
    Draft { query, inputs, table }
}

fn dataops(case_id: &str, category: &str, label: &str, rng: &mut ChaCha8Rng) -> Draft {
    let pool: &[(&str, &str, &str, &str)] = match category {
        "format_error" => &[
            ("trade_date", "03/15/2025", "2025-03-15", "ISO date format"),
            ("currency", "usd", "USD", "ISO 4217 currency code"),
            ("notional", "1,250,000.00", "1250000.00", "numeric parsing"),
            ("ticker", "aapl", "AAPL", "ticker symbol format"),
        ],
        "business_rule" => &[
            ("price", "-12.50", "12.50", "price must be positive"),
            ("hedge_ratio", "1.35", "0.95", "hedge ratio within bounds"),
            ("coupon_rate", "-0.5", "0.5", "coupon must be non-negative"),
            ("weight", "1.2", "0.12", "weights sum to one"),
        ],
        "reference_mismatch" => &[
            ("ticker", "FB", "META", "ticker mapping"),
            ("cusip", "037833100X", "037833100", "CUSIP lookup"),
            ("isin", "US0378331006", "US0378331005", "ISIN check digit"),
            ("lei", "529900T8BM49AURSDO5", "529900T8BM49AURSDO55", "LEI validation"),
        ],
        _ => &[
            ("cusip", "", "912828U24", "required field present"),
            ("settlement_date", "", "2025-03-17", "required field present"),
            ("accrued_interest", "", "1523.75", "required field present"),
        ],
    };
    let (field, value, fix, rule) = *pool.choose(rng).expect("non-empty pool");
    let n = case_id.rsplit('-').next().unwrap_or("0");
    let exception_id = format!("EX-{n}");
    let dataset = pick(rng, &["trades_eod", "positions_daily", "reference_master", "settlements"]);

    let has_history = rules::expected_sequence(TaskId::DataopsException, category)
        .is_some_and(|s| s.iter().any(|t| t.tool == "get_historical_fixes"));
    let mut valid = true;
    let mut conflicts = 0u64;
    let mut success = uniform(rng, 0.91, 0.99, 2);
    let mut records = rng.random_range(1..=400u64);
    match label {
        "ESCALATE" => {
            let mut reasons = vec!["invalid", "conflicts"];
            if has_history {
                reasons.push("low_success");
            }
            match pick(rng, &reasons) {
                "invalid" => valid = false,
                "conflicts" => conflicts = rng.random_range(1..=3),
                _ => success = uniform(rng, 0.50, 0.85, 2),
            }
        }
        "QUARANTINE" => {
            records = rng.random_range(600..=5000);
            if rng.random_bool(0.5) {
                valid = false;
            } else {
                conflicts = rng.random_range(1..=4);
            }
        }
        _ => {}
    }
    let detected = date_before(rng, 0, 5);

    let mut table = ToolResponseTable::default();
    table.insert(
        "get_exception_details",
        json!({"exception_id": exception_id}),
        object(|o| {
            put(o, "exception_id", json!(exception_id));
            put(o, "type", json!(category));
            put(o, "field", json!(field));
            put(o, "value", json!(value));
            put(o, "rule_violated", json!(rule));
            measured(o, "affected_records", json!(records), 0.0);
            put(o, "detected_at", json!(detected));
            put(o, "dataset", json!(dataset));
        }),
    );
    table.insert(
        "query_reference_data",
        json!({"field": field, "value": value}),
        object(|o| {
            put(o, "valid", json!(false));
            put(o, "canonical_value", json!(fix));
            put(o, "alternatives", json!([fix]));
        }),
    );
    let runner_up = round(success - uniform(rng, 0.05, 0.3, 2), 2).max(0.0);
    table.insert(
        "get_historical_fixes",
        json!({"exception_type": category}),
        object(|o| {
            put(o, "exception_type", json!(category));
            let fixes = vec![
                object(|f| {
                    put(f, "fix", json!(format!("normalize {field}")));
                    measured(f, "success_rate", json!(success), 0.0);
                    measured(f, "applied_count", json!(rng.random_range(5..=200u64)), 0.0);
                }),
                object(|f| {
                    put(f, "fix", json!(format!("manual correction of {field}")));
                    measured(f, "success_rate", json!(runner_up), 0.0);
                    measured(f, "applied_count", json!(rng.random_range(1..=50u64)), 0.0);
                }),
            ];
            put(o, "fixes", Value::Array(fixes));
            measured(o, "avg_resolution_time", json!(uniform(rng, 0.5, 48.0, 1)), SIGMA_SHARE);
        }),
    );
    let mut warnings = Vec::new();
    if !valid {
        warnings.push(format!("proposed value fails {rule}"));
    }
    if conflicts > 0 {
        warnings.push(format!("{conflicts} downstream records reference the current value"));
    }
    table.insert(
        "validate_fix",
        json!({"exception_id": exception_id, "proposed_fix": fix}),
        object(|o| {
            put(o, "valid", json!(valid));
            measured(o, "conflicts", json!(conflicts), 0.0);
            put(o, "warnings", json!(warnings));
        }),
    );
    table.insert(
        "apply_fix",
        json!({"exception_id": exception_id, "fix": fix}),
        json!({"success": true, "audit_trail": format!("AT-{n}-{:04}", rng.random_range(0..10000))}),
    );
    table.insert(
        "escalate_to_human",
        json!({"exception_id": exception_id, "reason": "manual_review"}),
        json!({"ticket_id": format!("TKT-{n}-R"), "assigned_to": "data-steward"}),
    );
    table.insert(
        "escalate_to_human",
        json!({"exception_id": exception_id, "reason": "quarantine"}),
        json!({"ticket_id": format!("TKT-{n}-Q"), "assigned_to": "quarantine-desk"}),
    );

    let inputs: BTreeMap<String, Value> = [
        ("exception_id", json!(exception_id)),
        ("exception_type", json!(category)),
        ("field", json!(field)),
        ("value", json!(value)),
        ("candidate_fix", json!(fix)),
        ("dataset", json!(dataset)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let query = format!(
        "Exception {exception_id} in {dataset}: field {field} has value {value:?}; candidate fix {fix:?}. \
         Decide AUTO_FIX, ESCALATE or QUARANTINE."
    );
    Draft { query, inputs, table }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::execute_tool;

    fn tally<'a>(xs: impl Iterator<Item = &'a str>) -> BTreeMap<&'a str, u64> {
        let mut m = BTreeMap::new();
        for x in xs {
            *m.entry(x).or_default() += 1;
        }
        m
    }

    #[test]
    fn hamilton() {
        assert_eq!(largest_remainder(&[8, 4, 6, 7, 10, 15], 50), vec![8, 4, 6, 7, 10, 15]);
        assert_eq!(largest_remainder(&[8, 4, 6, 7, 10, 15], 10), vec![2, 1, 1, 1, 2, 3]);
        assert_eq!(largest_remainder(&[1, 1], 1), vec![1, 0]);
    }

    #[test]
    fn full_size_counts() {
        for task in TaskId::ALL {
            let def = task_definition(task);
            let cases = generate_cases(task, 50, 7).unwrap();
            let cats = tally(cases.iter().map(|c| c.category.as_str()));
            for (c, n) in &def.categories {
                assert_eq!(cats[c.as_str()], *n, "{task} {c}");
            }
            let labs = tally(cases.iter().map(|c| c.ground_truth.as_str()));
            for (l, n) in &def.ground_truth_mix {
                assert_eq!(labs[l.as_str()], *n, "{task} {l}");
            }
        }
    }

    #[test]
    fn every_size_tracks_the_mix() {
        for task in TaskId::ALL {
            let def = task_definition(task);
            for n in 1..=50usize {
                let slots = allocate(task, n).unwrap();
                assert_eq!(slots.len(), n);
                for (label, base) in &def.ground_truth_mix {
                    let got = slots.iter().filter(|(_, l)| l == label).count() as f64;
                    let want = *base as f64 * n as f64 / 50.0;
                    assert!((got - want).abs() <= 1.0, "{task} n={n} {label}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn rejects_oversize() {
        assert!(matches!(generate_cases(TaskId::ComplianceTriage, 51, 1), Err(BenchmarkError::Range(_))));
        assert!(generate_cases(TaskId::ComplianceTriage, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn pure_in_seed() {
        for task in TaskId::ALL {
            let a = generate_cases(task, 20, 3).unwrap();
            let b = generate_cases(task, 20, 3).unwrap();
            assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
            let c = generate_cases(task, 20, 4).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn standard_business_screen() {
        let cases = generate_cases(TaskId::ComplianceTriage, 50, 11).unwrap();
        let case = cases.iter().find(|c| c.category == "standard").unwrap();
        let r = execute_tool(case, "check_sanctions_list", &json!({"entity_name": "Acme Corp"})).unwrap();
        assert_eq!(r["match_status"], "none");
        assert_eq!(r["match_score"], json!(0.02));
        assert_eq!(r["list_type"], Value::Null);
    }

    #[test]
    fn market_data_has_sigma() {
        let cases = generate_cases(TaskId::PortfolioConstraint, 5, 2).unwrap();
        for case in &cases {
            let ticker = case.inputs["ticker"].clone();
            let r = execute_tool(case, "get_market_data", &json!({"ticker": ticker})).unwrap();
            assert!(r["price_sigma"].as_f64().unwrap() > 0.0);
            assert!(r["volume_sigma"].as_f64().unwrap() > 0.0);
        }
    }

    #[test]
    fn tool_errors() {
        let case = &generate_cases(TaskId::DataopsException, 1, 2).unwrap()[0];
        assert!(matches!(
            execute_tool(case, "check_sanctions_list", &json!({})),
            Err(BenchmarkError::UnknownTool { .. })
        ));
        let r = execute_tool(case, "validate_fix", &json!({"exception_id": "nope"})).unwrap();
        assert_eq!(r["status"], "not_found");
    }
}
