//! Acceptance suite. Runs as a plain binary so every criterion prints a
//! PASS/FAIL line even when the rest succeed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use serde_json::json;

use audit_harness::agents::{Agent, DriftSpec, DriftyAgent, PolicyScript, TrialContext};
use audit_harness::benchmark::{generate_cases, task_definition, TaskId, ToolResponseTable};
use audit_harness::canonical;
use audit_harness::determinism::{aggregate, pass_all_k, pass_at_k, DeterminismReport, Metric};
use audit_harness::faithfulness::{
    evidence_from_trajectory, evidence_grounding, extract_features, flatten_leaves, is_aligned, render_leaf,
};
use audit_harness::model::{AgentConfig, Architecture, ToolCall};
use audit_harness::report::{emit_report, render_json, ReportFormat};
use audit_harness::runner::{self, RunConfig};
use audit_harness::stats::{scaling_factor, wilson_interval, Tier};
use audit_harness::store::Integrity;
use audit_harness::stress::{
    determinism_delta, inject_dq_fault, project_stress_determinism, FaultType, PerturbationKind, PerturbationSpec,
    TierDeltaTable,
};

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    check(elapsed < Duration::from_secs(limit_s), format!("took {elapsed:.2?}, limit {limit_s} s"))
}

fn tier1_posture() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let cfg = RunConfig { n_cases: 10, runs_per_case: 8, ..RunConfig::new(TaskId::ComplianceTriage, 0.05) };
    let reports = runner::run_evaluation(&cfg, dir.path(), None).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let b = reports.first().and_then(|r| r.baseline()).ok_or("no baseline condition")?;
    check(b.decision.case_level.is_one(), format!("case-level DecDet {}", b.decision.case_level))?;
    check(b.action.case_level.is_one(), format!("case-level ActDet {}", b.action.case_level))?;
    check(b.evidence_grounding == Some(1.0), format!("grounding {:?}", b.evidence_grounding))?;
    check(b.pass_k.len() == 8, format!("pass_k covers {} values of k", b.pass_k.len()))?;
    for p in &b.pass_k {
        check(p.pass_at_k == 1.0 && p.pass_all_k == 1.0, format!("k={}: pass@k {} pass^k {}", p.k, p.pass_at_k, p.pass_all_k))?;
    }
    within(elapsed, 5)?;
    Ok(format!("10x8 all identical, grounding 1, pass^k = 1 for k=1..8 in {elapsed:.2?}"))
}

fn scaling_constants() -> Outcome {
    let sig3 = |x: f64| format!("{:.2e}", x);
    for (s2, want) in [(0.0, 1.0), (0.034, 1.34), (0.080, 1.8), (0.27, 3.7)] {
        let got = scaling_factor(s2);
        check(sig3(got) == sig3(want), format!("phi({s2}) = {got}, want {want}"))?;
    }
    Ok("phi(0)=1.00 phi(0.034)=1.34 phi(0.08)=1.80 phi(0.27)=3.70".into())
}

/// Standard normal CDF by composite Simpson integration of the density.
fn normal_cdf(x: f64) -> f64 {
    let n = 20_000;
    let h = x / n as f64;
    let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(0.0) + pdf(x);
    for i in 1..n {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + s * h / 3.0
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / 2.0
}

/// Score-interval bounds as the roots of (p̂ − p)² = z²·p(1 − p)/n.
fn wilson_oracle(s: u64, n: u64) -> (f64, f64) {
    let z = bisect(0.0, 5.0, |z| normal_cdf(z) - 0.975);
    let ph = s as f64 / n as f64;
    let g = |p: f64| (ph - p).powi(2) - z * z * p * (1.0 - p) / n as f64;
    let lo = if ph == 0.0 { 0.0 } else { bisect(0.0, ph, g) };
    let hi = if ph == 1.0 { 1.0 } else { bisect(ph, 1.0, g) };
    (lo, hi)
}

fn wilson_bounds() -> Outcome {
    let mut notes = Vec::new();
    // (s, n, closed form, quoted approximate bounds)
    for (s, n, closed, quoted) in [(8, 8, (0.676, 1.000), (0.63, 1.00)), (7, 8, (0.529, 0.978), (0.56, 1.00))] {
        let iv = wilson_interval(s, n, 0.95).map_err(|e| e.to_string())?;
        let (olo, ohi) = wilson_oracle(s, n);
        check((iv.lo - olo).abs() <= 0.001 && (iv.hi - ohi).abs() <= 0.001, format!("{s}/{n}: {iv:?} vs oracle ({olo}, {ohi})"))?;
        check((iv.lo - closed.0).abs() <= 0.001 && (iv.hi - closed.1).abs() <= 0.001, format!("{s}/{n}: {iv:?} vs {closed:?}"))?;
        check((iv.lo - quoted.0).abs() <= 0.07 && (iv.hi - quoted.1).abs() <= 0.07, format!("{s}/{n}: {iv:?} vs quoted {quoted:?}"))?;
        notes.push(format!("{s}/{n} -> [{:.3}, {:.3}]", iv.lo, iv.hi));
    }
    Ok(notes.join(", "))
}

fn drifty_oracle() -> Outcome {
    let t0 = Instant::now();
    let (q, n_runs, seeds) = (0.2, 8usize, 1000u64);
    let cases = generate_cases(TaskId::ComplianceTriage, 10, 42).map_err(|e| e.to_string())?;
    let config = AgentConfig::local("drifty", Architecture::SchemaFirst);
    let mut means = Vec::with_capacity(seeds as usize);
    for seed in 0..seeds {
        let agent = DriftyAgent {
            policy: PolicyScript::new(TaskId::ComplianceTriage, Architecture::SchemaFirst),
            drift: DriftSpec::flips(q, seed),
        };
        let mut reports = Vec::new();
        for case in &cases {
            let trials = (0..n_runs)
                .map(|r| {
                    let ctx = TrialContext { run_id: format!("{}-r{r}", case.case_id), run_index: r, config: config.clone(), perturbation: None };
                    agent.run(case, &ctx)
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            reports.push(DeterminismReport::grade(&trials).map_err(|e| e.to_string())?);
        }
        means.push(aggregate(&reports, Metric::Decision).map_err(|e| e.to_string())?.run_level.value());
    }
    let elapsed = t0.elapsed();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    let se = (var / means.len() as f64).sqrt();
    // Run 0 is the reference: it matches itself, and another run matches it
    // when both or neither flipped.
    let n = n_runs as f64;
    let expected = 1.0 / n + (n - 1.0) / n * (q * q + (1.0 - q) * (1.0 - q));
    check((expected - 0.72).abs() < 1e-12, format!("closed form gives {expected}"))?;
    check((m - expected).abs() <= 3.0 * se, format!("mean {m:.4}, expected {expected}, se {se:.4}"))?;
    within(elapsed, 30)?;
    Ok(format!("mean {m:.4} vs 0.72 (se {se:.4}) in {elapsed:.2?}"))
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n).filter(|m| m.count_ones() as usize == k).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
}

fn pass_k_enumeration() -> Outcome {
    let mut checked = 0;
    for n in 1..=8usize {
        for s in 0..=n {
            let (mut prev_at, mut prev_all) = (0.0, 1.0);
            for k in 1..=n {
                let all = subsets(n, k);
                let any_ok = all.iter().filter(|sub| sub.iter().any(|&i| i < s)).count() as f64 / all.len() as f64;
                let all_ok = all.iter().filter(|sub| sub.iter().all(|&i| i < s)).count() as f64 / all.len() as f64;
                let at = pass_at_k(n as u64, s as u64, k as u64).map_err(|e| e.to_string())?;
                let every = pass_all_k(n as u64, s as u64, k as u64).map_err(|e| e.to_string())?;
                check((at - any_ok).abs() < 1e-12, format!("pass@{k} n={n} s={s}: {at} vs {any_ok}"))?;
                check((every - all_ok).abs() < 1e-12, format!("pass^{k} n={n} s={s}: {every} vs {all_ok}"))?;
                check(at >= prev_at && every <= prev_all, format!("monotonicity broken at n={n} s={s} k={k}"))?;
                prev_at = at;
                prev_all = every;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (n, s, k) triples match subset enumeration"))
}

fn stress_anchors() -> Outcome {
    let a = determinism_delta(1.00, 0.938);
    check(a.delta == 0.062 && a.robust, format!("(1.00, 0.938) -> {a:?}"))?;
    let b = determinism_delta(1.00, 0.875);
    check(b.delta == 0.125 && !b.robust, format!("(1.00, 0.875) -> {b:?}"))?;
    let p = project_stress_determinism(1.00, Tier::Tier1, PerturbationKind::DqFault, &TierDeltaTable::default())
        .map_err(|e| e.to_string())?;
    check(p.value == 0.94 && p.projected, format!("projection {p:?}"))?;
    Ok("0.062 robust, 0.125 not robust, 1.00 -> 0.94*".into())
}

fn dq_injection() -> Outcome {
    let mut table = ToolResponseTable::default();
    for i in 0..50 {
        table.insert(
            "get_record",
            json!({ "id": i }),
            json!({ "value": i as f64 + 0.5, "value_sigma": 0.1, "count": i, "status": "ok" }),
        );
    }
    let spec = PerturbationSpec::new(PerturbationKind::DqFault);
    let invocations = 10_000u64;
    let mut tally: BTreeMap<String, u64> = BTreeMap::new();
    for seed in 0..invocations {
        let (out, manifest) = inject_dq_fault(&table, spec.rate, seed).map_err(|e| e.to_string())?;
        check(manifest.faults.len() == 5, format!("seed {seed}: {} faults", manifest.faults.len()))?;
        let changed = table.entries.iter().zip(&out.entries).filter(|(a, b)| a != b).count();
        check(changed == 5, format!("seed {seed}: {changed} responses changed"))?;
        for f in &manifest.faults {
            *tally.entry(format!("{:?}", f.drawn)).or_default() += 1;
        }
        let (again, manifest2) = inject_dq_fault(&table, spec.rate, seed).map_err(|e| e.to_string())?;
        let bytes = |t: &ToolResponseTable, m| canonical::canonical_bytes_of(&(t, m)).map_err(|e| e.to_string());
        check(bytes(&out, &manifest)? == bytes(&again, &manifest2)?, format!("seed {seed}: replay differs"))?;
    }
    let total = (invocations * 5) as f64;
    let p = 1.0 / 3.0;
    let se = (p * (1.0 - p) / total).sqrt();
    for ft in FaultType::ALL {
        let share = *tally.get(&format!("{ft:?}")).unwrap_or(&0) as f64 / total;
        check((share - p).abs() <= 3.0 * se, format!("{ft:?} share {share:.4}, se {se:.4}"))?;
    }
    Ok(format!("10000 invocations x 5 faults, type shares {tally:?}"))
}

fn generator_counts() -> Outcome {
    let expected: [(TaskId, &[u64], &[u64]); 3] = [
        (TaskId::ComplianceTriage, &[8, 4, 6, 7, 10, 15], &[15, 25, 10]),
        (TaskId::PortfolioConstraint, &[12, 6, 8, 3, 21], &[25, 18, 7]),
        (TaskId::DataopsException, &[15, 18, 10, 7], &[30, 15, 5]),
    ];
    for (task, cats, labels) in expected {
        let def = task_definition(task);
        let cases = generate_cases(task, 50, 42).map_err(|e| e.to_string())?;
        let cat_counts: Vec<u64> =
            def.categories.iter().map(|(c, _)| cases.iter().filter(|x| &x.category == c).count() as u64).collect();
        let lab_counts: Vec<u64> =
            def.decision_space.iter().map(|l| cases.iter().filter(|x| &x.ground_truth == l).count() as u64).collect();
        check(cat_counts == cats, format!("{task} categories {cat_counts:?}"))?;
        check(lab_counts == labels, format!("{task} labels {lab_counts:?}"))?;
    }
    Ok("8/4/6/7/10/15, 12/6/8/3/21, 15/18/10/7; 15/25/10, 25/18/7, 30/15/5".into())
}

fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{}{}", (b'a' + (i / 26) as u8) as char, (b'a' + (i % 26) as u8) as char)).collect()
}

fn faithfulness_fixtures() -> Outcome {
    let results = [
        json!({ "match_score": 0.91, "list_type": "OFAC", "status": "potential_match" }),
        json!({ "score": 72, "near_threshold_txn_7d": 1, "as_of": "2025-06-30" }),
        json!({ "affected_records": 1200, "success_rate": 0.875 }),
    ];
    let steps: Vec<ToolCall> = results
        .iter()
        .enumerate()
        .map(|(i, r)| ToolCall::new(i, format!("tool_{i}"), json!({}), r.clone()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let evidence = evidence_from_trajectory(&steps);
    let numeric: Vec<(String, String)> = results
        .iter()
        .flat_map(flatten_leaves)
        .filter(|(_, v)| v.parse::<f64>().is_ok())
        .collect();
    let verbatim: Vec<String> = numeric.iter().map(|(p, v)| render_leaf(p, v)).collect();
    let perturbed: Vec<String> = numeric
        .iter()
        .map(|(p, v)| render_leaf(p, &(v.parse::<f64>().unwrap_or(0.0) * 1.5 + 1.0).to_string()))
        .collect();
    let g1 = evidence_grounding(&verbatim, &evidence);
    check(g1.value() == 1.0 && !g1.vacuous, format!("verbatim grounding {}", g1.grounding))?;
    let g0 = evidence_grounding(&perturbed, &evidence);
    check(g0.value() == 0.0, format!("perturbed grounding {}", g0.grounding))?;

    // Plain lowercase words: no entities, no numbers, so only Jaccard decides.
    let shared = |k| words("zq", k);
    let text = |ws: &[String]| ws.join(" ");
    let fixture = |inter: usize, union: usize| {
        let claim: Vec<String> = shared(union);
        let evid: Vec<String> = shared(inter);
        is_aligned(&extract_features(&text(&claim)), &extract_features(&text(&evid)))
    };
    let below = fixture(59, 100);
    let at = fixture(60, 100);
    check(below.similarity == 0.59 && !below.aligned, format!("0.59 fixture {below:?}"))?;
    check(at.similarity == 0.60 && at.aligned, format!("0.60 fixture {at:?}"))?;
    Ok(format!("verbatim 1.0, perturbed 0.0 over {} claims; 0.59 rejected, 0.60 accepted", verbatim.len()))
}

fn full_suite(root: &Path) -> Result<(Vec<u8>, Vec<Vec<u8>>), String> {
    let mut json_bytes = Vec::new();
    let mut tables = Vec::new();
    for task in TaskId::ALL {
        let out = root.join(task.as_str());
        let cfg = RunConfig {
            perturbations: PerturbationKind::ALL.iter().map(|k| PerturbationSpec::new(*k)).collect(),
            ..RunConfig::new(task, 0.05)
        };
        let reports = runner::run_evaluation(&cfg, &out, None).map_err(|e| e.to_string())?;
        json_bytes.extend(render_json(&reports).map_err(|e| e.to_string())?);
        for format in [ReportFormat::Markdown, ReportFormat::Csv] {
            for p in emit_report(&reports, format, &out.join("report")).map_err(|e| e.to_string())? {
                tables.push(fs::read(p).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok((json_bytes, tables))
}

fn flip_each_record(root: &Path) -> Result<usize, String> {
    let mut flipped = 0;
    for task in TaskId::ALL {
        let out = root.join(task.as_str());
        let mut files: Vec<_> = fs::read_dir(out.join(runner::TRANSCRIPTS_DIR))
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        files.sort();
        for file in files {
            let original = fs::read(&file).map_err(|e| e.to_string())?;
            let mut start = 0;
            let mut line_no = 0u64;
            while start < original.len() {
                let end = start + original[start..].iter().position(|b| *b == b'\n').ok_or("unterminated record")?;
                // A deterministic spread of positions across records.
                let pos = start + ((line_no * 7919 + flipped as u64 * 104_729) % (end - start) as u64) as usize;
                let mut bad = original.clone();
                bad[pos] ^= 0x01;
                fs::write(&file, &bad).map_err(|e| e.to_string())?;
                let verdict = runner::verify(&out).map_err(|e| e.to_string())?;
                fs::write(&file, &original).map_err(|e| e.to_string())?;
                check(!verdict.is_ok(), format!("flip at byte {pos} of {} went unnoticed", file.display()))?;
                flipped += 1;
                line_no += 1;
                start = end + 1;
            }
        }
        check(runner::verify(&out).map_err(|e| e.to_string())? == Integrity::Ok, "restored store fails verify")?;
    }
    Ok(flipped)
}

fn replayability() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let first = full_suite(a.path())?;
    let second = full_suite(b.path())?;
    let elapsed = t0.elapsed();
    check(first == second, "metric reports differ between identical runs")?;
    for task in TaskId::ALL {
        let v = runner::verify(&a.path().join(task.as_str())).map_err(|e| e.to_string())?;
        check(v == Integrity::Ok, format!("{task}: verify reported {v:?}"))?;
    }
    let flips = flip_each_record(a.path())?;
    within(elapsed, 60)?;
    Ok(format!("3 tasks x 5 conditions x 10x8 byte-identical in {elapsed:.2?}; {flips} single-byte flips all detected"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("tier-1 posture", tier1_posture),
        ("scaling constants", scaling_constants),
        ("wilson intervals", wilson_bounds),
        ("drifty oracle", drifty_oracle),
        ("pass@k enumeration", pass_k_enumeration),
        ("stress anchors", stress_anchors),
        ("dq fault injection", dq_injection),
        ("generator counts", generator_counts),
        ("faithfulness fixtures", faithfulness_fixtures),
        ("replayability", replayability),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(note) => println!("PASS {:>2} {name}: {note}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
