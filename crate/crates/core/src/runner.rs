//! Orchestrates a run (fixtures, perturbations, agent trials, transcripts)
//! and grades a finished store into [`Report`]s.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{errored_trial, Agent, AgentError, DriftSpec, DriftyAgent, ExternalAgent, PolicyScript, ScriptedAgent, TrialContext};
use crate::benchmark::{
    self, generate_cases, grade_accuracy, task_definition, BenchmarkError, CaseFixture, SloMeasurements, SloSpec, TaskId,
};
use crate::canonical::{self, CanonicalizationError};
use crate::determinism::{self, AggregateDeterminism, DeterminismError, DeterminismReport, Fraction, Metric};
use crate::faithfulness::{self, constraint_satisfaction, evidence_from_trajectory, evidence_grounding, extract_claims};
use crate::model::{AgentConfig, Architecture, ProviderClass, Trial};
use crate::report::{
    ConditionResult, Constants, Exclusion, PassK, Report, SloSection, StatSummary, StressCell, StressRow,
};
use crate::seeding::derive_seed;
use crate::stats::{self, StatsError};
use crate::store::{perturbation_id, Integrity, StoreError, TranscriptStore, TrialFilter};
use crate::stress::{
    self, determinism_delta, inject_dq_fault_pooled, market_shock_case, project_stress_determinism, redeploy_marker,
    temporal_shift, PerturbationKind, PerturbationSpec, StressError, TierDeltaTable,
};

pub const CONFIG_FILE: &str = "run_config.json";
pub const FIXTURES_DIR: &str = "fixtures";
pub const TRANSCRIPTS_DIR: &str = "transcripts";
pub const MANIFESTS_DIR: &str = "manifests";
pub const CONFIDENCE: f64 = 0.95;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error("transcript store at {0} already holds trials")]
    NonEmptyStore(PathBuf),
    #[error("transcript chain broken at seq {0}")]
    Integrity(u64),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error(transparent)]
    Stress(#[from] StressError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Determinism(#[from] DeterminismError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Canonical(#[from] CanonicalizationError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSelection {
    Scripted {
        #[serde(default = "schema_first")]
        mode: Architecture,
    },
    Drifty {
        #[serde(default = "schema_first")]
        mode: Architecture,
        drift: DriftSpec,
    },
    External {
        program: String,
        #[serde(default)]
        args: Vec<String>,
        /// Declared output architecture of the external agent.
        #[serde(default = "schema_first")]
        mode: Architecture,
    },
}

fn schema_first() -> Architecture {
    Architecture::SchemaFirst
}

impl Default for AgentSelection {
    fn default() -> Self {
        AgentSelection::Scripted { mode: Architecture::SchemaFirst }
    }
}

impl AgentSelection {
    pub fn mode(&self) -> Architecture {
        match self {
            AgentSelection::Scripted { mode } | AgentSelection::Drifty { mode, .. } | AgentSelection::External { mode, .. } => {
                *mode
            }
        }
    }

    pub fn build(&self, task: TaskId) -> Result<Box<dyn Agent>, AgentError> {
        Ok(match self {
            AgentSelection::Scripted { mode } => Box::new(ScriptedAgent { policy: PolicyScript::new(task, *mode) }),
            AgentSelection::Drifty { mode, drift } => {
                drift.validate()?;
                Box::new(DriftyAgent { policy: PolicyScript::new(task, *mode), drift: *drift })
            }
            AgentSelection::External { program, args, .. } => {
                Box::new(ExternalAgent { program: program.clone(), args: args.clone() })
            }
        })
    }

    fn default_model_id(&self) -> &'static str {
        match self {
            AgentSelection::Scripted { .. } => "scripted",
            AgentSelection::Drifty { .. } => "drifty",
            AgentSelection::External { .. } => "external",
        }
    }
}

/// Everything that determines a run's results. Stored canonically as
/// `run_config.json` next to the transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskId,
    #[serde(default)]
    pub agent: AgentSelection,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default = "local")]
    pub provider_class: ProviderClass,
    #[serde(default = "default_cases")]
    pub n_cases: usize,
    #[serde(default = "default_runs")]
    pub runs_per_case: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default = "default_perturbations")]
    pub perturbations: Vec<PerturbationSpec>,
    #[serde(default = "default_profile")]
    pub slo_profile: String,
    /// Tolerated error for the validation sample size; no default here.
    pub epsilon: f64,
    #[serde(default)]
    pub hitl_available: bool,
    /// Load fixtures from here instead of generating them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixtures_dir: Option<PathBuf>,
}

fn local() -> ProviderClass {
    ProviderClass::Local
}
fn default_cases() -> usize {
    10
}
fn default_runs() -> usize {
    8
}
fn default_seed() -> u64 {
    42
}
fn default_perturbations() -> Vec<PerturbationSpec> {
    vec![PerturbationSpec::new(PerturbationKind::Baseline)]
}
fn default_profile() -> String {
    "default".into()
}

impl RunConfig {
    pub fn new(task: TaskId, epsilon: f64) -> Self {
        RunConfig {
            task,
            agent: AgentSelection::default(),
            model_id: None,
            provider_class: ProviderClass::Local,
            n_cases: default_cases(),
            runs_per_case: default_runs(),
            master_seed: default_seed(),
            perturbations: default_perturbations(),
            slo_profile: default_profile(),
            epsilon,
            hitl_available: false,
            fixtures_dir: None,
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            model_id: self.model_id.clone().unwrap_or_else(|| self.agent.default_model_id().into()),
            architecture: self.agent.mode(),
            temperature: 0.0,
            seed: Some(self.master_seed),
            provider_class: self.provider_class,
            session: None,
        }
    }

    pub fn slo(&self) -> Result<SloSpec, RunError> {
        SloSpec::profile(&self.slo_profile).ok_or_else(|| RunError::Config(format!("unknown SLO profile {:?}", self.slo_profile)))
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.n_cases == 0 || self.n_cases > benchmark::MAX_CASES {
            return Err(RunError::Config(format!("n_cases must be in 1..={}, got {}", benchmark::MAX_CASES, self.n_cases)));
        }
        if self.runs_per_case < 2 {
            return Err(RunError::Config(format!("runs_per_case must be ≥ 2, got {}", self.runs_per_case)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(RunError::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.perturbations.is_empty() {
            return Err(RunError::Config("no perturbations requested".into()));
        }
        let mut seen = Vec::new();
        for p in &self.perturbations {
            p.validate()?;
            if seen.contains(&p.kind) {
                return Err(RunError::Config(format!("perturbation {} listed twice", p.kind.as_str())));
            }
            seen.push(p.kind);
        }
        if let AgentSelection::Drifty { drift, .. } = &self.agent {
            drift.validate()?;
        }
        self.slo()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        serde_json::from_slice(&bytes).map_err(|e| RunError::Parse { path: path.to_path_buf(), message: e.to_string() })
    }
}

struct Job {
    case: CaseFixture,
    ctx: TrialContext,
}

fn write_canonical<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut bytes = canonical::canonical_bytes_of(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io_err(path))
}

fn load_cases(cfg: &RunConfig) -> Result<Vec<CaseFixture>, RunError> {
    match &cfg.fixtures_dir {
        None => Ok(generate_cases(cfg.task, cfg.n_cases, cfg.master_seed)?),
        Some(dir) => {
            let cases: Vec<CaseFixture> =
                benchmark::load_fixtures(dir)?.into_iter().filter(|c| c.task_id == cfg.task).take(cfg.n_cases).collect();
            if cases.is_empty() {
                return Err(RunError::Config(format!("no {} fixtures in {}", cfg.task, dir.display())));
            }
            Ok(cases)
        }
    }
}

fn jobs_for(cfg: &RunConfig, spec: &PerturbationSpec, cases: &[CaseFixture], out: &Path) -> Result<Vec<Job>, RunError> {
    let base = cfg.agent_config();
    let kind = spec.kind;
    let label = kind.as_str();
    let perturbation = (kind != PerturbationKind::Baseline).then(|| label.to_string());
    let shifted: Option<Vec<CaseFixture>> =
        (kind == PerturbationKind::TemporalShift).then(|| cases.iter().map(|c| temporal_shift(c, spec.offset_months)).collect());
    let mut jobs = Vec::new();
    for r in 0..cfg.runs_per_case {
        let config = match kind {
            PerturbationKind::Redeploy => redeploy_marker(&base, r as u64 + 1),
            _ => base.clone(),
        };
        let variant: Vec<CaseFixture> = match kind {
            PerturbationKind::Baseline | PerturbationKind::Redeploy => cases.to_vec(),
            PerturbationKind::TemporalShift => shifted.clone().unwrap_or_default(),
            PerturbationKind::DqFault => {
                let seed = derive_seed(cfg.master_seed, &[label, &r.to_string(), &spec.seed.to_string()]);
                let (faulted, manifest) = inject_dq_fault_pooled(cases, spec.rate, seed)?;
                let dir = out.join(MANIFESTS_DIR);
                fs::create_dir_all(&dir).map_err(io_err(&dir))?;
                write_canonical(&dir.join(format!("{label}-r{r}.json")), &manifest)?;
                faulted
            }
            PerturbationKind::MarketShock => cases
                .iter()
                .map(|c| {
                    let seed = derive_seed(cfg.master_seed, &[&c.case_id, &r.to_string(), label, &spec.seed.to_string()]);
                    market_shock_case(c, spec.sigma_multiplier, seed)
                })
                .collect::<Result<_, _>>()?,
        };
        for case in variant {
            let ctx = TrialContext {
                run_id: format!("{}-{label}-r{r}", case.case_id),
                run_index: r,
                config: config.clone(),
                perturbation: perturbation.clone(),
            };
            jobs.push(Job { case, ctx });
        }
    }
    Ok(jobs)
}

/// Execute a run into `out` and grade it.
///
/// `workers` caps trial concurrency (`None` uses every core). Trials are
/// appended in a fixed order whatever the concurrency, so the store and the
/// report depend only on the config.
pub fn run_evaluation(cfg: &RunConfig, out: &Path, workers: Option<usize>) -> Result<Vec<Report>, RunError> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let store = TranscriptStore::open(out.join(TRANSCRIPTS_DIR))?;
    if !store.is_empty() {
        return Err(RunError::NonEmptyStore(store.root().to_path_buf()));
    }
    let cases = load_cases(cfg)?;
    benchmark::write_fixtures(&out.join(FIXTURES_DIR), &cases)?;
    write_canonical(&out.join(CONFIG_FILE), cfg)?;

    let agent = cfg.agent.build(cfg.task)?;
    let mut jobs = Vec::new();
    for spec in &cfg.perturbations {
        jobs.extend(jobs_for(cfg, spec, &cases, out)?);
    }
    let execute = || -> Vec<Trial> {
        jobs.par_iter()
            .map(|j| agent.run(&j.case, &j.ctx).unwrap_or_else(|e| errored_trial(&j.case, &j.ctx, e.to_string())))
            .collect()
    };
    let trials = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| RunError::Config(e.to_string()))?
            .install(execute),
        None => execute(),
    };
    for t in &trials {
        store.append_trial(t)?;
    }
    grade_store(out)
}

/// Run-level mean over cases; tolerates cases with fewer completed runs.
fn aggregate_ragged(reports: &[DeterminismReport], metric: Metric) -> Result<AggregateDeterminism, DeterminismError> {
    match determinism::aggregate(reports, metric) {
        Err(DeterminismError::Shape { .. }) => {
            let pick = |r: &DeterminismReport| match metric {
                Metric::Decision => (r.dec_det, r.all_identical_decision),
                Metric::Action => (r.act_det, r.all_identical_actions),
                Metric::Signature => (r.sig_det, r.all_identical_signature),
            };
            let (num, den, identical) = reports.iter().fold((0, 0, 0), |(n, d, i), r| {
                let (f, all) = pick(r);
                (n + f.num, d + f.den, i + all as u64)
            });
            Ok(AggregateDeterminism {
                metric,
                run_level: Fraction::new(num, den),
                case_level: Fraction::new(identical, reports.len() as u64),
                n_cases: reports.len(),
                runs_per_case: reports.iter().map(|r| r.n_runs).max().unwrap_or(0),
            })
        }
        other => other,
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

struct Truth<'a> {
    fixtures: &'a BTreeMap<String, CaseFixture>,
    labels: BTreeMap<String, String>,
}

fn grade_condition(
    perturbation: &str,
    by_case: &BTreeMap<String, Vec<Trial>>,
    truth: &Truth,
    severity: &[String],
) -> Result<Option<ConditionResult>, RunError> {
    let mut cases = Vec::new();
    let mut exclusions = Vec::new();
    let mut grounding = Vec::new();
    let mut vacuous = 0;
    let mut consat = Vec::new();
    let mut tools = Vec::new();
    let mut correct_counts = Vec::new();
    for (case_id, trials) in by_case {
        for t in trials.iter().filter(|t| !t.is_completed()) {
            exclusions.push(Exclusion {
                run_id: t.run_id.clone(),
                case_id: case_id.clone(),
                error: t.error.clone().unwrap_or_default(),
            });
        }
        let done: Vec<&Trial> = trials.iter().filter(|t| t.is_completed()).collect();
        if done.is_empty() {
            continue;
        }
        cases.push(DeterminismReport::grade(trials)?);
        let fixture = truth.fixtures.get(case_id);
        let mut correct = 0u64;
        for t in &done {
            tools.push(t.steps.len() as f64);
            let Some(d) = &t.decision else { continue };
            let g = evidence_grounding(&extract_claims(d), &evidence_from_trajectory(&t.steps));
            if g.vacuous {
                vacuous += 1;
            } else {
                grounding.push(g.value());
            }
            if let Some(f) = fixture {
                if let Ok(c) = constraint_satisfaction(d, &f.constraints, &f.facts) {
                    consat.push(c.value());
                }
            }
            correct += (truth.labels.get(case_id) == Some(&d.label)) as u64;
        }
        correct_counts.push((done.len() as u64, correct));
    }
    if cases.is_empty() {
        return Ok(None);
    }
    let k_max = correct_counts.iter().map(|(n, _)| *n).min().unwrap_or(0);
    let mut pass_k = Vec::new();
    for k in 1..=k_max {
        let mut at = Vec::new();
        let mut all = Vec::new();
        for &(n, s) in &correct_counts {
            at.push(determinism::pass_at_k(n, s, k)?);
            all.push(determinism::pass_all_k(n, s, k)?);
        }
        pass_k.push(PassK { k, pass_at_k: mean(&at).unwrap_or(0.0), pass_all_k: mean(&all).unwrap_or(0.0) });
    }
    Ok(Some(ConditionResult {
        perturbation: perturbation.to_string(),
        decision: aggregate_ragged(&cases, Metric::Decision)?,
        action: aggregate_ragged(&cases, Metric::Action)?,
        signature: aggregate_ragged(&cases, Metric::Signature)?,
        accuracy: grade_accuracy(by_case, &truth.labels, severity),
        evidence_grounding: mean(&grounding),
        vacuous_decisions: vacuous,
        constraint_satisfaction: mean(&consat),
        tools_per_run: mean(&tools).unwrap_or(0.0),
        pass_k,
        exclusions,
        cases,
    }))
}

fn stress_row(conditions: &[ConditionResult], tier: stats::Tier, table: &TierDeltaTable) -> StressRow {
    let measured = |kind: PerturbationKind| {
        conditions.iter().find(|c| c.perturbation == kind.as_str()).map(|c| c.decision.run_level.value())
    };
    let base = measured(PerturbationKind::Baseline);
    let cell_for = |kind: PerturbationKind, project: bool| match (measured(kind), base) {
        (Some(v), b) => StressCell { value: Some(v), projected: false, delta: b.map(|b| determinism_delta(b, v)) },
        (None, Some(b)) if project => match project_stress_determinism(b, tier, kind, table) {
            Ok(p) => StressCell { value: Some(p.value), projected: true, delta: Some(determinism_delta(b, p.value)) },
            Err(_) => StressCell::EMPTY,
        },
        _ => StressCell::EMPTY,
    };
    StressRow {
        baseline: StressCell { value: base, projected: false, delta: None },
        redeploy: cell_for(PerturbationKind::Redeploy, true),
        dq_fault: cell_for(PerturbationKind::DqFault, true),
        market_shock: cell_for(PerturbationKind::MarketShock, true),
        temporal_shift: cell_for(PerturbationKind::TemporalShift, false),
    }
}

fn stat_summary(
    cfg: &RunConfig,
    conditions: &[ConditionResult],
    baseline: &ConditionResult,
    truth: &Truth,
) -> Result<StatSummary, RunError> {
    let drift_rates: Vec<f64> = conditions
        .iter()
        .filter(|c| c.perturbation != PerturbationKind::TemporalShift.as_str())
        .flat_map(|c| c.cases.iter().map(|r| stats::drift_rate(r.dec_det.value())))
        .collect();
    let sigma2_drift = stats::drift_variance(&drift_rates)?;
    let phi = stats::scaling_factor(sigma2_drift);
    let n_val_star = stats::validation_sample_size(sigma2_drift.sqrt(), cfg.epsilon, phi)?;
    let wilson_n = baseline.cases.len() as u64;
    let wilson_successes = baseline.cases.iter().filter(|r| r.all_identical_decision).count() as u64;
    let wilson = stats::wilson_interval(wilson_successes, wilson_n, CONFIDENCE)?;
    let bootstrap_phi = stats::bootstrap_ci(
        &drift_rates,
        |xs| stats::scaling_factor(stats::drift_variance(xs).unwrap_or(0.0)),
        BOOTSTRAP_RESAMPLES,
        derive_seed(cfg.master_seed, &["bootstrap_phi"]),
        CONFIDENCE,
    )?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = baseline
        .cases
        .iter()
        .map(|r| {
            let majority = baseline.accuracy.majority.get(&r.case_id).cloned().flatten();
            let correct = majority.is_some() && majority.as_ref() == truth.labels.get(&r.case_id);
            (r.dec_det.value(), if correct { 1.0 } else { 0.0 })
        })
        .unzip();
    let pearson_r = stats::pearson(&xs, &ys).ok();
    let tier = stats::classify_with_provenance(baseline.decision.case_level.value(), cfg.provider_class == ProviderClass::Api);
    Ok(StatSummary {
        drift_rates,
        sigma2_drift,
        phi,
        epsilon: cfg.epsilon,
        n_val_star,
        wilson_successes,
        wilson_n,
        wilson,
        bootstrap_phi,
        pearson_r,
        pearson_n: xs.len(),
        tier,
        recommendation: stats::recommend_deployment(tier, cfg.hitl_available),
        constants: Constants {
            sigma2_ref: stats::SIGMA2_REF,
            tier1_min: stats::TIER1_MIN,
            tier2_min: stats::TIER2_MIN,
            robustness_bound: stress::ROBUSTNESS_BOUND,
            jaccard_threshold: format!("{}/{}", faithfulness::JACCARD_THRESHOLD.0, faithfulness::JACCARD_THRESHOLD.1),
            numeric_rel_tol: faithfulness::NUMERIC_REL_TOL,
            stopwords_version: faithfulness::STOPWORDS_VERSION.into(),
            rules_version: benchmark::rules::RULES_VERSION.into(),
            confidence: CONFIDENCE,
            bootstrap_resamples: BOOTSTRAP_RESAMPLES,
        },
    })
}

/// Grade the run stored under `out`: verifies every hash chain, then
/// produces one report per agent configuration. Errored trials are listed,
/// not counted.
pub fn grade_store(out: &Path) -> Result<Vec<Report>, RunError> {
    let cfg = RunConfig::load(&out.join(CONFIG_FILE))?;
    let store = TranscriptStore::open(out.join(TRANSCRIPTS_DIR))?;
    if let Integrity::FirstBadSeq(seq) = store.verify_integrity()? {
        return Err(RunError::Integrity(seq));
    }
    let fixtures: BTreeMap<String, CaseFixture> =
        benchmark::load_fixtures(&out.join(FIXTURES_DIR))?.into_iter().map(|c| (c.case_id.clone(), c)).collect();
    let truth = Truth {
        labels: fixtures.iter().map(|(id, c)| (id.clone(), c.ground_truth.clone())).collect(),
        fixtures: &fixtures,
    };
    let def = task_definition(cfg.task);
    let slo = cfg.slo()?;
    let table = TierDeltaTable::default();

    // group key -> perturbation -> case -> trials
    type ByCase = BTreeMap<String, Vec<Trial>>;
    let mut groups: BTreeMap<String, (AgentConfig, BTreeMap<String, ByCase>)> = BTreeMap::new();
    for t in store.load_trials(&TrialFilter::default())? {
        let entry = groups.entry(t.config.group_key()).or_insert_with(|| (AgentConfig { session: None, ..t.config.clone() }, BTreeMap::new()));
        entry.1.entry(perturbation_id(&t).to_string()).or_default().entry(t.case_id.clone()).or_default().push(t);
    }

    let mut reports = Vec::new();
    for (_, (config, by_perturbation)) in groups {
        let mut conditions = Vec::new();
        for kind in PerturbationKind::ALL {
            if let Some(by_case) = by_perturbation.get(kind.as_str()) {
                if let Some(c) = grade_condition(kind.as_str(), by_case, &truth, &def.severity_order)? {
                    conditions.push(c);
                }
            }
        }
        let Some(baseline) = conditions.iter().find(|c| c.perturbation == "baseline").cloned() else {
            continue;
        };
        let stats = stat_summary(&cfg, &conditions, &baseline, &truth)?;
        let stress = stress_row(&conditions, stats.tier, &table);
        let gated: Vec<f64> = [&stress.redeploy, &stress.dq_fault, &stress.market_shock]
            .iter()
            .filter(|c| !c.projected)
            .filter_map(|c| c.delta.map(|d| d.delta))
            .collect();
        let grounding: Vec<f64> = baseline_grounding(&by_perturbation["baseline"]);
        let measurements = SloMeasurements::collect(&baseline.cases, &truth.labels, def.critical_label.as_str(), &grounding, &gated);
        let outcome = benchmark::check_slo(&measurements, &slo);
        reports.push(Report {
            label: format!("{} ({})", config.model_id, config.architecture.as_str()),
            task: cfg.task,
            agent: cfg.agent.build(cfg.task).map(|a| a.name()).unwrap_or_else(|_| config.model_id.clone()),
            config,
            conditions,
            stress,
            tier_deltas: table.clone(),
            stats,
            slo: SloSection { profile: cfg.slo_profile.clone(), spec: slo.clone(), measurements, outcome },
        });
    }
    Ok(reports)
}

fn baseline_grounding(by_case: &BTreeMap<String, Vec<Trial>>) -> Vec<f64> {
    by_case
        .values()
        .flatten()
        .filter(|t| t.is_completed())
        .filter_map(|t| t.decision.as_ref().map(|d| (t, d)))
        .map(|(t, d)| evidence_grounding(&extract_claims(d), &evidence_from_trajectory(&t.steps)))
        .filter(|g| !g.vacuous)
        .map(|g| g.value())
        .collect()
}

/// Recompute every hash chain under `out`.
pub fn verify(out: &Path) -> Result<Integrity, RunError> {
    let dir = out.join(TRANSCRIPTS_DIR);
    if !dir.is_dir() {
        return Err(RunError::Config(format!("no transcript store at {}", dir.display())));
    }
    Ok(TranscriptStore::open(out.join(TRANSCRIPTS_DIR))?.verify_integrity()?)
}
