use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use audit_harness::agents::DriftSpec;
use audit_harness::benchmark::TaskId;
use audit_harness::model::{Architecture, ProviderClass};
use audit_harness::report::{cli_gate, emit_report, ReportFormat};
use audit_harness::runner::{self, AgentSelection, RunConfig};
use audit_harness::store::Integrity;
use audit_harness::stress::{PerturbationKind, PerturbationSpec};

#[derive(Parser)]
#[command(name = "audit-harness", version, about = "Determinism and faithfulness audits for tool-using agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate fixtures, run trials and write transcripts plus a report.
    Run(RunArgs),
    /// Re-grade an existing run directory and print the JSON report.
    Grade {
        #[arg(long, env = "AUDIT_HARNESS_OUT")]
        out: PathBuf,
    },
    /// Re-grade and render the report tables.
    Report {
        #[arg(long, env = "AUDIT_HARNESS_OUT")]
        out: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
    },
    /// Check every transcript hash chain.
    Verify {
        #[arg(long, env = "AUDIT_HARNESS_OUT")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentKind {
    Scripted,
    Drifty,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    SchemaFirst,
    Unconstrained,
}

#[derive(Args)]
struct RunArgs {
    /// Canonical JSON run config; other flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "AUDIT_HARNESS_OUT")]
    out: PathBuf,
    #[arg(long, default_value = "compliance_triage")]
    task: TaskId,
    #[arg(long, value_enum, default_value = "scripted")]
    agent: AgentKind,
    #[arg(long, value_enum, default_value = "schema-first")]
    mode: Mode,
    /// Program for the external agent; repeat --agent-arg for its arguments.
    #[arg(long)]
    program: Option<String>,
    #[arg(long = "agent-arg")]
    agent_args: Vec<String>,
    /// Decision flip probability for the drifty agent.
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    #[arg(long, default_value_t = 0.0)]
    p_tool_swap: f64,
    #[arg(long, default_value_t = 0.0)]
    p_arg_jitter: f64,
    #[arg(long)]
    session_entangled: bool,
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long)]
    api: bool,
    #[arg(long, default_value_t = 10)]
    cases: usize,
    #[arg(long, default_value_t = 8)]
    runs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// baseline, redeploy, dq_fault, market_shock or temporal_shift; repeatable.
    #[arg(long = "perturbation")]
    perturbations: Vec<PerturbationKind>,
    #[arg(long, default_value = "default")]
    slo_profile: String,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long)]
    hitl: bool,
    #[arg(long)]
    fixtures: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "md")]
    format: String,
}

impl RunArgs {
    fn to_config(&self) -> Result<RunConfig, String> {
        if let Some(path) = &self.config {
            return RunConfig::load(path).map_err(|e| e.to_string());
        }
        let mode = match self.mode {
            Mode::SchemaFirst => Architecture::SchemaFirst,
            Mode::Unconstrained => Architecture::Unconstrained,
        };
        let agent = match self.agent {
            AgentKind::Scripted => AgentSelection::Scripted { mode },
            AgentKind::Drifty => AgentSelection::Drifty {
                mode,
                drift: DriftSpec {
                    p_tool_swap: self.p_tool_swap,
                    p_arg_jitter: self.p_arg_jitter,
                    p_decision_flip: self.q,
                    master_seed: self.seed,
                    session_entangled: self.session_entangled,
                },
            },
            AgentKind::External => AgentSelection::External {
                program: self.program.clone().ok_or("--agent external needs --program")?,
                args: self.agent_args.clone(),
                mode,
            },
        };
        let mut perturbations: Vec<PerturbationSpec> = self.perturbations.iter().map(|k| PerturbationSpec::new(*k)).collect();
        if !perturbations.iter().any(|p| p.kind == PerturbationKind::Baseline) {
            perturbations.insert(0, PerturbationSpec::new(PerturbationKind::Baseline));
        }
        Ok(RunConfig {
            agent,
            model_id: self.model_id.clone(),
            provider_class: if self.api { ProviderClass::Api } else { ProviderClass::Local },
            n_cases: self.cases,
            runs_per_case: self.runs,
            master_seed: self.seed,
            perturbations,
            slo_profile: self.slo_profile.clone(),
            hitl_available: self.hitl,
            fixtures_dir: self.fixtures.clone(),
            ..RunConfig::new(self.task, self.epsilon)
        })
    }
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    exit(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let format: ReportFormat = match args.format.parse() {
                Ok(f) => f,
                Err(e) => return fail(e),
            };
            let cfg = match args.to_config() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match runner::run_evaluation(&cfg, &args.out, args.workers) {
                Ok(reports) => match emit_report(&reports, format, &args.out.join("report")) {
                    Ok(paths) => {
                        for p in paths {
                            println!("{}", p.display());
                        }
                        exit(cli_gate(&reports))
                    }
                    Err(e) => fail(e),
                },
                Err(e) => fail(e),
            }
        }
        Command::Grade { out } => match runner::grade_store(&out) {
            Ok(reports) => match audit_harness::report::render_json(&reports) {
                Ok(bytes) => {
                    println!("{}", String::from_utf8_lossy(&bytes));
                    exit(cli_gate(&reports))
                }
                Err(e) => fail(e),
            },
            Err(e) => fail(e),
        },
        Command::Report { out, format } => {
            let format: ReportFormat = match format.parse() {
                Ok(f) => f,
                Err(e) => return fail(e),
            };
            match runner::grade_store(&out).map_err(|e| e.to_string()).and_then(|r| {
                emit_report(&r, format, &out.join("report")).map(|p| (r, p)).map_err(|e| e.to_string())
            }) {
                Ok((reports, paths)) => {
                    for p in paths {
                        println!("{}", p.display());
                    }
                    exit(cli_gate(&reports))
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify { out } => match runner::verify(&out) {
            Ok(Integrity::Ok) => {
                println!("ok");
                exit(0)
            }
            Ok(Integrity::FirstBadSeq(seq)) => fail(format!("hash chain broken at seq {seq}")),
            Err(e) => fail(e),
        },
    }
}
