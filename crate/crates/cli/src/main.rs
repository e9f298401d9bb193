//! `coevo`: plan, run, bench, simulate and report on reference-model
//! generation sessions.
//!
//! Exit codes: 0 success, 1 a session ended without success, 2 usage,
//! configuration or input error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use coevo_cli::{cmd_bench, cmd_coevo, cmd_plan, cmd_report, cmd_run, CliError, CoEvoOverrides, RunConfig};
use coevo_core::gateway::{ProviderConfig, ProviderKind};
use coevo_core::session::{OutcomeStatus, PolicyName};

#[derive(Parser)]
#[command(name = "coevo", version, about = "Reference model and testbench co-generation driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Naive,
    Flow,
    FixedTb,
    Refevo,
}

impl From<Mode> for PolicyName {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Naive => PolicyName::Naive,
            Mode::Flow => PolicyName::FlowOnly,
            Mode::FixedTb => PolicyName::FixedTb,
            Mode::Refevo => PolicyName::Refevo,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Provider {
    Mock,
    Http,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed recorded in outputs and used by the co-evolution simulator.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SessionFlags {
    /// Provider backend. The http token is read from the variable named by
    /// `provider.api_key_env` (default REFEVO_API_KEY).
    #[arg(long, value_enum)]
    provider: Option<Provider>,
    /// Mock script; defaults to `<spec stem>.script.json` beside the spec.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Chat-completion endpoint for the http provider.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name for the http provider.
    #[arg(long)]
    model: Option<String>,
    /// Toolchain profile (cxx or systemc).
    #[arg(long)]
    toolchain: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the execution plan of a spec as JSON.
    Plan {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Only check that the spec and config load; print OK.
        #[arg(long)]
        validate_only: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Run one generation session and write its outputs.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[command(flatten)]
        session: SessionFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Run every spec in a directory under each mode and aggregate.
    Bench {
        /// Directory of spec files with their mock scripts.
        #[arg(long)]
        spec: PathBuf,
        /// Modes to sweep; repeat the flag for several. Defaults to all four.
        #[arg(long, value_enum)]
        mode: Vec<Mode>,
        /// Sessions run in parallel.
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write breakdown.svg.
        #[arg(long)]
        chart: bool,
        #[command(flatten)]
        session: SessionFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo model of testbenches sharing the model's flaw.
    Coevo {
        #[arg(long)]
        p_model_flaw: Option<f64>,
        #[arg(long)]
        p_shared: Option<f64>,
        #[arg(long)]
        p_indep_tb: Option<f64>,
        #[arg(long)]
        p_detect: Option<f64>,
        #[arg(long)]
        max_rounds: Option<u32>,
        #[arg(long)]
        trials: Option<u64>,
        /// Directory for coevo.json (and coevo.svg with --chart).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, requires = "out")]
        chart: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Token, recall and outcome tables over saved transcripts.
    Report {
        /// Transcript files or directories searched for *.jsonl. Without
        /// any, report the synthetic tier sessions.
        #[arg(long)]
        transcripts: Vec<PathBuf>,
        /// Token budget of the sliding-window baseline for recall.
        #[arg(long)]
        baseline_budget: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, requires = "out")]
        chart: bool,
    },
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load_or_default(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_session(cfg: &mut RunConfig, f: SessionFlags) -> Result<(), CliError> {
    if let Some(t) = f.toolchain {
        cfg.toolchain = t;
    }
    if let Some(o) = f.out {
        cfg.out = o;
    }
    let kind = match f.provider {
        Some(Provider::Mock) => Some(ProviderKind::Mock),
        Some(Provider::Http) => Some(ProviderKind::Http),
        None => cfg.provider.as_ref().map(|p| p.kind),
    };
    match kind {
        Some(ProviderKind::Http) => {
            let mut p = cfg
                .provider
                .clone()
                .filter(|p| p.kind == ProviderKind::Http)
                .unwrap_or_else(|| ProviderConfig::http("", ""));
            if let Some(e) = f.endpoint {
                p.endpoint = Some(e);
            }
            if let Some(m) = f.model {
                p.model_name = Some(m);
            }
            p.endpoint = p.endpoint.filter(|e| !e.is_empty());
            p.model_name = p.model_name.filter(|m| !m.is_empty());
            p.validate().map_err(|e| CliError::Config(e.to_string()))?;
            cfg.provider = Some(p);
        }
        Some(ProviderKind::Mock) | None => {
            let script = f.script.or_else(|| cfg.provider.as_ref().and_then(|p| p.script_path.clone()));
            cfg.provider = script.map(ProviderConfig::mock);
        }
    }
    cfg.validate().map_err(CliError::Config)
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(v: &impl serde::Serialize) {
    emit(&format!("{}\n", serde_json::to_string_pretty(v).expect("serializable")));
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::input(path, "no such file or directory"))
    }
}

fn execute(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Plan {
            spec,
            mode,
            validate_only,
            common,
        } => {
            let mut cfg = load(&common)?;
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            let plan = cmd_plan(&spec, &cfg)?;
            if validate_only {
                emit("OK\n");
            } else {
                print_json(&plan);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            spec,
            mode,
            session,
            common,
        } => {
            require_file(&spec)?;
            let mut cfg = load(&common)?;
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            apply_session(&mut cfg, session)?;
            let manifest = cmd_run(&spec, &cfg)?;
            print_json(&manifest);
            Ok(if manifest.status == OutcomeStatus::Success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Bench {
            spec,
            mode,
            jobs,
            chart,
            session,
            common,
        } => {
            require_file(&spec)?;
            let mut cfg = load(&common)?;
            if !mode.is_empty() {
                cfg.modes = mode.into_iter().map(PolicyName::from).collect();
            }
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            if session.script.is_some() {
                return Err(CliError::Config(
                    "bench reads each spec's script from <stem>.script.json; --script is not accepted".into(),
                ));
            }
            apply_session(&mut cfg, session)?;
            let report = cmd_bench(&spec, &cfg, chart)?;
            emit(&report.breakdown.to_table());
            emit(&format!("wrote {}\n", cfg.out.join("bench.json").display()));
            Ok(ExitCode::SUCCESS)
        }
        Command::Coevo {
            p_model_flaw,
            p_shared,
            p_indep_tb,
            p_detect,
            max_rounds,
            trials,
            out,
            chart,
            common,
        } => {
            let mut cfg = load(&common)?;
            cfg.coevo = cfg.coevo.or(CoEvoOverrides {
                p_model_flaw,
                p_shared_hallucination: p_shared,
                p_indep_tb_flaw: p_indep_tb,
                p_arbiter_detect: p_detect,
                max_rounds,
                trials,
            });
            let report = cmd_coevo(&cfg, out.as_deref(), chart)?;
            print_json(&report);
            Ok(ExitCode::SUCCESS)
        }
        Command::Report {
            transcripts,
            baseline_budget,
            out,
            chart,
        } => {
            for t in &transcripts {
                require_file(t)?;
            }
            let report = cmd_report(&transcripts, baseline_budget, out.as_deref(), chart)?;
            emit(&report.to_tables());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
