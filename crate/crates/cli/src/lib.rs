//! Command implementations behind the `coevo` binary. Each command returns
//! its result so the binary only prints and picks the exit code.

pub mod config;

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use coevo_core::analytics::svg::{bar_chart, BarGroup};
use coevo_core::analytics::{
    coevo_report, failure_breakdown, recall_report, tier_fixtures, token_report, token_report_synthetic, Breakdown,
    CoEvoReport, RecallReport, TokenReport,
};
use coevo_core::evo::{run_session, write_outputs, Manifest, SessionConfig, SessionResult};
use coevo_core::gateway::{build_provider, ProviderConfig};
use coevo_core::planner::{analyze_complexity, build_execution_plan_with, evaluate_assets, ExecutionPlan, PLAN_SCHEMA};
use coevo_core::session::transcript::{Transcript, TranscriptRecord};
use coevo_core::session::{parse_spec, DesignSpec, LoopPolicy, OutcomeStatus, PolicyName, SpecFormat};
use coevo_core::sim::{Simulator, ToolchainConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{CoEvoOverrides, RunConfig};

/// Every error maps to exit code 2 with a one-line diagnostic.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn input(path: &Path, message: impl Display) -> Self {
        CliError::Input {
            path: path.display().to_string(),
            message: message.to_string().replace('\n', " "),
        }
    }
}

pub fn load_spec(path: &Path) -> Result<DesignSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::input(path, "spec file name is not valid UTF-8"))?;
    parse_spec(id, &text, SpecFormat::from_path(path)).map_err(|e| CliError::input(path, e))
}

fn plan_for(spec: &DesignSpec, policy: LoopPolicy, cfg: &RunConfig) -> ExecutionPlan {
    build_execution_plan_with(
        spec,
        &analyze_complexity(spec),
        &evaluate_assets(spec),
        policy,
        &cfg.session.planner,
    )
}

/// Plan JSON for `spec_path`, checked against the published schema shape by
/// the plan's own validation.
pub fn cmd_plan(spec_path: &Path, cfg: &RunConfig) -> Result<ExecutionPlan, CliError> {
    let spec = load_spec(spec_path)?;
    let plan = plan_for(&spec, LoopPolicy::new(cfg.mode), cfg);
    plan.validate().map_err(|e| CliError::input(spec_path, e))?;
    Ok(plan)
}

/// The shipped plan schema, for `plan --schema`.
pub fn plan_schema() -> &'static str {
    PLAN_SCHEMA
}

/// Mock script conventionally stored beside the spec: `<stem>.script.json`.
pub fn sibling_script(spec_path: &Path) -> PathBuf {
    let stem = spec_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    spec_path.with_file_name(format!("{stem}.script.json"))
}

fn provider_for(spec_path: &Path, cfg: &RunConfig) -> Result<ProviderConfig, CliError> {
    match &cfg.provider {
        Some(p) => Ok(p.clone()),
        None => {
            let script = sibling_script(spec_path);
            if !script.is_file() {
                return Err(CliError::input(&script, "mock script not found"));
            }
            Ok(ProviderConfig::mock(script))
        }
    }
}

fn simulator(cfg: &RunConfig) -> Result<Simulator, CliError> {
    let workdir = cfg.out.join("work");
    let tc = ToolchainConfig::profile(&cfg.toolchain, &workdir).ok_or_else(|| {
        CliError::Config(format!(
            "unknown toolchain profile `{}` (expected one of {})",
            cfg.toolchain,
            ToolchainConfig::PROFILES.join(", ")
        ))
    })?;
    Simulator::new(tc).map_err(|e| CliError::Config(e.to_string()))
}

fn session(
    spec_path: &Path,
    spec: &DesignSpec,
    policy: LoopPolicy,
    provider: &ProviderConfig,
    sim: &Simulator,
    cfg: &RunConfig,
) -> Result<SessionResult, CliError> {
    let provider = build_provider(provider).map_err(|e| CliError::input(spec_path, e))?;
    let session_cfg = SessionConfig {
        session_id: Some(format!("{}-{}", spec.spec_id, policy.name())),
        ..cfg.session.clone()
    };
    run_session(spec, policy, provider.as_ref(), sim, session_cfg).map_err(|e| CliError::input(spec_path, e))
}

/// Runs one session and writes its outputs under `cfg.out`.
pub fn cmd_run(spec_path: &Path, cfg: &RunConfig) -> Result<Manifest, CliError> {
    let spec = load_spec(spec_path)?;
    let provider = provider_for(spec_path, cfg)?;
    let sim = simulator(cfg)?;
    let result = session(spec_path, &spec, LoopPolicy::new(cfg.mode), &provider, &sim, cfg)?;
    write_outputs(&result, &cfg.out, Some(&cfg.echo())).map_err(|e| CliError::input(&cfg.out, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSession {
    pub spec_id: String,
    pub mode: PolicyName,
    pub status: OutcomeStatus,
    pub iterations: usize,
    pub tokens_spent: u64,
    pub anchored_tokens: u64,
    pub baseline_tokens: u64,
    pub reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: serde_json::Value,
    pub sessions: Vec<BenchSession>,
    pub breakdown: Breakdown,
    pub tokens: TokenReport,
    pub recall: RecallReport,
}

/// Spec files (`.md`, `.txt`) directly inside `dir`, sorted by name.
pub fn discover_specs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::input(dir, e))?;
    let mut specs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("md" | "txt")))
        .collect();
    specs.sort();
    if specs.is_empty() {
        return Err(CliError::input(dir, "no spec files (*.md, *.txt) found"));
    }
    Ok(specs)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::input(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::input(path, e))
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// Runs every (spec, mode) pair in `spec_dir` on up to `cfg.jobs` threads
/// and writes `bench.json` plus per-session outputs under `cfg.out`.
pub fn cmd_bench(spec_dir: &Path, cfg: &RunConfig, chart: bool) -> Result<BenchReport, CliError> {
    let specs = discover_specs(spec_dir)?
        .into_iter()
        .map(|p| {
            let spec = load_spec(&p)?;
            let provider = provider_for(&p, cfg)?;
            Ok((p, spec, provider))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut modes = cfg.modes.clone();
    modes.sort();
    modes.dedup();
    let sim = simulator(cfg)?;
    let pairs: Vec<_> = specs
        .iter()
        .flat_map(|s| modes.iter().map(move |m| (s, *m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let results = pool.install(|| {
        pairs
            .par_iter()
            .map(|((path, spec, provider), mode)| {
                let r = session(path, spec, LoopPolicy::new(*mode), provider, &sim, cfg)?;
                let dir = cfg.out.join("sessions").join(&spec.spec_id).join(mode.as_str());
                write_outputs(&r, &dir, Some(&cfg.echo())).map_err(|e| CliError::input(&dir, e))?;
                Ok(r)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    let mut sessions: Vec<BenchSession> = results
        .iter()
        .map(|r| {
            let m = Manifest::of(&r.outcome);
            BenchSession {
                spec_id: m.spec_id,
                mode: m.mode,
                status: m.status,
                iterations: m.iterations,
                tokens_spent: m.tokens.spent.value(),
                anchored_tokens: m.tokens.anchored_total.value(),
                baseline_tokens: m.tokens.baseline_total.value(),
                reduction_pct: m.tokens.reduction_pct,
            }
        })
        .collect();
    sessions.sort_by(|a, b| (&a.spec_id, a.mode).cmp(&(&b.spec_id, b.mode)));
    let transcripts: Vec<Transcript> = results.into_iter().map(|r| r.transcript).collect();
    let report = BenchReport {
        config: cfg.echo(),
        breakdown: failure_breakdown(sessions.iter().map(|s| (s.mode, s.status)), &modes)
            .map_err(|e| CliError::Config(e.to_string()))?,
        tokens: token_report(&transcripts).map_err(|e| CliError::Config(e.to_string()))?,
        recall: recall_report(&transcripts, Some(cfg.session.context.budgets.total))
            .map_err(|e| CliError::Config(e.to_string()))?,
        sessions,
    };
    write_file(&cfg.out.join("bench.json"), pretty(&report))?;
    write_file(&cfg.out.join("config.json"), pretty(&cfg.echo()))?;
    if chart {
        write_file(&cfg.out.join("breakdown.svg"), breakdown_chart(&report.breakdown))?;
    }
    Ok(report)
}

pub fn breakdown_chart(b: &Breakdown) -> String {
    let groups: Vec<BarGroup> = b
        .modes
        .iter()
        .map(|m| BarGroup {
            label: m.mode.to_string(),
            values: vec![m.success, m.compile_fail, m.func_fail, m.budget_exhausted],
        })
        .collect();
    bar_chart(
        "Outcome breakdown by mode",
        &["success", "compile_fail", "func_fail", "budget_exhausted"],
        &groups,
    )
}

pub fn coevo_chart(r: &CoEvoReport) -> String {
    let groups: Vec<BarGroup> = r
        .modes
        .iter()
        .map(|m| BarGroup {
            label: m.mode.to_string(),
            values: vec![m.false_positive_rate, m.true_pass_rate, m.func_fail_rate],
        })
        .collect();
    bar_chart(
        "Coupled validation outcomes",
        &["false positive", "true pass", "func fail"],
        &groups,
    )
}

/// Monte Carlo report; `out` receives `coevo.json` and, with `chart`,
/// `coevo.svg`.
pub fn cmd_coevo(cfg: &RunConfig, out: Option<&Path>, chart: bool) -> Result<CoEvoReport, CliError> {
    let params = cfg.coevo.params(cfg.seed);
    let report = coevo_report(&params).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(dir) = out {
        write_file(&dir.join("coevo.json"), pretty(&report))?;
        if chart {
            write_file(&dir.join("coevo.svg"), coevo_chart(&report))?;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub transcripts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<Breakdown>,
    pub tokens: TokenReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<RecallReport>,
}

impl Report {
    pub fn to_tables(&self) -> String {
        let mut s = String::new();
        if let Some(b) = &self.breakdown {
            s.push_str(&b.to_table());
            s.push('\n');
        }
        s.push_str(&self.tokens.to_table());
        if let Some(r) = &self.recall {
            s.push('\n');
            s.push_str(&r.to_table());
        }
        s
    }
}

fn collect_transcripts(path: &Path, found: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if path.is_file() {
        found.push(path.to_path_buf());
        return Ok(());
    }
    let entries = std::fs::read_dir(path).map_err(|e| CliError::input(path, e))?;
    let mut children: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    children.sort();
    for c in children {
        if c.is_dir() {
            collect_transcripts(&c, found)?;
        } else if c.extension().is_some_and(|e| e == "jsonl") {
            found.push(c);
        }
    }
    Ok(())
}

fn outcome_of(t: &Transcript) -> Option<(PolicyName, OutcomeStatus)> {
    let mode = t.records.iter().find_map(|r| match r {
        TranscriptRecord::Plan { plan } => Some(plan.policy.name()),
        _ => None,
    })?;
    let status = t.records.iter().rev().find_map(|r| match r {
        TranscriptRecord::Outcome { status, .. } => Some(*status),
        _ => None,
    })?;
    Some((mode, status))
}

/// Token, recall and outcome report over saved transcripts. With no inputs
/// the token report covers the shipped synthetic tier sessions.
pub fn cmd_report(
    inputs: &[PathBuf],
    baseline_budget: Option<u64>,
    out: Option<&Path>,
    chart: bool,
) -> Result<Report, CliError> {
    let report = if inputs.is_empty() {
        Report {
            transcripts: 0,
            breakdown: None,
            tokens: token_report_synthetic(&tier_fixtures()).map_err(|e| CliError::Config(e.to_string()))?,
            recall: None,
        }
    } else {
        let mut files = Vec::new();
        for i in inputs {
            collect_transcripts(i, &mut files)?;
        }
        if files.is_empty() {
            return Err(CliError::input(&inputs[0], "no transcripts (*.jsonl) found"));
        }
        let transcripts = files
            .iter()
            .map(|f| Transcript::load(f).map_err(|e| CliError::input(f, e)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut outcomes = BTreeMap::new();
        for (f, t) in files.iter().zip(&transcripts) {
            let o = outcome_of(t).ok_or_else(|| CliError::input(f, "transcript lacks a plan or outcome record"))?;
            outcomes.insert(f.clone(), o);
        }
        let modes: Vec<PolicyName> = PolicyName::ALL
            .into_iter()
            .filter(|m| outcomes.values().any(|o| o.0 == *m))
            .collect();
        let err = |e: coevo_core::analytics::AnalyticsError| CliError::Config(e.to_string());
        Report {
            transcripts: transcripts.len(),
            breakdown: Some(failure_breakdown(outcomes.into_values(), &modes).map_err(err)?),
            tokens: token_report(&transcripts).map_err(err)?,
            recall: Some(
                recall_report(&transcripts, baseline_budget.map(coevo_core::context::TokenCount)).map_err(err)?,
            ),
        }
    };
    if let Some(dir) = out {
        write_file(&dir.join("report.json"), pretty(&report))?;
        if chart {
            if let Some(b) = &report.breakdown {
                write_file(&dir.join("breakdown.svg"), breakdown_chart(b))?;
            }
        }
    }
    Ok(report)
}
