use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{check_termination, route, signature_counts, Dispatch, IterationRecord, Phase, SessionState, Termination};
use crate::analytics::{replay_ledger, TokenLedger};
use crate::context::{init_context, ContextConfig, ContextError, TokenCount, Turn};
use crate::gateway::{
    describe_sim, Agents, ArtifactContext, CallRecord, GatewayError, Generation, GenerationSettings, Provider,
    Templates, MODEL_FILENAME, TB_FILENAME,
};
use crate::planner::{analyze_complexity, build_execution_plan_with, evaluate_assets, ExecutionPlan, PlannerConfig};
use crate::session::transcript::{Transcript, TranscriptRecord};
use crate::session::{
    AgentRole, Artifact, ArtifactKind, DesignSpec, GoldenPair, LoopPolicy, OutcomeStatus, PolicyName, SessionOutcome,
};
use crate::sim::{SimBackend, SimError, SimReport};

#[derive(Debug, Error)]
pub enum EvoError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot write session output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    /// Names the build directory; defaults to `{spec_id}-{mode}`.
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub context: ContextConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub generation: GenerationSettings,
    /// Turns pushed into the context are cut to this many bytes.
    #[serde(default = "default_turn_max_bytes")]
    pub turn_max_bytes: usize,
}

fn default_turn_max_bytes() -> usize {
    16_000
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            session_id: None,
            context: ContextConfig::default(),
            planner: PlannerConfig::default(),
            generation: GenerationSettings::default(),
            turn_max_bytes: default_turn_max_bytes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub outcome: SessionOutcome,
    pub transcript: Transcript,
    pub plan: ExecutionPlan,
    /// Last report, with timing.
    pub final_sim: Option<SimReport>,
}

pub struct SessionRunner<'a> {
    provider: &'a dyn Provider,
    sim: &'a dyn SimBackend,
    templates: Templates,
    config: SessionConfig,
}

/// Runs one session with the builtin prompt templates.
pub fn run_session(
    spec: &DesignSpec,
    policy: LoopPolicy,
    provider: &dyn Provider,
    sim: &dyn SimBackend,
    config: SessionConfig,
) -> Result<SessionResult, EvoError> {
    SessionRunner::new(provider, sim, config).run(spec, policy)
}

enum Failure {
    Gateway(GatewayError),
    Context(ContextError),
    Sim(SimError),
}

impl From<GatewayError> for Failure {
    fn from(e: GatewayError) -> Self {
        Failure::Gateway(e)
    }
}

impl From<ContextError> for Failure {
    fn from(e: ContextError) -> Self {
        Failure::Context(e)
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Failure::Sim(e)
    }
}

struct Driver<'r> {
    spec: &'r DesignSpec,
    policy: LoopPolicy,
    plan: &'r ExecutionPlan,
    generation_plan: ExecutionPlan,
    agents: Agents<'r>,
    sim: &'r dyn SimBackend,
    session_id: String,
    turn_max_bytes: usize,
    state: SessionState,
    transcript: Transcript,
    iterations: Vec<IterationRecord>,
    round: u32,
    round_tokens: TokenCount,
    last_sim: Option<SimReport>,
    /// Revisions of the pair behind `last_sim`.
    last_sim_revisions: Option<(u32, u32)>,
}

impl<'a> SessionRunner<'a> {
    pub fn new(provider: &'a dyn Provider, sim: &'a dyn SimBackend, config: SessionConfig) -> Self {
        SessionRunner {
            provider,
            sim,
            templates: Templates::builtin(),
            config,
        }
    }

    pub fn with_templates(mut self, templates: Templates) -> Self {
        self.templates = templates;
        self
    }

    pub fn run(&self, spec: &DesignSpec, policy: LoopPolicy) -> Result<SessionResult, EvoError> {
        let cfg = &self.config;
        cfg.context.validate().map_err(|e| EvoError::Config(e.to_string()))?;
        let plan = build_execution_plan_with(
            spec,
            &analyze_complexity(spec),
            &evaluate_assets(spec),
            policy,
            &cfg.planner,
        );
        plan.validate().map_err(|e| EvoError::Config(e.to_string()))?;
        let ctx = init_context(spec, cfg.context).map_err(|e| EvoError::Config(e.to_string()))?;

        let mut transcript = Transcript::new();
        transcript.push(TranscriptRecord::Spec { spec: spec.clone() });
        transcript.push(TranscriptRecord::Plan { plan: plan.clone() });
        transcript.push(TranscriptRecord::ContextConfig { config: cfg.context });

        let mut d = Driver {
            spec,
            policy,
            plan: &plan,
            generation_plan: generation_plan(&plan, policy),
            agents: Agents::new(self.provider, &self.templates, cfg.generation),
            sim: self.sim,
            session_id: cfg
                .session_id
                .clone()
                .unwrap_or_else(|| format!("{}-{}", spec.spec_id, policy.name())),
            turn_max_bytes: cfg.turn_max_bytes,
            state: SessionState::new(ctx),
            transcript,
            iterations: Vec::new(),
            round: 1,
            round_tokens: TokenCount::ZERO,
            last_sim: None,
            last_sim_revisions: None,
        };

        let (status, error) = match d.drive() {
            Ok(status) => (status, None),
            Err(Failure::Sim(e)) => return Err(EvoError::Sim(e)),
            Err(Failure::Context(e)) => (OutcomeStatus::BudgetExhausted, Some(e.to_string())),
            Err(Failure::Gateway(e)) => {
                let compiled = d.last_sim.as_ref().is_some_and(|s| s.compile_ok);
                let status = if compiled {
                    OutcomeStatus::FuncFail
                } else {
                    OutcomeStatus::CompileFail
                };
                (status, Some(e.to_string()))
            }
        };
        d.transcript.push(TranscriptRecord::Outcome {
            status,
            error: error.clone(),
        });

        let golden = match (status, &d.state.current_model, &d.state.current_tb) {
            (OutcomeStatus::Success, Some(m), Some(t)) => Some(GoldenPair {
                model: m.clone(),
                testbench: t.clone(),
            }),
            _ => None,
        };
        let token_ledger = replay_ledger(&d.transcript).map_err(|e| EvoError::Config(e.to_string()))?;
        let outcome = SessionOutcome {
            spec_id: spec.spec_id.clone(),
            status,
            golden,
            iterations: d.iterations,
            token_ledger,
            mode: policy,
            error,
        };
        d.state.phase = Phase::Done;
        Ok(SessionResult {
            outcome,
            transcript: d.transcript,
            plan: plan.clone(),
            final_sim: d.last_sim,
        })
    }
}

/// Naive sessions generate in one shot: decomposition steps are dropped
/// from the prompts (the plan itself still lists them and carries the
/// conflict flag).
fn generation_plan(plan: &ExecutionPlan, policy: LoopPolicy) -> ExecutionPlan {
    let mut p = plan.clone();
    if policy.name() == PolicyName::Naive {
        p.tasks.retain(|t| t.step_id == "generate_model" || t.step_id == "generate_testbench");
        for t in &mut p.tasks {
            t.depends_on.clear();
        }
    }
    p
}

fn truncate_turn(mut s: String, max: usize) -> String {
    if s.len() > max {
        let mut at = max;
        while !s.is_char_boundary(at) {
            at -= 1;
        }
        s.truncate(at);
        s.push_str("\n[truncated]");
    }
    s
}

fn generation_turn(a: &Artifact) -> String {
    format!("{} revision {}\n```\n{}```", a.filename, a.revision, a.content)
}

impl Driver<'_> {
    fn push_turn(&mut self, role: AgentRole, content: String) -> Result<(), ContextError> {
        let content = truncate_turn(content, self.turn_max_bytes);
        let turn = Turn::new(self.state.ctx.next_index(), role, content);
        self.state.ctx = self.state.ctx.append_turn(turn.clone())?;
        self.transcript.push(TranscriptRecord::Turn { turn });
        Ok(())
    }

    fn record_calls(&mut self, calls: &[CallRecord]) {
        for call in calls {
            self.round_tokens += call.total();
            self.state.tokens_spent += call.total();
            self.transcript.push(TranscriptRecord::Call {
                round: self.round,
                call: *call,
            });
        }
    }

    fn accept_generation(&mut self, g: Generation) -> Result<Artifact, ContextError> {
        self.record_calls(&g.calls);
        let role = match g.artifact.kind {
            ArtifactKind::ReferenceModel => AgentRole::Modeler,
            ArtifactKind::Testbench => AgentRole::Verifier,
        };
        self.push_turn(role, generation_turn(&g.artifact))?;
        Ok(g.artifact)
    }

    fn reused_artifact(&self, kind: ArtifactKind, filename: &str) -> Option<Artifact> {
        let r = self.plan.reused(kind)?;
        let asset = self.spec.legacy_assets.iter().find(|a| a.path == r.path)?;
        Some(Artifact::initial(kind, filename, asset.content.clone()))
    }

    /// Initial pair: reused assets where the plan says so, the rest generated
    /// concurrently from the same context snapshot.
    fn initial_pair(&mut self) -> Result<(), Failure> {
        self.state.phase = Phase::Generating;
        let reused_model = self.reused_artifact(ArtifactKind::ReferenceModel, MODEL_FILENAME);
        let reused_tb = self.reused_artifact(ArtifactKind::Testbench, TB_FILENAME);
        let (agents, ctx, spec, plan) = (&self.agents, &self.state.ctx, self.spec, &self.generation_plan);
        let (gm, gt) = std::thread::scope(|s| {
            let m = reused_model
                .is_none()
                .then(|| s.spawn(|| agents.generate_model(ctx, spec, plan, None)));
            let t = reused_tb
                .is_none()
                .then(|| s.spawn(|| agents.generate_testbench(ctx, spec, plan, None, &self.policy)));
            let join = |h: std::thread::ScopedJoinHandle<'_, Result<Generation, GatewayError>>| {
                h.join().expect("generation thread panicked")
            };
            (m.map(join), t.map(join))
        });
        let model = match (reused_model, gm) {
            (Some(a), _) => a,
            (None, Some(g)) => self.accept_generation(g?)?,
            (None, None) => unreachable!("model is either reused or generated"),
        };
        let tb = match (reused_tb, gt) {
            (Some(a), _) => a,
            (None, Some(g)) => self.accept_generation(g?)?,
            (None, None) => unreachable!("testbench is either reused or generated"),
        };
        self.state.current_model = Some(model);
        self.state.current_tb = Some(tb);
        Ok(())
    }

    fn simulate(&mut self) -> Result<SimReport, Failure> {
        self.state.phase = Phase::Simulating;
        let model = self.state.current_model.as_ref().expect("model present");
        let tb = self.state.current_tb.as_ref().expect("testbench present");
        let revisions = (model.revision, tb.revision);
        let report = match &self.last_sim {
            Some(prev) if self.last_sim_revisions == Some(revisions) => prev.clone(),
            _ => self.sim.simulate(&self.session_id, model, tb)?,
        };
        self.last_sim_revisions = Some(revisions);
        self.transcript.push(TranscriptRecord::Sim {
            round: self.round,
            model_revision: model.revision,
            tb_revision: tb.revision,
            report: report.without_timing(),
        });
        let text = format!(
            "simulation of {} r{} with {} r{}\n{}",
            model.filename,
            model.revision,
            tb.filename,
            tb.revision,
            describe_sim(&report)
        );
        self.last_sim = Some(report.clone());
        self.push_turn(AgentRole::Tool, text)?;
        Ok(report)
    }

    fn finish_round(&mut self, path: Option<crate::session::RoutingPath>, blocked: bool, report: &SimReport) {
        let model = self.state.current_model.as_ref().expect("model present");
        let tb = self.state.current_tb.as_ref().expect("testbench present");
        self.iterations.push(IterationRecord {
            iteration: self.round,
            verdict_path: path,
            blocked,
            signatures: signature_counts(report),
            tokens_spent: self.round_tokens,
            artifact_revisions: (model.revision, tb.revision),
        });
        self.round += 1;
        self.round_tokens = TokenCount::ZERO;
    }

    fn drive(&mut self) -> Result<OutcomeStatus, Failure> {
        self.initial_pair()?;
        let mut previous_model: Option<Artifact> = None;
        let mut previous_tb: Option<Artifact> = None;
        loop {
            let report = self.simulate()?;

            if !self.policy.allow_iteration() {
                self.finish_round(None, false, &report);
                self.state.phase = Phase::Done;
                return Ok(if report.passed() {
                    OutcomeStatus::Success
                } else if report.compile_ok {
                    OutcomeStatus::FuncFail
                } else {
                    OutcomeStatus::CompileFail
                });
            }

            self.state.phase = Phase::Arbitrating;
            let model = self.state.current_model.clone().expect("model present");
            let tb = self.state.current_tb.clone().expect("testbench present");
            let arb = self.agents.arbitrate(
                &self.state.ctx,
                self.spec,
                &report,
                &ArtifactContext {
                    model: &model,
                    tb: &tb,
                    previous_model: previous_model.as_ref(),
                    previous_tb: previous_tb.as_ref(),
                },
            )?;
            self.record_calls(&arb.calls);
            self.transcript.push(TranscriptRecord::Verdict {
                round: self.round,
                verdict: arb.verdict.clone(),
                prefiltered: arb.prefiltered,
            });
            self.push_turn(AgentRole::Arbiter, arb.verdict.turn_text())?;

            let decision = route(&arb.verdict, &self.state, &self.policy);
            self.transcript.push(TranscriptRecord::Route {
                round: self.round,
                path: arb.verdict.path,
                blocked: decision.blocked(),
            });
            self.finish_round(Some(arb.verdict.path), decision.blocked(), &report);
            self.state.apply_route(arb.verdict, decision);

            match check_termination(&self.state, self.plan) {
                Termination::StopSuccess => {
                    self.state.phase = Phase::Done;
                    return Ok(OutcomeStatus::Success);
                }
                Termination::StopBudget => {
                    self.state.phase = Phase::Done;
                    return Ok(if self.state.iteration < self.plan.max_iterations {
                        OutcomeStatus::BudgetExhausted
                    } else if report.compile_ok {
                        OutcomeStatus::FuncFail
                    } else {
                        OutcomeStatus::CompileFail
                    });
                }
                Termination::Continue => {}
            }

            match decision.dispatch {
                Dispatch::RegenerateModel => {
                    let g = self
                        .agents
                        .generate_model(&self.state.ctx, self.spec, &self.generation_plan, Some(&model))?;
                    let next = self.accept_generation(g)?;
                    previous_model = Some(model);
                    previous_tb = None;
                    self.state.current_model = Some(next);
                }
                Dispatch::RegenerateTestbench => {
                    let g = self.agents.generate_testbench(
                        &self.state.ctx,
                        self.spec,
                        &self.generation_plan,
                        Some(&tb),
                        &self.policy,
                    )?;
                    let next = self.accept_generation(g)?;
                    previous_tb = Some(tb);
                    previous_model = None;
                    self.state.current_tb = Some(next);
                }
                Dispatch::Blocked => {
                    previous_model = None;
                    previous_tb = None;
                }
                Dispatch::Finalize => unreachable!("success stops the loop"),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTokens {
    pub spent: TokenCount,
    pub anchored_total: TokenCount,
    pub baseline_total: TokenCount,
    pub reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenPaths {
    pub model: String,
    pub testbench: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec_id: String,
    pub status: OutcomeStatus,
    pub iterations: usize,
    pub golden: Option<GoldenPaths>,
    pub tokens: ManifestTokens,
    pub mode: PolicyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    pub fn of(outcome: &SessionOutcome) -> Self {
        let ledger: &TokenLedger = &outcome.token_ledger;
        Manifest {
            spec_id: outcome.spec_id.clone(),
            status: outcome.status,
            iterations: outcome.iterations.len(),
            golden: outcome.golden.as_ref().map(|g| GoldenPaths {
                model: format!("golden/{}", g.model.filename),
                testbench: format!("golden/{}", g.testbench.filename),
            }),
            tokens: ManifestTokens {
                spent: outcome.iterations.iter().map(|i| i.tokens_spent).sum(),
                anchored_total: ledger.anchored_total,
                baseline_total: ledger.baseline_total,
                reduction_pct: ledger.reduction_pct,
            },
            mode: outcome.mode.name(),
            error: outcome.error.clone(),
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// Writes `manifest.json`, `transcript.jsonl`, `outcome.json`, the plan,
/// the final simulation report and, on success, `golden/`. `config` is the
/// effective configuration echoed as `config.json`.
pub fn write_outputs(
    result: &SessionResult,
    dir: &Path,
    config: Option<&serde_json::Value>,
) -> Result<Manifest, EvoError> {
    std::fs::create_dir_all(dir)?;
    let manifest = Manifest::of(&result.outcome);
    write_json(&dir.join("manifest.json"), &manifest)?;
    write_json(&dir.join("outcome.json"), &result.outcome)?;
    write_json(&dir.join("plan.json"), &result.plan)?;
    result.transcript.save(&dir.join("transcript.jsonl")).map_err(|e| match e {
        crate::session::transcript::TranscriptError::Io(io) => EvoError::Io(io),
        other => EvoError::Config(other.to_string()),
    })?;
    if let Some(sim) = &result.final_sim {
        write_json(&dir.join("final_sim.json"), sim)?;
    }
    if let Some(cfg) = config {
        write_json(&dir.join("config.json"), cfg)?;
    }
    if let Some(g) = &result.outcome.golden {
        let golden: PathBuf = dir.join("golden");
        std::fs::create_dir_all(&golden)?;
        std::fs::write(golden.join(&g.model.filename), &g.model.content)?;
        std::fs::write(golden.join(&g.testbench.filename), &g.testbench.content)?;
    }
    Ok(manifest)
}
