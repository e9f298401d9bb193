use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use similar::TextDiff;

use super::verdict::{parse_verdict, VERDICT_SCHEMA_REMINDER};
use super::{ArbiterVerdict, CompletionRequest, GatewayError, Provider, TargetAgent, Templates};
use crate::context::{estimate_tokens, ContextWindow, TokenCount};
use crate::planner::ExecutionPlan;
use crate::session::{AgentRole, Artifact, ArtifactKind, DesignSpec, LoopPolicy, Producer, RoutingPath};
use crate::sim::{SignatureKind, SimReport};

pub const MODEL_FILENAME: &str = "dut.cpp";
pub const TB_FILENAME: &str = "tb.cpp";

/// Logs longer than this are cut to their tail in arbiter prompts.
const LOG_TAIL_BYTES: usize = 6000;
const DIFF_MAX_BYTES: usize = 4000;

const STRICT_FENCE_REMINDER: &str = "\n\n=== FORMAT REMINDER ===\n\
Your previous reply contained more than one fenced code block. Reply again with EXACTLY ONE \
fenced code block holding the complete file, and no other code blocks.\n";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    pub max_output_tokens: u32,
    pub arbiter_max_output_tokens: u32,
    pub temperature: f64,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            max_output_tokens: 8192,
            arbiter_max_output_tokens: 1024,
            temperature: 0.2,
        }
    }
}

/// Token estimate of one provider call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub role: AgentRole,
    pub prompt_tokens: TokenCount,
    pub response_tokens: TokenCount,
}

impl CallRecord {
    pub fn total(&self) -> TokenCount {
        self.prompt_tokens + self.response_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub artifact: Artifact,
    pub calls: Vec<CallRecord>,
    /// Raw text of the accepted reply.
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arbitration {
    pub verdict: ArbiterVerdict,
    pub calls: Vec<CallRecord>,
    /// True when the compile-failure pre-filter decided without a provider call.
    pub prefiltered: bool,
}

/// Current artifact pair plus the revisions they replaced, if any.
#[derive(Debug, Clone, Copy)]
pub struct ArtifactContext<'a> {
    pub model: &'a Artifact,
    pub tb: &'a Artifact,
    pub previous_model: Option<&'a Artifact>,
    pub previous_tb: Option<&'a Artifact>,
}

pub(crate) struct Block<'a> {
    pub start: usize,
    pub end: usize,
    pub body: &'a str,
}

pub(crate) enum Fence<'a> {
    Blocks(Vec<Block<'a>>),
    Unclosed,
}

/// Splits `text` into triple-backtick fenced blocks. Fences must start a
/// line; the opening fence may carry a language tag.
pub(crate) fn fenced_blocks(text: &str) -> Fence<'_> {
    let mut blocks = Vec::new();
    let mut open: Option<(usize, usize)> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len();
        let trimmed = line.trim();
        if !trimmed.starts_with("```") {
            continue;
        }
        match open {
            None => open = Some((start, offset)),
            Some((block_start, body_start)) if trimmed == "```" => {
                let body = &text[body_start..start];
                blocks.push(Block {
                    start: block_start,
                    end: offset,
                    body: body.strip_suffix('\n').unwrap_or(body),
                });
                open = None;
            }
            Some(_) => {}
        }
    }
    if open.is_some() {
        Fence::Unclosed
    } else {
        Fence::Blocks(blocks)
    }
}

/// The single fenced code block of `response`, with a trailing newline.
pub fn extract_code_block(response: &str) -> Result<String, GatewayError> {
    match fenced_blocks(response) {
        Fence::Unclosed => Err(GatewayError::NoCodeBlockInResponse),
        Fence::Blocks(b) if b.is_empty() => Err(GatewayError::NoCodeBlockInResponse),
        Fence::Blocks(b) if b.len() > 1 => Err(GatewayError::MultipleCodeBlocks(b.len())),
        Fence::Blocks(b) => {
            let mut body = b[0].body.to_owned();
            if !body.ends_with('\n') {
                body.push('\n');
            }
            Ok(body)
        }
    }
}

fn constraint_list(spec: &DesignSpec) -> String {
    if spec.constraints.is_empty() {
        return "(none marked)\n".into();
    }
    spec.constraints
        .iter()
        .map(|c| format!("{} [{}]: {}\n", c.id, c.category.as_str(), c.text))
        .collect()
}

fn tail(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut at = s.len() - max;
    while !s.is_char_boundary(at) {
        at += 1;
    }
    &s[at..]
}

/// Deterministic text form of a report as the arbiter sees it. Timing and
/// build paths are left out.
pub(crate) fn describe_sim(sim: &SimReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "compile_ok: {}", sim.compile_ok);
    if let Some(ok) = sim.run_ok {
        let _ = writeln!(s, "run_ok: {ok}");
    }
    if let Some(code) = sim.exit_code {
        let _ = writeln!(s, "exit_code: {code}");
    }
    if sim.signatures.is_empty() {
        s.push_str("signatures: none\n");
    } else {
        s.push_str("signatures:\n");
        for sig in &sim.signatures {
            let line = sig.line.map(|l| format!(":{l}")).unwrap_or_default();
            let _ = writeln!(s, "- {} {}{}: {}", sig.kind.as_str(), sig.file, line, sig.message);
        }
    }
    let (label, log) = match &sim.run_log {
        Some(run) => ("run log", run.as_str()),
        None => ("compile log", sim.compile_log.as_str()),
    };
    let _ = write!(s, "{label}:\n{}", tail(log, LOG_TAIL_BYTES));
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn describe_artifacts(a: &ArtifactContext<'_>) -> String {
    let mut s = String::new();
    for (cur, prev) in [(a.model, a.previous_model), (a.tb, a.previous_tb)] {
        let _ = writeln!(s, "{} revision {} sha256 {}", cur.filename, cur.revision, cur.digest());
        match prev {
            Some(p) if p.content != cur.content => {
                let diff = TextDiff::from_lines(&p.content, &cur.content)
                    .unified_diff()
                    .context_radius(2)
                    .header(
                        &format!("{}@r{}", p.filename, p.revision),
                        &format!("{}@r{}", cur.filename, cur.revision),
                    )
                    .to_string();
                let diff = if diff.len() > DIFF_MAX_BYTES {
                    format!("{}\n... diff truncated ...\n", &diff[..floor_boundary(&diff, DIFF_MAX_BYTES)])
                } else {
                    diff
                };
                s.push_str(&diff);
            }
            Some(_) => s.push_str("(unchanged since previous revision)\n"),
            None => s.push_str("(initial revision)\n"),
        }
    }
    s
}

fn floor_boundary(s: &str, mut at: usize) -> usize {
    while !s.is_char_boundary(at) {
        at -= 1;
    }
    at
}

/// The generating and judging agents bound to one provider.
pub struct Agents<'a> {
    provider: &'a dyn Provider,
    templates: &'a Templates,
    settings: GenerationSettings,
}

impl<'a> Agents<'a> {
    pub fn new(provider: &'a dyn Provider, templates: &'a Templates, settings: GenerationSettings) -> Self {
        Agents {
            provider,
            templates,
            settings,
        }
    }

    fn base_values(&self, ctx: &ContextWindow, spec: &DesignSpec) -> BTreeMap<&'static str, String> {
        let mut v = BTreeMap::new();
        v.insert("anchor", ctx.anchor().to_owned());
        v.insert("constraints", constraint_list(spec));
        v.insert("summary", or_none(ctx.summary_block()));
        v.insert("workspace", or_none(ctx.workspace_block()));
        v
    }

    fn call(
        &self,
        role: AgentRole,
        prompt: String,
        max_output_tokens: u32,
        evidence: Option<String>,
        calls: &mut Vec<CallRecord>,
    ) -> Result<String, GatewayError> {
        let req = CompletionRequest {
            prompt,
            role,
            max_output_tokens,
            temperature_hint: self.settings.temperature,
            evidence,
        };
        let response = self.provider.complete(&req)?;
        calls.push(CallRecord {
            role,
            prompt_tokens: estimate_tokens(&req.prompt),
            response_tokens: estimate_tokens(&response),
        });
        Ok(response)
    }

    fn generate(
        &self,
        kind: ArtifactKind,
        ctx: &ContextWindow,
        spec: &DesignSpec,
        plan: &ExecutionPlan,
        previous: Option<&Artifact>,
    ) -> Result<Generation, GatewayError> {
        let (role, producer, filename, task_name) = match kind {
            ArtifactKind::ReferenceModel => (AgentRole::Modeler, Producer::Modeler, MODEL_FILENAME, "modeler"),
            ArtifactKind::Testbench => (AgentRole::Verifier, Producer::Verifier, TB_FILENAME, "verifier"),
        };
        if previous.is_none() && !plan.has_task_for(producer) {
            return Err(GatewayError::MissingTask(task_name));
        }
        let mut values = self.base_values(ctx, spec);
        let tasks: String = plan
            .tasks_for(producer)
            .map(|t| format!("- {}: {}\n", t.step_id, t.description))
            .collect();
        values.insert("tasks", or_none(tasks));
        values.insert("filename", previous.map_or(filename, |p| p.filename.as_str()).to_owned());
        values.insert(
            "previous",
            previous.map_or_else(|| "(none yet)\n".to_owned(), |p| p.content.clone()),
        );
        let prompt = self.templates.render(role, &values).map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;

        let mut calls = Vec::new();
        let mut response = self.call(role, prompt.clone(), self.settings.max_output_tokens, None, &mut calls)?;
        let content = match extract_code_block(&response) {
            Err(GatewayError::MultipleCodeBlocks(_)) => {
                let strict = format!("{prompt}{STRICT_FENCE_REMINDER}");
                response = self.call(role, strict, self.settings.max_output_tokens, None, &mut calls)?;
                extract_code_block(&response)?
            }
            other => other?,
        };
        let artifact = match previous {
            Some(p) => p.regenerate(content),
            None => Artifact::initial(kind, filename, content),
        };
        Ok(Generation {
            artifact,
            calls,
            response,
        })
    }

    /// Generates the reference model, or its next revision when `previous`
    /// is given.
    pub fn generate_model(
        &self,
        ctx: &ContextWindow,
        spec: &DesignSpec,
        plan: &ExecutionPlan,
        previous: Option<&Artifact>,
    ) -> Result<Generation, GatewayError> {
        self.generate(ArtifactKind::ReferenceModel, ctx, spec, plan, previous)
    }

    /// Generates the testbench. Regeneration is refused when `policy`
    /// freezes the testbench.
    pub fn generate_testbench(
        &self,
        ctx: &ContextWindow,
        spec: &DesignSpec,
        plan: &ExecutionPlan,
        previous: Option<&Artifact>,
        policy: &LoopPolicy,
    ) -> Result<Generation, GatewayError> {
        if let Some(p) = previous {
            if !policy.allow_tb_modification() {
                return Err(GatewayError::PolicyViolation(format!(
                    "{} policy forbids modifying testbench revision {}",
                    policy.name(),
                    p.revision
                )));
            }
        }
        self.generate(ArtifactKind::Testbench, ctx, spec, plan, previous)
    }

    /// Routes a completed simulation. Compile failures are decided from the
    /// error signatures without a provider call; otherwise the arbiter's
    /// JSON verdict is parsed, with one reprompt on a malformed reply.
    pub fn arbitrate(
        &self,
        ctx: &ContextWindow,
        spec: &DesignSpec,
        sim: &SimReport,
        artifacts: &ArtifactContext<'_>,
    ) -> Result<Arbitration, GatewayError> {
        if !sim.is_complete() {
            return Err(GatewayError::IncompleteSimReport);
        }
        if !sim.compile_ok {
            return Ok(Arbitration {
                verdict: prefilter_verdict(sim, artifacts),
                calls: Vec::new(),
                prefiltered: true,
            });
        }

        let report = describe_sim(sim);
        let mut values = self.base_values(ctx, spec);
        values.insert("artifacts", describe_artifacts(artifacts));
        values.insert("sim_report", report.clone());
        let prompt = self
            .templates
            .render(AgentRole::Arbiter, &values)
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;

        let max = self.settings.arbiter_max_output_tokens;
        let mut calls = Vec::new();
        let first = self.call(AgentRole::Arbiter, prompt.clone(), max, Some(report.clone()), &mut calls)?;
        let verdict = match parse_verdict(&first, spec) {
            Err(GatewayError::VerdictParseError(_)) => {
                let retry = format!("{prompt}{VERDICT_SCHEMA_REMINDER}");
                let second = self.call(AgentRole::Arbiter, retry, max, Some(report), &mut calls)?;
                parse_verdict(&second, spec)?
            }
            other => other?,
        };
        if verdict.path == RoutingPath::Success && !sim.passed() {
            return Err(GatewayError::InconsistentVerdict(
                "success verdict on a failing simulation".into(),
            ));
        }
        Ok(Arbitration {
            verdict,
            calls,
            prefiltered: false,
        })
    }
}

fn or_none(s: String) -> String {
    if s.is_empty() {
        "(empty)\n".into()
    } else {
        s
    }
}

/// Syntax-repair verdict for a failed compile: the first signature naming
/// one of the two artifacts decides the target; the modeler by default.
fn prefilter_verdict(sim: &SimReport, a: &ArtifactContext<'_>) -> ArbiterVerdict {
    let target = sim
        .signatures
        .iter()
        .find_map(|s| {
            if s.file == a.model.filename {
                Some(TargetAgent::Modeler)
            } else if s.file == a.tb.filename {
                Some(TargetAgent::Verifier)
            } else {
                None
            }
        })
        .unwrap_or(TargetAgent::Modeler);
    let defect_summary = sim
        .signatures
        .iter()
        .filter(|s| matches!(s.kind, SignatureKind::CompileError | SignatureKind::LinkError | SignatureKind::Timeout))
        .map(|s| s.message.as_str())
        .chain(sim.signatures.iter().map(|s| s.message.as_str()))
        .next()
        .unwrap_or("compilation failed")
        .to_owned();
    ArbiterVerdict {
        path: RoutingPath::SyntaxRepair,
        target_agent: target,
        defect_summary,
        violated_constraints: Vec::new(),
        confidence_note: "pre-filter: compilation failed".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_block_extraction() {
        assert_eq!(extract_code_block("x\n```cpp\nint a;\n```\ny").unwrap(), "int a;\n");
        assert_eq!(extract_code_block("```\n```\n").unwrap(), "\n");
        assert_eq!(extract_code_block("prose only"), Err(GatewayError::NoCodeBlockInResponse));
        assert_eq!(extract_code_block("```cpp\nint a;\n"), Err(GatewayError::NoCodeBlockInResponse));
        assert_eq!(
            extract_code_block("```\na\n```\n```\nb\n```"),
            Err(GatewayError::MultipleCodeBlocks(2))
        );
    }

    #[test]
    fn inner_backticks_do_not_close() {
        let r = "```cpp\nauto s = \"```x\";\nint b;\n```\n";
        assert_eq!(extract_code_block(r).unwrap(), "auto s = \"```x\";\nint b;\n");
    }
}
