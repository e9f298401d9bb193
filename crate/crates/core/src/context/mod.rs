//! Spec-anchored prompt memory.
//!
//! The window has three segments: the specification body pinned verbatim as
//! an immutable anchor, a compressed summary of older turns, and a workspace
//! holding the most recent turns. Operations are copy-on-write: each returns
//! a new window and leaves the receiver untouched.

mod baseline;
mod compress;

use std::fmt::Write as _;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{digest, AgentRole, DesignSpec, RoutingPath};

pub use baseline::{baseline_render, BaselineRender};
pub use compress::{verdict_tally, Compressor, ExtractiveCompressor};

/// Estimated token count: `ceil(utf8_bytes / 4)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenCount(pub u64);

impl TokenCount {
    pub const ZERO: TokenCount = TokenCount(0);

    pub fn value(self) -> u64 {
        self.0
    }

    /// Largest byte length whose estimate does not exceed this count.
    pub fn byte_capacity(self) -> usize {
        (self.0 as usize).saturating_mul(4)
    }
}

impl Add for TokenCount {
    type Output = TokenCount;
    fn add(self, rhs: TokenCount) -> TokenCount {
        TokenCount(self.0 + rhs.0)
    }
}

impl AddAssign for TokenCount {
    fn add_assign(&mut self, rhs: TokenCount) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for TokenCount {
    fn sum<I: Iterator<Item = TokenCount>>(iter: I) -> TokenCount {
        iter.fold(TokenCount::ZERO, Add::add)
    }
}

impl std::fmt::Display for TokenCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

pub fn estimate_tokens(text: &str) -> TokenCount {
    TokenCount((text.len() as u64).div_ceil(4))
}

/// One round of interaction history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub index: u64,
    pub role: AgentRole,
    pub content: String,
}

impl Turn {
    pub fn new(index: u64, role: AgentRole, content: impl Into<String>) -> Self {
        Turn {
            index,
            role,
            content: content.into(),
        }
    }

    pub fn tokens(&self) -> TokenCount {
        estimate_tokens(&self.content)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRange {
    pub first: u64,
    pub last: u64,
}

/// Number of arbiter verdicts seen per routing path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictTally {
    pub syntax_repair: u32,
    pub design_refinement: u32,
    pub tb_realignment: u32,
    pub success: u32,
}

impl VerdictTally {
    pub fn record(&mut self, path: RoutingPath) {
        match path {
            RoutingPath::SyntaxRepair => self.syntax_repair += 1,
            RoutingPath::DesignRefinement => self.design_refinement += 1,
            RoutingPath::TbRealignment => self.tb_realignment += 1,
            RoutingPath::Success => self.success += 1,
        }
    }

    pub fn merged(self, other: VerdictTally) -> VerdictTally {
        VerdictTally {
            syntax_repair: self.syntax_repair + other.syntax_repair,
            design_refinement: self.design_refinement + other.design_refinement,
            tb_realignment: self.tb_realignment + other.tb_realignment,
            success: self.success + other.success,
        }
    }
}

/// Compressed record of one or more evicted turns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub turn_range: TurnRange,
    pub text: String,
    pub verdicts: VerdictTally,
    /// True once the entry is a merge of several entries in the fixed
    /// coarse template.
    pub coarse: bool,
}

impl SummaryEntry {
    pub fn tokens(&self) -> TokenCount {
        estimate_tokens(&self.text)
    }

    fn coarse_merge(first: &SummaryEntry, second: Option<&SummaryEntry>) -> SummaryEntry {
        let (last, verdicts) = match second {
            Some(s) => (s.turn_range.last, first.verdicts.merged(s.verdicts)),
            None => (first.turn_range.last, first.verdicts),
        };
        let range = TurnRange {
            first: first.turn_range.first,
            last,
        };
        SummaryEntry {
            text: format!(
                "rounds {}..{}: syntax_repair={} design_refinement={} tb_realignment={} success={}",
                range.first,
                range.last,
                verdicts.syntax_repair,
                verdicts.design_refinement,
                verdicts.tb_realignment,
                verdicts.success
            ),
            turn_range: range,
            verdicts,
            coarse: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub total: TokenCount,
    pub summary_max: TokenCount,
    pub workspace_max: TokenCount,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressorKind {
    #[default]
    Extractive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextConfig {
    pub budgets: Budgets,
    /// Number of most recent turns kept verbatim in the workspace.
    pub workspace_turns: usize,
    /// Per-entry cap applied by the compressor.
    pub summary_line_max: TokenCount,
    #[serde(default)]
    pub compressor: CompressorKind,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            budgets: Budgets {
                total: TokenCount(32_000),
                summary_max: TokenCount(2_000),
                workspace_max: TokenCount(12_000),
            },
            workspace_turns: 6,
            summary_line_max: TokenCount(40),
            compressor: CompressorKind::Extractive,
        }
    }
}

impl ContextConfig {
    pub fn validate(&self) -> Result<(), ContextError> {
        if self.workspace_turns == 0 {
            return Err(ContextError::InvalidConfig("workspace_turns must be at least 1".into()));
        }
        if self.summary_line_max == TokenCount::ZERO {
            return Err(ContextError::InvalidConfig("summary_line_max must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("specification needs {spec} tokens but the total budget is {total}")]
    SpecExceedsBudget { spec: TokenCount, total: TokenCount },
    #[error("turn index {got} does not follow {expected}")]
    NonMonotonicTurnIndex { expected: u64, got: u64 },
    #[error("{segment} needs {needed} tokens after compaction but its budget is {budget}")]
    BudgetUnsatisfiable {
        segment: &'static str,
        needed: TokenCount,
        budget: TokenCount,
    },
    #[error("invalid context configuration: {0}")]
    InvalidConfig(String),
    #[error("anchor digest does not match anchor text")]
    AnchorDigestMismatch,
}

/// Per-segment token counts of a window or rendered prompt.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentTokens {
    pub anchor: TokenCount,
    pub summary: TokenCount,
    pub workspace: TokenCount,
    /// Headers and the role instruction footer; zero for bare window counts.
    pub footer: TokenCount,
}

impl SegmentTokens {
    pub fn content(&self) -> TokenCount {
        self.anchor + self.summary + self.workspace
    }

    pub fn total(&self) -> TokenCount {
        self.content() + self.footer
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub text: String,
    pub tokens: SegmentTokens,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ContextWindowRepr")]
pub struct ContextWindow {
    anchor: String,
    anchor_digest: String,
    summary: Vec<SummaryEntry>,
    workspace: Vec<Turn>,
    config: ContextConfig,
    next_index: u64,
}

#[derive(Deserialize)]
struct ContextWindowRepr {
    anchor: String,
    anchor_digest: String,
    summary: Vec<SummaryEntry>,
    workspace: Vec<Turn>,
    config: ContextConfig,
    next_index: u64,
}

impl TryFrom<ContextWindowRepr> for ContextWindow {
    type Error = ContextError;

    fn try_from(r: ContextWindowRepr) -> Result<Self, Self::Error> {
        if digest(&r.anchor) != r.anchor_digest {
            return Err(ContextError::AnchorDigestMismatch);
        }
        Ok(ContextWindow {
            anchor: r.anchor,
            anchor_digest: r.anchor_digest,
            summary: r.summary,
            workspace: r.workspace,
            config: r.config,
            next_index: r.next_index,
        })
    }
}

/// Pins `spec.body` as the anchor of a fresh window.
pub fn init_context(spec: &DesignSpec, config: ContextConfig) -> Result<ContextWindow, ContextError> {
    config.validate()?;
    let spec_tokens = estimate_tokens(&spec.body);
    if spec_tokens > config.budgets.total {
        return Err(ContextError::SpecExceedsBudget {
            spec: spec_tokens,
            total: config.budgets.total,
        });
    }
    Ok(ContextWindow {
        anchor_digest: digest(&spec.body),
        anchor: spec.body.clone(),
        summary: Vec::new(),
        workspace: Vec::new(),
        config,
        next_index: 0,
    })
}

impl ContextWindow {
    pub fn anchor(&self) -> &str {
        &self.anchor
    }

    pub fn anchor_digest(&self) -> &str {
        &self.anchor_digest
    }

    pub fn summary(&self) -> &[SummaryEntry] {
        &self.summary
    }

    pub fn workspace(&self) -> &[Turn] {
        &self.workspace
    }

    pub fn config(&self) -> &ContextConfig {
        &self.config
    }

    /// Index the next appended turn must carry.
    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    pub fn segment_tokens(&self) -> SegmentTokens {
        SegmentTokens {
            anchor: estimate_tokens(&self.anchor),
            summary: self.summary.iter().map(SummaryEntry::tokens).sum(),
            workspace: self.workspace.iter().map(Turn::tokens).sum(),
            footer: TokenCount::ZERO,
        }
    }

    pub fn total_tokens(&self) -> TokenCount {
        self.segment_tokens().content()
    }

    fn needs_compaction(&self) -> bool {
        let seg = self.segment_tokens();
        let budgets = &self.config.budgets;
        self.workspace.len() > self.config.workspace_turns
            || seg.workspace > budgets.workspace_max
            || seg.summary > budgets.summary_max
            || seg.content() > budgets.total
    }

    /// Appends `turn` to the workspace, compacting when the workspace holds
    /// more than K turns or any budget is exceeded.
    pub fn append_turn(&self, turn: Turn) -> Result<ContextWindow, ContextError> {
        if turn.index != self.next_index {
            return Err(ContextError::NonMonotonicTurnIndex {
                expected: self.next_index,
                got: turn.index,
            });
        }
        let mut next = self.clone();
        next.next_index = turn.index + 1;
        next.workspace.push(turn);
        if next.needs_compaction() {
            next.compact()
        } else {
            Ok(next)
        }
    }

    /// Appends a turn carrying the next index.
    pub fn push(&self, role: AgentRole, content: impl Into<String>) -> Result<ContextWindow, ContextError> {
        self.append_turn(Turn::new(self.next_index, role, content))
    }

    /// Compacts with the configured compressor.
    pub fn compact(&self) -> Result<ContextWindow, ContextError> {
        match self.config.compressor {
            CompressorKind::Extractive => self.compact_with(&ExtractiveCompressor),
        }
    }

    /// Moves turns beyond the K most recent into the summary, then merges the
    /// oldest summary entries into coarse entries until the summary and total
    /// budgets hold. The anchor is never touched.
    pub fn compact_with(&self, compressor: &dyn Compressor) -> Result<ContextWindow, ContextError> {
        let mut next = self.clone();
        let keep = next.config.workspace_turns;
        if next.workspace.len() > keep {
            let evicted: Vec<Turn> = next.workspace.drain(..next.workspace.len() - keep).collect();
            for turn in &evicted {
                next.summary.push(SummaryEntry {
                    turn_range: TurnRange {
                        first: turn.index,
                        last: turn.index,
                    },
                    text: compressor.summarize(turn, next.config.summary_line_max),
                    verdicts: verdict_tally(&turn.content),
                    coarse: false,
                });
            }
        }

        let budgets = next.config.budgets;
        let over = |w: &ContextWindow| {
            let seg = w.segment_tokens();
            seg.summary > budgets.summary_max || seg.content() > budgets.total
        };
        while over(&next) && (next.summary.len() > 1 || next.summary.first().is_some_and(|e| !e.coarse)) {
            let merged = if next.summary.len() > 1 {
                let second = next.summary.remove(1);
                SummaryEntry::coarse_merge(&next.summary[0], Some(&second))
            } else {
                SummaryEntry::coarse_merge(&next.summary[0], None)
            };
            next.summary[0] = merged;
        }

        let seg = next.segment_tokens();
        if seg.summary > budgets.summary_max {
            return Err(ContextError::BudgetUnsatisfiable {
                segment: "summary",
                needed: seg.summary,
                budget: budgets.summary_max,
            });
        }
        if seg.content() > budgets.total {
            return Err(ContextError::BudgetUnsatisfiable {
                segment: "context",
                needed: seg.content(),
                budget: budgets.total,
            });
        }
        Ok(next)
    }

    /// Summary entries, one `[turns a..b] text` line each.
    pub fn summary_block(&self) -> String {
        let mut text = String::new();
        for entry in &self.summary {
            let _ = write!(text, "[turns {}..{}] ", entry.turn_range.first, entry.turn_range.last);
            text.push_str(&entry.text);
            text.push('\n');
        }
        text
    }

    /// Workspace turns, each under a `--- turn i (role) ---` header.
    pub fn workspace_block(&self) -> String {
        let mut text = String::new();
        for turn in &self.workspace {
            let _ = writeln!(text, "--- turn {} ({}) ---", turn.index, turn.role);
            text.push_str(&turn.content);
            text.push('\n');
        }
        text
    }

    /// Renders the prompt for `audience`: anchor, summary block, workspace
    /// block, role footer, in that order. Empty blocks are omitted.
    pub fn render(&self, audience: AgentRole) -> RenderedPrompt {
        let mut text = String::with_capacity(self.anchor.len() + 256);
        text.push_str(&self.anchor);
        if !self.summary.is_empty() {
            text.push_str("\n\n=== HISTORY SUMMARY ===\n");
            text.push_str(&self.summary_block());
        }
        if !self.workspace.is_empty() {
            text.push_str("\n\n=== WORKSPACE ===\n");
            text.push_str(&self.workspace_block());
        }
        text.push_str("\n\n");
        text.push_str(&role_footer(audience));

        let content_bytes = self.anchor.len()
            + self.summary.iter().map(|e| e.text.len()).sum::<usize>()
            + self.workspace.iter().map(|t| t.content.len()).sum::<usize>();
        let mut tokens = self.segment_tokens();
        tokens.footer = TokenCount(((text.len() - content_bytes) as u64).div_ceil(4));
        RenderedPrompt { text, tokens }
    }

    pub fn render_prompt(&self, audience: AgentRole) -> String {
        self.render(audience).text
    }
}

/// The fixed instruction block closing every rendered prompt.
pub fn role_footer(role: AgentRole) -> String {
    let instruction = match role {
        AgentRole::Planner => "Decompose the specification above into generation tasks.",
        AgentRole::Modeler => {
            "Produce the reference model satisfying every constraint of the specification above. \
             Reply with exactly one fenced code block."
        }
        AgentRole::Verifier => {
            "Produce a self-checking testbench for the specification above. Report failures with \
             `ASSERT FAIL:` lines. Reply with exactly one fenced code block."
        }
        AgentRole::Arbiter => {
            "Judge the latest simulation against the constraints anchored in the specification \
             above. Reply with a single JSON verdict."
        }
        AgentRole::Tool => "Record the tool output.",
    };
    format!("=== INSTRUCTIONS ({role}) ===\n{instruction}\n")
}

/// Fraction of `spec.constraints` whose text occurs in `text`; 1.0 when the
/// spec has no constraints.
pub fn recall_in(text: &str, spec: &DesignSpec) -> f64 {
    if spec.constraints.is_empty() {
        return 1.0;
    }
    let hits = spec.constraints.iter().filter(|c| text.contains(&c.text)).count();
    hits as f64 / spec.constraints.len() as f64
}

/// Specification recall of the arbiter prompt rendered from `ctx`.
pub fn measure_recall(ctx: &ContextWindow, spec: &DesignSpec) -> f64 {
    recall_in(&ctx.render_prompt(AgentRole::Arbiter), spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{parse_spec, SpecFormat};

    fn spec_of(body: &str) -> DesignSpec {
        parse_spec("t", body, SpecFormat::Plain).unwrap()
    }

    fn config(k: usize, total: u64) -> ContextConfig {
        ContextConfig {
            budgets: Budgets {
                total: TokenCount(total),
                summary_max: TokenCount(total / 4),
                workspace_max: TokenCount(total / 2),
            },
            workspace_turns: k,
            summary_line_max: TokenCount(40),
            compressor: CompressorKind::Extractive,
        }
    }

    #[test]
    fn estimator_formula() {
        assert_eq!(estimate_tokens(""), TokenCount(0));
        assert_eq!(estimate_tokens("abcd"), TokenCount(1));
        assert_eq!(estimate_tokens("abcdefghi"), TokenCount(3));
        // Counts bytes, not chars.
        assert_eq!(estimate_tokens("é"), TokenCount(1));
        assert_eq!(estimate_tokens("ééé"), TokenCount(2));
    }

    #[test]
    fn init_pins_the_anchor() {
        let spec = spec_of(&"x".repeat(400));
        let ctx = init_context(&spec, config(4, 1000)).unwrap();
        let seg = ctx.segment_tokens();
        assert_eq!(seg.anchor, TokenCount(100));
        assert_eq!(seg.summary, TokenCount(0));
        assert_eq!(seg.workspace, TokenCount(0));
        assert_eq!(ctx.anchor_digest(), digest(&spec.body));
    }

    #[test]
    fn init_rejects_oversized_spec() {
        let spec = spec_of(&"x".repeat(4004));
        assert_eq!(
            init_context(&spec, config(4, 1000)),
            Err(ContextError::SpecExceedsBudget {
                spec: TokenCount(1001),
                total: TokenCount(1000)
            })
        );
    }

    #[test]
    fn append_below_budget_grows_workspace_only() {
        let ctx = init_context(&spec_of("spec"), config(4, 1000)).unwrap();
        let ctx = ctx.push(AgentRole::Modeler, "hello").unwrap();
        assert_eq!(ctx.workspace().len(), 1);
        assert!(ctx.summary().is_empty());
    }

    #[test]
    fn non_monotonic_index_is_rejected() {
        let ctx = init_context(&spec_of("spec"), config(4, 1000)).unwrap();
        let err = ctx.append_turn(Turn::new(3, AgentRole::Tool, "x")).unwrap_err();
        assert_eq!(err, ContextError::NonMonotonicTurnIndex { expected: 0, got: 3 });
        let ctx = ctx.push(AgentRole::Tool, "a").unwrap();
        assert!(ctx.append_turn(Turn::new(0, AgentRole::Tool, "b")).is_err());
    }

    #[test]
    fn k_plus_one_appends_evict_the_oldest() {
        let k = 3;
        let mut ctx = init_context(&spec_of("spec"), config(k, 1000)).unwrap();
        for i in 0..=k {
            ctx = ctx.push(AgentRole::Tool, format!("turn {i}")).unwrap();
        }
        assert_eq!(ctx.workspace().len(), k);
        assert_eq!(ctx.workspace()[0].index, 1);
        assert_eq!(ctx.summary().len(), 1);
        assert_eq!(ctx.summary()[0].turn_range, TurnRange { first: 0, last: 0 });
        assert_eq!(ctx.summary()[0].text, "turn 0");
    }

    #[test]
    fn compact_is_identity_within_budget() {
        let ctx = init_context(&spec_of("spec"), config(4, 1000)).unwrap();
        let ctx = ctx.push(AgentRole::Modeler, "a").unwrap();
        assert_eq!(ctx.compact().unwrap(), ctx);
    }

    #[test]
    fn summary_overflow_merges_into_coarse_entries() {
        let mut cfg = config(1, 10_000);
        cfg.budgets.summary_max = TokenCount(60);
        let mut ctx = init_context(&spec_of("spec"), cfg).unwrap();
        for i in 0..12 {
            let body = format!("VERDICT: design_refinement -> modeler\nround {i} {}", "y".repeat(60));
            ctx = ctx.push(AgentRole::Arbiter, body).unwrap();
        }
        let seg = ctx.segment_tokens();
        assert!(seg.summary <= TokenCount(60), "{seg:?}");
        let first = &ctx.summary()[0];
        assert!(first.coarse);
        assert!(first.text.starts_with(&format!("rounds 0..{}:", first.turn_range.last)));
        let tallied: u32 = ctx.summary().iter().map(|e| e.verdicts.design_refinement).sum();
        assert_eq!(tallied, 11);
    }

    #[test]
    fn unsatisfiable_budget_is_reported() {
        let mut cfg = config(2, 40);
        cfg.budgets.workspace_max = TokenCount(1000);
        cfg.budgets.summary_max = TokenCount(1000);
        let ctx = init_context(&spec_of(&"s".repeat(80)), cfg).unwrap();
        let ctx = ctx.push(AgentRole::Tool, "t".repeat(40)).unwrap();
        // Two turns still fit exactly; the third forces a summary entry.
        let ctx = ctx.push(AgentRole::Tool, "t".repeat(40)).unwrap();
        assert_eq!(ctx.total_tokens(), TokenCount(40));
        let err = ctx.push(AgentRole::Tool, "t".repeat(40)).unwrap_err();
        assert!(matches!(err, ContextError::BudgetUnsatisfiable { segment: "context", .. }));
    }

    #[test]
    fn summary_budget_below_one_coarse_entry_names_the_summary() {
        let mut cfg = config(1, 10_000);
        cfg.budgets.summary_max = TokenCount(10);
        let ctx = init_context(&spec_of("spec"), cfg).unwrap();
        let ctx = ctx.push(AgentRole::Tool, "a".repeat(200)).unwrap();
        let err = ctx.push(AgentRole::Tool, "b").unwrap_err();
        assert!(matches!(
            err,
            ContextError::BudgetUnsatisfiable { segment: "summary", budget: TokenCount(10), .. }
        ));
    }

    #[test]
    fn empty_history_renders_anchor_then_footer() {
        let spec = spec_of("the spec");
        let ctx = init_context(&spec, config(2, 100)).unwrap();
        let footer = role_footer(AgentRole::Arbiter);
        assert_eq!(ctx.render_prompt(AgentRole::Arbiter), format!("the spec\n\n{footer}"));
    }

    #[test]
    fn rendered_tokens_are_segment_sum_plus_footer() {
        let spec = spec_of("CONSTRAINT: a b c [timing]\nbody");
        let mut ctx = init_context(&spec, config(2, 1000)).unwrap();
        for i in 0..5 {
            ctx = ctx.push(AgentRole::Modeler, format!("line {i}\nmore")).unwrap();
        }
        let rendered = ctx.render(AgentRole::Arbiter);
        let seg = ctx.segment_tokens();
        assert_eq!(rendered.tokens.anchor, seg.anchor);
        assert_eq!(rendered.tokens.summary, seg.summary);
        assert_eq!(rendered.tokens.workspace, seg.workspace);
        assert!(rendered.tokens.footer > TokenCount::ZERO);
        assert_eq!(rendered.tokens.total(), seg.content() + rendered.tokens.footer);
        assert!(rendered.text.ends_with(&role_footer(AgentRole::Arbiter)));
    }

    #[test]
    fn recall_is_vacuous_without_constraints() {
        let spec = spec_of("no markers here");
        let ctx = init_context(&spec, config(2, 100)).unwrap();
        assert_eq!(measure_recall(&ctx, &spec), 1.0);
    }

    #[test]
    fn context_dump_round_trips_and_detects_tampering() {
        let ctx = init_context(&spec_of("anchor text"), config(2, 100)).unwrap();
        let ctx = ctx.push(AgentRole::Tool, "log").unwrap();
        let json = serde_json::to_string(&ctx).unwrap();
        assert!(json.contains("\"anchor\"") && json.contains("\"summary\"") && json.contains("\"workspace\""));
        assert_eq!(serde_json::from_str::<ContextWindow>(&json).unwrap(), ctx);
        let tampered = json.replace("anchor text", "anchor edit");
        assert!(serde_json::from_str::<ContextWindow>(&tampered).is_err());
    }
}
