use serde::{Deserialize, Serialize};

use super::replay::{reduction_pct, replay, LedgerRound, TokenLedger};
use super::AnalyticsError;
use crate::context::{estimate_tokens, init_context, Budgets, ContextConfig, TokenCount};
use crate::planner::Tier;
use crate::session::transcript::Transcript;
use crate::session::{AgentRole, DesignSpec};

const TIER_FIXTURES: &str = include_str!("../../data/token_tiers.json");

/// Published reference points, echoed in report footers. They come from a
/// different tokenizer and benchmark and are not expected to be reproduced.
pub const REFERENCE_FOOTER: &str = "reference points (not reproducible here: different tokenizer and \
benchmark): average reduction 71.04%, medium designs 81.76%, complex designs 68.89%, \
over 73,900 tokens saved per complex session";

/// Parameters of a generated session: a spec of `spec_tokens`, then
/// `n_rounds` turns of `turn_tokens` each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSession {
    pub n_rounds: u32,
    pub spec_tokens: u64,
    pub turn_tokens: u64,
    pub workspace_turns: usize,
    /// Per-turn summary size; the first line of every turn is longer than this.
    pub summary_tokens: u64,
}

impl SyntheticSession {
    fn validate(&self) -> Result<(), AnalyticsError> {
        if self.turn_tokens < self.summary_tokens + 1 || self.workspace_turns == 0 || self.summary_tokens == 0 {
            return Err(AnalyticsError::InvalidInput(
                "synthetic turns must exceed their summary size, and K and the summary size must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Spec text of exactly `spec_tokens * 4` bytes.
    pub fn spec_text(&self) -> String {
        let mut s = "# synthetic\n".to_string();
        let target = (self.spec_tokens * 4) as usize;
        while s.len() < target {
            s.push_str("lorem ipsum specification text. ");
        }
        s.truncate(target);
        s
    }

    /// Turn `i` (1-based): a first line longer than the summary cap, then
    /// filler, exactly `turn_tokens * 4` bytes in total.
    pub fn turn_text(&self, i: u32) -> String {
        let target = (self.turn_tokens * 4) as usize;
        let first_len = ((self.summary_tokens * 4) as usize + 8).min(target);
        let mut s = format!("round {i} ");
        while s.len() < first_len {
            s.push('x');
        }
        s.truncate(first_len);
        if s.len() < target {
            s.push('\n');
            while s.len() < target {
                s.push_str("filler line\n");
            }
            s.truncate(target);
        }
        s
    }

    fn context_config(&self) -> ContextConfig {
        // Budgets generous enough that no coarse merge happens.
        let n = self.n_rounds as u64;
        let total = self.spec_tokens + n * (self.turn_tokens + self.summary_tokens) + 1;
        ContextConfig {
            budgets: Budgets {
                total: TokenCount(total),
                summary_max: TokenCount(n * self.summary_tokens + 1),
                workspace_max: TokenCount(total),
            },
            workspace_turns: self.workspace_turns,
            summary_line_max: TokenCount(self.summary_tokens),
            ..ContextConfig::default()
        }
    }

    /// Runs the session through a real context window, one turn per round.
    pub fn ledger(&self) -> Result<TokenLedger, AnalyticsError> {
        self.validate()?;
        let spec = DesignSpec {
            spec_id: "synthetic".into(),
            title: "synthetic".into(),
            body: self.spec_text(),
            constraints: Vec::new(),
            legacy_assets: Vec::new(),
        };
        let mut ctx = init_context(&spec, self.context_config()).map_err(|e| AnalyticsError::InvalidInput(e.to_string()))?;
        let mut baseline = estimate_tokens(&spec.body);
        let mut rounds = Vec::new();
        for i in 1..=self.n_rounds {
            let text = self.turn_text(i);
            baseline += estimate_tokens(&text);
            ctx = ctx
                .push(AgentRole::Tool, text)
                .map_err(|e| AnalyticsError::InvalidInput(e.to_string()))?;
            rounds.push(LedgerRound {
                round: i,
                anchored: ctx.segment_tokens().content(),
                baseline,
                response: TokenCount::ZERO,
            });
        }
        Ok(TokenLedger::from_rounds(rounds))
    }
}

/// Shipped synthetic sessions per design tier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierFixture {
    pub tier: Tier,
    pub sessions: Vec<SyntheticSession>,
}

pub fn tier_fixtures() -> Vec<TierFixture> {
    serde_json::from_str(TIER_FIXTURES).expect("tier fixtures are valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierTokenReport {
    pub tier: Tier,
    pub sessions: usize,
    pub anchored_total: TokenCount,
    pub baseline_total: TokenCount,
    pub reduction_pct: Option<f64>,
    pub absolute_savings: i64,
    pub mean_savings_per_session: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenReport {
    pub tiers: Vec<TierTokenReport>,
    pub overall_reduction_pct: Option<f64>,
    pub footer: String,
}

impl TokenReport {
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<8} {:>8} {:>14} {:>14} {:>10} {:>14}\n",
            "tier", "sessions", "baseline", "anchored", "reduction", "saved/session"
        );
        for t in &self.tiers {
            s.push_str(&format!(
                "{:<8} {:>8} {:>14} {:>14} {:>9.2}% {:>14.1}\n",
                t.tier.as_str(),
                t.sessions,
                t.baseline_total.value(),
                t.anchored_total.value(),
                t.reduction_pct.unwrap_or(0.0),
                t.mean_savings_per_session
            ));
        }
        if let Some(p) = self.overall_reduction_pct {
            s.push_str(&format!("overall reduction {p:.2}%\n"));
        }
        s.push_str(&self.footer);
        s.push('\n');
        s
    }
}

fn tier_report(tier: Tier, ledgers: &[TokenLedger]) -> TierTokenReport {
    let anchored_total: TokenCount = ledgers.iter().map(|l| l.anchored_total).sum();
    let baseline_total: TokenCount = ledgers.iter().map(|l| l.baseline_total).sum();
    let absolute_savings = baseline_total.value() as i64 - anchored_total.value() as i64;
    TierTokenReport {
        tier,
        sessions: ledgers.len(),
        anchored_total,
        baseline_total,
        reduction_pct: reduction_pct(anchored_total, baseline_total),
        absolute_savings,
        mean_savings_per_session: if ledgers.is_empty() {
            0.0
        } else {
            absolute_savings as f64 / ledgers.len() as f64
        },
    }
}

fn assemble(tiers: Vec<TierTokenReport>) -> TokenReport {
    let anchored: TokenCount = tiers.iter().map(|t| t.anchored_total).sum();
    let baseline: TokenCount = tiers.iter().map(|t| t.baseline_total).sum();
    TokenReport {
        tiers,
        overall_reduction_pct: reduction_pct(anchored, baseline),
        footer: REFERENCE_FOOTER.into(),
    }
}

/// Per-tier reduction over synthetic sessions.
pub fn token_report_synthetic(fixtures: &[TierFixture]) -> Result<TokenReport, AnalyticsError> {
    let mut tiers = Vec::new();
    for f in fixtures {
        let ledgers = f
            .sessions
            .iter()
            .map(SyntheticSession::ledger)
            .collect::<Result<Vec<_>, _>>()?;
        tiers.push(tier_report(f.tier, &ledgers));
    }
    Ok(assemble(tiers))
}

/// Per-tier reduction over recorded transcripts, grouped by the tier of
/// their plan.
pub fn token_report(transcripts: &[Transcript]) -> Result<TokenReport, AnalyticsError> {
    let mut by_tier: Vec<(Tier, Vec<TokenLedger>)> = Tier::ALL.iter().map(|t| (*t, Vec::new())).collect();
    for t in transcripts {
        let tier = t
            .records
            .iter()
            .find_map(|r| match r {
                crate::session::transcript::TranscriptRecord::Plan { plan } => Some(plan.complexity.tier),
                _ => None,
            })
            .ok_or_else(|| AnalyticsError::TranscriptParse("transcript has no plan record".into()))?;
        let ledger = replay(t)?.ledger;
        by_tier.iter_mut().find(|(x, _)| *x == tier).expect("all tiers").1.push(ledger);
    }
    Ok(assemble(
        by_tier
            .into_iter()
            .filter(|(_, l)| !l.is_empty())
            .map(|(tier, l)| tier_report(tier, &l))
            .collect(),
    ))
}
