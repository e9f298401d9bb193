use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::context::{baseline_render, estimate_tokens, init_context, recall_in, ContextWindow, TokenCount};
use crate::evo::{signature_counts, IterationRecord};
use crate::session::transcript::{Transcript, TranscriptRecord};
use crate::session::DesignSpec;

/// Token accounting of one round under both context strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRound {
    pub round: u32,
    /// Anchor + summary + workspace tokens of the anchored window.
    pub anchored: TokenCount,
    /// Spec + every turn so far, the unbounded sliding window.
    pub baseline: TokenCount,
    /// Provider response tokens, identical under both strategies.
    pub response: TokenCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LedgerRepr")]
pub struct TokenLedger {
    pub rounds: Vec<LedgerRound>,
    pub anchored_total: TokenCount,
    pub baseline_total: TokenCount,
    pub response_total: TokenCount,
    /// `100 * (baseline - anchored) / baseline`; absent when the baseline is 0.
    pub reduction_pct: Option<f64>,
}

#[derive(Deserialize)]
struct LedgerRepr {
    rounds: Vec<LedgerRound>,
    anchored_total: TokenCount,
    baseline_total: TokenCount,
    response_total: TokenCount,
    reduction_pct: Option<f64>,
}

impl TryFrom<LedgerRepr> for TokenLedger {
    type Error = String;

    fn try_from(r: LedgerRepr) -> Result<Self, Self::Error> {
        let l = TokenLedger::from_rounds(r.rounds);
        if (l.anchored_total, l.baseline_total, l.response_total)
            != (r.anchored_total, r.baseline_total, r.response_total)
        {
            return Err("ledger totals differ from the sum of their rounds".into());
        }
        if l.reduction_pct.is_some() != r.reduction_pct.is_some() {
            return Err("reduction_pct must be present exactly when the baseline is positive".into());
        }
        Ok(TokenLedger {
            reduction_pct: r.reduction_pct,
            ..l
        })
    }
}

impl Default for TokenLedger {
    fn default() -> Self {
        TokenLedger::from_rounds(Vec::new())
    }
}

pub fn reduction_pct(anchored: TokenCount, baseline: TokenCount) -> Option<f64> {
    (baseline.value() > 0)
        .then(|| 100.0 * (baseline.value() as f64 - anchored.value() as f64) / baseline.value() as f64)
}

impl TokenLedger {
    pub fn from_rounds(rounds: Vec<LedgerRound>) -> Self {
        let anchored_total = rounds.iter().map(|r| r.anchored).sum();
        let baseline_total = rounds.iter().map(|r| r.baseline).sum();
        let response_total = rounds.iter().map(|r| r.response).sum();
        TokenLedger {
            reduction_pct: reduction_pct(anchored_total, baseline_total),
            rounds,
            anchored_total,
            baseline_total,
            response_total,
        }
    }

    pub fn savings(&self) -> i64 {
        self.baseline_total.value() as i64 - self.anchored_total.value() as i64
    }
}

/// Everything reconstructed from one transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub spec: DesignSpec,
    pub iterations: Vec<IterationRecord>,
    pub ledger: TokenLedger,
    /// Per round: recall of the anchored arbiter prompt.
    pub anchored_recall: Vec<f64>,
    /// Per round: number of turns recorded so far.
    pub histories: Vec<usize>,
    turn_texts: Vec<String>,
}

impl Replay {
    /// Recall of the baseline window at every round, for `budget`.
    pub fn baseline_recall(&self, budget: Option<TokenCount>) -> Vec<f64> {
        let mut history = vec![self.spec.body.clone()];
        history.extend(self.turn_texts.iter().cloned());
        self.histories
            .iter()
            .map(|&n| recall_in(&baseline_render(&history[..=n], budget).text, &self.spec))
            .collect()
    }
}

#[derive(Default)]
struct RoundAcc {
    tokens: TokenCount,
    response: TokenCount,
    revisions: Option<(u32, u32)>,
    signatures: Option<BTreeMap<crate::sim::SignatureKind, u32>>,
}

/// Rebuilds the context window turn by turn and re-derives the iteration
/// records and token ledger. Rounds close at their `route` record, or at the
/// outcome record for policies that never arbitrate.
pub fn replay(transcript: &Transcript) -> Result<Replay, AnalyticsError> {
    let mut spec = None;
    let mut policy_iterates = None;
    let mut ctx: Option<ContextWindow> = None;
    let mut turn_texts: Vec<String> = Vec::new();
    let mut baseline = TokenCount::ZERO;
    let mut rounds: BTreeMap<u32, RoundAcc> = BTreeMap::new();
    let mut current_round = 1u32;
    let mut iterations = Vec::new();
    let mut ledger_rounds = Vec::new();
    let mut anchored_recall = Vec::new();
    let mut histories = Vec::new();

    let missing = |what: &str| AnalyticsError::TranscriptParse(format!("{what} record missing before use"));

    let mut close = |round: u32,
                     path,
                     blocked,
                     acc: RoundAcc,
                     ctx: &ContextWindow,
                     spec: &DesignSpec,
                     baseline: TokenCount,
                     n_turns: usize|
     -> Result<(), AnalyticsError> {
        let (Some(revisions), Some(signatures)) = (acc.revisions, acc.signatures) else {
            return Err(AnalyticsError::TranscriptParse(format!("round {round} closes without a sim record")));
        };
        iterations.push(IterationRecord {
            iteration: round,
            verdict_path: path,
            blocked,
            signatures,
            tokens_spent: acc.tokens,
            artifact_revisions: revisions,
        });
        ledger_rounds.push(LedgerRound {
            round,
            anchored: ctx.segment_tokens().content(),
            baseline,
            response: acc.response,
        });
        anchored_recall.push(recall_in(&ctx.render_prompt(crate::session::AgentRole::Arbiter), spec));
        histories.push(n_turns);
        Ok(())
    };

    for rec in &transcript.records {
        match rec {
            TranscriptRecord::Spec { spec: s } => {
                baseline = estimate_tokens(&s.body);
                spec = Some(s.clone());
            }
            TranscriptRecord::Plan { plan } => policy_iterates = Some(plan.policy.allow_iteration()),
            TranscriptRecord::ContextConfig { config } => {
                let s = spec.as_ref().ok_or_else(|| missing("spec"))?;
                ctx = Some(init_context(s, *config).map_err(|e| AnalyticsError::TranscriptParse(e.to_string()))?);
            }
            TranscriptRecord::Turn { turn } => {
                let c = ctx.as_ref().ok_or_else(|| missing("context_config"))?;
                ctx = Some(
                    c.append_turn(turn.clone())
                        .map_err(|e| AnalyticsError::TranscriptParse(e.to_string()))?,
                );
                baseline += turn.tokens();
                turn_texts.push(turn.content.clone());
            }
            TranscriptRecord::Call { round, call } => {
                let acc = rounds.entry(*round).or_default();
                acc.tokens += call.total();
                acc.response += call.response_tokens;
            }
            TranscriptRecord::Sim {
                round,
                model_revision,
                tb_revision,
                report,
            } => {
                let acc = rounds.entry(*round).or_default();
                acc.revisions = Some((*model_revision, *tb_revision));
                acc.signatures = Some(signature_counts(report));
                current_round = *round;
            }
            TranscriptRecord::Verdict { .. } => {}
            TranscriptRecord::Route { round, path, blocked } => {
                let acc = rounds.remove(round).unwrap_or_default();
                let s = spec.as_ref().ok_or_else(|| missing("spec"))?;
                let c = ctx.as_ref().ok_or_else(|| missing("context_config"))?;
                close(*round, Some(*path), *blocked, acc, c, s, baseline, turn_texts.len())?;
            }
            TranscriptRecord::Outcome { .. } => {
                if policy_iterates == Some(false) {
                    if let Some(acc) = rounds.remove(&current_round) {
                        let s = spec.as_ref().ok_or_else(|| missing("spec"))?;
                        let c = ctx.as_ref().ok_or_else(|| missing("context_config"))?;
                        if acc.revisions.is_some() {
                            close(current_round, None, false, acc, c, s, baseline, turn_texts.len())?;
                        }
                    }
                }
            }
        }
    }
    let spec = spec.ok_or_else(|| missing("spec"))?;
    Ok(Replay {
        spec,
        iterations,
        ledger: TokenLedger::from_rounds(ledger_rounds),
        anchored_recall,
        histories,
        turn_texts,
    })
}

/// Token ledger of a transcript.
pub fn replay_ledger(transcript: &Transcript) -> Result<TokenLedger, AnalyticsError> {
    replay(transcript).map(|r| r.ledger)
}
