//! Reports over sessions: transcript replay, token accounting, recall,
//! outcome breakdowns, and a Monte Carlo model of testbenches that share the
//! model's misunderstanding of the spec.

mod breakdown;
mod coevo;
mod recall;
mod replay;
pub mod svg;
mod tokens;

use thiserror::Error;

use crate::session::PolicyName;

pub use breakdown::{failure_breakdown, Breakdown, ModeBreakdown};
pub use coevo::{
    closed_form_fp, simulate_coupled_validation, coevo_report, ClosedFormFp, CoEvoParams, CoEvoReport, ModeRates,
};
pub use recall::{recall_report, RecallReport, TranscriptRecall};
pub use replay::{reduction_pct, replay, replay_ledger, LedgerRound, Replay, TokenLedger};
pub use tokens::{
    tier_fixtures, token_report, token_report_synthetic, SyntheticSession, TierFixture, TierTokenReport, TokenReport,
    REFERENCE_FOOTER,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("transcript parse error: {0}")]
    TranscriptParse(String),
    #[error("no outcomes for mode `{0}`")]
    EmptyGroup(PolicyName),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
