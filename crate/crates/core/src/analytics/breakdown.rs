use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::session::{OutcomeStatus, PolicyName};

/// Outcome fractions of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeBreakdown {
    pub mode: PolicyName,
    pub sessions: usize,
    pub success: f64,
    pub compile_fail: f64,
    pub func_fail: f64,
    pub budget_exhausted: f64,
}

impl ModeBreakdown {
    pub fn fraction(&self, status: OutcomeStatus) -> f64 {
        match status {
            OutcomeStatus::Success => self.success,
            OutcomeStatus::CompileFail => self.compile_fail,
            OutcomeStatus::FuncFail => self.func_fail,
            OutcomeStatus::BudgetExhausted => self.budget_exhausted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub modes: Vec<ModeBreakdown>,
}

impl Breakdown {
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<10} {:>8} {:>9} {:>13} {:>10} {:>17}\n",
            "mode", "sessions", "success", "compile_fail", "func_fail", "budget_exhausted"
        );
        for m in &self.modes {
            s.push_str(&format!(
                "{:<10} {:>8} {:>9.3} {:>13.3} {:>10.3} {:>17.3}\n",
                m.mode.as_str(),
                m.sessions,
                m.success,
                m.compile_fail,
                m.func_fail,
                m.budget_exhausted
            ));
        }
        s
    }
}

/// Per-mode outcome fractions over `modes`, in that order. Every listed mode
/// needs at least one outcome.
pub fn failure_breakdown(
    outcomes: impl IntoIterator<Item = (PolicyName, OutcomeStatus)>,
    modes: &[PolicyName],
) -> Result<Breakdown, AnalyticsError> {
    let mut counts: BTreeMap<PolicyName, BTreeMap<OutcomeStatus, usize>> = BTreeMap::new();
    for (mode, status) in outcomes {
        *counts.entry(mode).or_default().entry(status).or_default() += 1;
    }
    let modes = modes
        .iter()
        .map(|&mode| {
            let c = counts.get(&mode).ok_or(AnalyticsError::EmptyGroup(mode))?;
            let n: usize = c.values().sum();
            let f = |s| *c.get(&s).unwrap_or(&0) as f64 / n as f64;
            Ok(ModeBreakdown {
                mode,
                sessions: n,
                success: f(OutcomeStatus::Success),
                compile_fail: f(OutcomeStatus::CompileFail),
                func_fail: f(OutcomeStatus::FuncFail),
                budget_exhausted: f(OutcomeStatus::BudgetExhausted),
            })
        })
        .collect::<Result<_, AnalyticsError>>()?;
    Ok(Breakdown { modes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_fixture() {
        let outcomes = [
            OutcomeStatus::CompileFail,
            OutcomeStatus::Success,
            OutcomeStatus::CompileFail,
            OutcomeStatus::Success,
            OutcomeStatus::Success,
        ]
        .map(|s| (PolicyName::Naive, s));
        let b = failure_breakdown(outcomes, &[PolicyName::Naive]).unwrap();
        assert_eq!(b.modes[0].compile_fail, 0.4);
        assert_eq!(b.modes[0].success, 0.6);
        assert!(b.to_table().contains("naive"));
    }

    #[test]
    fn missing_mode_is_an_empty_group() {
        let err = failure_breakdown([(PolicyName::Naive, OutcomeStatus::Success)], &[PolicyName::Refevo]).unwrap_err();
        assert_eq!(err, AnalyticsError::EmptyGroup(PolicyName::Refevo));
    }
}
