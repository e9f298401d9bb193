//! The verification loop: plan, generate model and testbench concurrently,
//! compile, run, arbitrate, and follow the routing path until success or a
//! cap is hit. The active [`LoopPolicy`] decides whether repair iterations
//! happen at all and whether the testbench may change.

mod runner;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::context::{ContextWindow, TokenCount};
use crate::gateway::{ArbiterVerdict, TargetAgent};
use crate::planner::ExecutionPlan;
use crate::session::{Artifact, LoopPolicy, RoutingPath, SessionOutcome};
use crate::sim::{SignatureKind, SimReport};

pub use runner::{
    run_session, write_outputs, EvoError, Manifest, ManifestTokens, SessionConfig, SessionResult, SessionRunner,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Planning,
    Generating,
    Simulating,
    Arbitrating,
    Repairing,
    Done,
}

/// One arbitration round (or the single pass of a non-iterating policy).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    /// Absent for policies that never consult the arbiter.
    pub verdict_path: Option<RoutingPath>,
    /// The routed repair was forbidden by the policy.
    #[serde(default)]
    pub blocked: bool,
    pub signatures: BTreeMap<SignatureKind, u32>,
    pub tokens_spent: TokenCount,
    /// (model revision, testbench revision) that were simulated.
    pub artifact_revisions: (u32, u32),
}

pub fn signature_counts(report: &SimReport) -> BTreeMap<SignatureKind, u32> {
    let mut counts = BTreeMap::new();
    for s in &report.signatures {
        *counts.entry(s.kind).or_insert(0) += 1;
    }
    counts
}

/// What the driver does after a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispatch {
    RegenerateModel,
    RegenerateTestbench,
    /// The routed repair is forbidden; nothing is regenerated.
    Blocked,
    Finalize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteDecision {
    pub next: Phase,
    pub dispatch: Dispatch,
}

impl RouteDecision {
    pub fn blocked(&self) -> bool {
        self.dispatch == Dispatch::Blocked
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Continue,
    StopSuccess,
    StopBudget,
}

/// Mutable state of one session, owned by the loop driver.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub phase: Phase,
    pub iteration: u32,
    pub current_model: Option<Artifact>,
    pub current_tb: Option<Artifact>,
    pub last_verdict: Option<ArbiterVerdict>,
    pub ctx: ContextWindow,
    pub outcome: Option<SessionOutcome>,
    pub tokens_spent: TokenCount,
    pub blocked_routes: u32,
}

impl SessionState {
    pub fn new(ctx: ContextWindow) -> Self {
        SessionState {
            phase: Phase::Planning,
            iteration: 0,
            current_model: None,
            current_tb: None,
            last_verdict: None,
            ctx,
            outcome: None,
            tokens_spent: TokenCount::ZERO,
            blocked_routes: 0,
        }
    }

    /// Records the verdict and its routing decision. Every non-success route
    /// counts one iteration, including blocked ones.
    pub fn apply_route(&mut self, verdict: ArbiterVerdict, decision: RouteDecision) {
        if decision.dispatch != Dispatch::Finalize {
            self.iteration += 1;
        }
        if decision.blocked() {
            self.blocked_routes += 1;
        }
        self.last_verdict = Some(verdict);
        self.phase = decision.next;
    }
}

/// Maps a verdict to the next phase and regeneration target. Testbench
/// repairs (realignment, or syntax repair aimed at the verifier) are blocked
/// when the policy freezes the testbench.
pub fn route(verdict: &ArbiterVerdict, state: &SessionState, policy: &LoopPolicy) -> RouteDecision {
    debug_assert!(matches!(state.phase, Phase::Arbitrating));
    let tb_repair = |policy: &LoopPolicy| {
        if policy.allow_tb_modification() {
            RouteDecision {
                next: Phase::Generating,
                dispatch: Dispatch::RegenerateTestbench,
            }
        } else {
            RouteDecision {
                next: Phase::Repairing,
                dispatch: Dispatch::Blocked,
            }
        }
    };
    let model_repair = RouteDecision {
        next: Phase::Generating,
        dispatch: Dispatch::RegenerateModel,
    };
    match (verdict.path, verdict.target_agent) {
        (RoutingPath::Success, _) => RouteDecision {
            next: Phase::Done,
            dispatch: Dispatch::Finalize,
        },
        (RoutingPath::DesignRefinement, _) => model_repair,
        (RoutingPath::TbRealignment, _) => tb_repair(policy),
        (RoutingPath::SyntaxRepair, TargetAgent::Verifier) => tb_repair(policy),
        (RoutingPath::SyntaxRepair, _) => model_repair,
    }
}

/// Success wins; otherwise the iteration cap and the token budget stop the
/// loop, the budget with a strict `tokens < budget` to continue.
pub fn check_termination(state: &SessionState, plan: &ExecutionPlan) -> Termination {
    if state.last_verdict.as_ref().is_some_and(|v| v.path == RoutingPath::Success) {
        Termination::StopSuccess
    } else if state.iteration >= plan.max_iterations || state.tokens_spent.value() >= plan.token_budget {
        Termination::StopBudget
    } else {
        Termination::Continue
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{init_context, ContextConfig};
    use crate::planner::{analyze_complexity, build_execution_plan, evaluate_assets};
    use crate::session::{parse_spec, SpecFormat};

    fn fixture() -> (SessionState, ExecutionPlan) {
        let spec = parse_spec("t", "# t\nCONSTRAINT: count up\n", SpecFormat::Markdown).unwrap();
        let plan = build_execution_plan(
            &spec,
            &analyze_complexity(&spec),
            &evaluate_assets(&spec),
            LoopPolicy::fixed_tb(),
        );
        let mut st = SessionState::new(init_context(&spec, ContextConfig::default()).unwrap());
        st.phase = Phase::Arbitrating;
        (st, plan)
    }

    fn verdict(path: RoutingPath, target: TargetAgent) -> ArbiterVerdict {
        ArbiterVerdict {
            path,
            target_agent: target,
            defect_summary: String::new(),
            violated_constraints: vec![],
            confidence_note: String::new(),
        }
    }

    #[test]
    fn routing_table() {
        let (st, _) = fixture();
        let fixed = LoopPolicy::fixed_tb();
        let refevo = LoopPolicy::refevo();
        let v = verdict(RoutingPath::TbRealignment, TargetAgent::Verifier);
        assert_eq!(route(&v, &st, &fixed).dispatch, Dispatch::Blocked);
        assert_eq!(route(&v, &st, &refevo).dispatch, Dispatch::RegenerateTestbench);
        let v = verdict(RoutingPath::DesignRefinement, TargetAgent::Modeler);
        assert_eq!(route(&v, &st, &fixed).dispatch, Dispatch::RegenerateModel);
        let v = verdict(RoutingPath::SyntaxRepair, TargetAgent::Verifier);
        assert_eq!(route(&v, &st, &fixed).dispatch, Dispatch::Blocked);
        let v = verdict(RoutingPath::Success, TargetAgent::None);
        assert_eq!(route(&v, &st, &fixed).next, Phase::Done);
    }

    #[test]
    fn termination_rules() {
        let (mut st, plan) = fixture();
        assert_eq!(check_termination(&st, &plan), Termination::Continue);
        st.tokens_spent = TokenCount(plan.token_budget - 1);
        assert_eq!(check_termination(&st, &plan), Termination::Continue);
        st.tokens_spent = TokenCount(plan.token_budget);
        assert_eq!(check_termination(&st, &plan), Termination::StopBudget);
        st.tokens_spent = TokenCount::ZERO;
        st.iteration = plan.max_iterations;
        assert_eq!(check_termination(&st, &plan), Termination::StopBudget);
        st.last_verdict = Some(verdict(RoutingPath::Success, TargetAgent::None));
        assert_eq!(check_termination(&st, &plan), Termination::StopSuccess);
    }

    #[test]
    fn blocked_routes_still_count() {
        let (mut st, _) = fixture();
        let v = verdict(RoutingPath::TbRealignment, TargetAgent::Verifier);
        let d = route(&v, &st, &LoopPolicy::fixed_tb());
        st.apply_route(v, d);
        assert_eq!((st.iteration, st.blocked_routes), (1, 1));
    }
}
