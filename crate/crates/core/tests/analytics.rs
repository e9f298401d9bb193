mod common;

use coevo_core::analytics::{
    closed_form_fp, recall_report, replay, simulate_coupled_validation, tier_fixtures, token_report,
    token_report_synthetic, CoEvoParams, SyntheticSession,
};
use coevo_core::context::{init_context, Budgets, ContextConfig, TokenCount, Turn};
use coevo_core::evo::{run_session, SessionConfig};
use coevo_core::planner::Tier;
use coevo_core::session::transcript::{Transcript, TranscriptRecord};
use coevo_core::session::{parse_spec, AgentRole, LoopPolicy, PolicyName, RoutingPath, SpecFormat};
use coevo_core::sim::{PhaseDurations, SimReport};
use serde::Deserialize;

/// Per-round totals written out term by term: round `i` carries the spec, the
/// `min(i, K)` newest turns verbatim, and one summary for each older turn.
fn oracle(s: &SyntheticSession) -> (u64, u64) {
    let (mut anchored, mut baseline) = (0, 0);
    for i in 1..=u64::from(s.n_rounds) {
        let k = s.workspace_turns as u64;
        baseline += s.spec_tokens + i * s.turn_tokens;
        anchored += s.spec_tokens + i.min(k) * s.turn_tokens + i.saturating_sub(k) * s.summary_tokens;
    }
    (anchored, baseline)
}

#[test]
fn synthetic_ledger_matches_the_term_by_term_oracle() {
    let s = SyntheticSession {
        n_rounds: 20,
        spec_tokens: 1000,
        turn_tokens: 2000,
        workspace_turns: 2,
        summary_tokens: 40,
    };
    let l = s.ledger().unwrap();
    assert_eq!(oracle(&s), (104_840, 440_000));
    assert_eq!(l.anchored_total, TokenCount(104_840));
    assert_eq!(l.baseline_total, TokenCount(440_000));
    assert_eq!(l.rounds.len(), 20);
    let pct = l.reduction_pct.unwrap();
    assert!((pct - 100.0 * (440_000.0 - 104_840.0) / 440_000.0).abs() < 1e-9);
}

#[test]
fn every_shipped_session_matches_the_oracle() {
    for f in tier_fixtures() {
        for s in &f.sessions {
            let l = s.ledger().unwrap();
            assert_eq!(
                (l.anchored_total.value(), l.baseline_total.value()),
                oracle(s),
                "{:?} {s:?}",
                f.tier
            );
        }
    }
}

#[test]
fn larger_tiers_save_more() {
    let r = token_report_synthetic(&tier_fixtures()).unwrap();
    let pct = |t: Tier| r.tiers.iter().find(|x| x.tier == t).unwrap().reduction_pct.unwrap();
    for t in &r.tiers {
        assert!(t.anchored_total < t.baseline_total, "{:?}", t.tier);
        assert!(t.reduction_pct.unwrap() > 0.0);
    }
    assert!(pct(Tier::Medium) > pct(Tier::Simple));
    assert!(pct(Tier::Complex) > pct(Tier::Simple));
    assert!(r.to_table().contains("not reproducible"));
}

#[derive(Deserialize)]
struct Eviction {
    spec: String,
    turns: Vec<String>,
    baseline_budget: u64,
}

fn passing_report() -> SimReport {
    SimReport {
        compile_ok: true,
        compile_log: String::new(),
        run_ok: Some(false),
        run_log: Some(String::new()),
        exit_code: Some(1),
        duration_ms: PhaseDurations {
            compile_ms: 0,
            run_ms: Some(0),
        },
        signatures: Vec::new(),
        build_dir: "m1-t1".into(),
    }
}

fn eviction_transcript() -> (Transcript, u64) {
    let f: Eviction = serde_json::from_str(&common::read("context/eviction.json")).unwrap();
    let spec = parse_spec("eviction", &f.spec, SpecFormat::Markdown).unwrap();
    assert_eq!(spec.constraints.len(), 5);
    let mut t = Transcript::new();
    t.push(TranscriptRecord::Spec { spec });
    t.push(TranscriptRecord::ContextConfig {
        config: ContextConfig::default(),
    });
    for (i, text) in f.turns.iter().enumerate() {
        let round = i as u32 + 1;
        t.push(TranscriptRecord::Turn {
            turn: Turn::new(i as u64, AgentRole::Arbiter, text.clone()),
        });
        t.push(TranscriptRecord::Sim {
            round,
            model_revision: round,
            tb_revision: 1,
            report: passing_report(),
        });
        t.push(TranscriptRecord::Route {
            round,
            path: RoutingPath::DesignRefinement,
            blocked: false,
        });
    }
    (t, f.baseline_budget)
}

#[test]
fn sliding_window_loses_constraints_the_anchor_keeps() {
    let (t, budget) = eviction_transcript();
    let r = recall_report(&[t.clone()], Some(TokenCount(budget))).unwrap();
    assert_eq!(r.anchored_min, 1.0);
    // From round 2 on only the last two turns fit; each quotes one constraint.
    assert_eq!(r.baseline_min, 0.4);
    let per_round = replay(&t).unwrap().baseline_recall(Some(TokenCount(budget)));
    assert_eq!(per_round, [1.0, 0.4, 0.4, 0.4, 0.4]);
    let unlimited = recall_report(&[t], None).unwrap();
    assert_eq!(unlimited.baseline_min, 1.0);
}

#[test]
fn spec_without_constraints_has_full_recall() {
    let spec = parse_spec("plain", "a block with no marked constraints\n", SpecFormat::Plain).unwrap();
    let mut t = Transcript::new();
    t.push(TranscriptRecord::Spec { spec });
    let r = recall_report(&[t], Some(TokenCount(1))).unwrap();
    assert_eq!((r.anchored_min, r.baseline_min), (1.0, 1.0));
    assert!(r.transcripts[0].rounds == 0);
}

#[derive(Deserialize)]
struct Compaction {
    workspace_turns: usize,
    summary_line_max: u64,
    turns: Vec<CompactionTurn>,
    expected_summaries: Vec<String>,
}

#[derive(Deserialize)]
struct CompactionTurn {
    role: AgentRole,
    content: String,
}

#[test]
fn twenty_turn_compaction_matches_hand_extracted_summaries() {
    let f: Compaction = serde_json::from_str(&common::read("context/compaction_20.json")).unwrap();
    let spec = parse_spec("c", "# Counter\nCONSTRAINT: wraps at 255\n", SpecFormat::Markdown).unwrap();
    let config = ContextConfig {
        workspace_turns: f.workspace_turns,
        summary_line_max: TokenCount(f.summary_line_max),
        ..ContextConfig::default()
    };
    let mut ctx = init_context(&spec, config).unwrap();
    for t in &f.turns {
        ctx = ctx.push(t.role, t.content.clone()).unwrap();
    }
    let got: Vec<&str> = ctx.summary().iter().map(|e| e.text.as_str()).collect();
    assert_eq!(got, f.expected_summaries);
    assert_eq!(ctx.workspace().len(), 4);
    assert!(ctx.summary().iter().all(|e| !e.coarse));
    let tally = ctx.summary().iter().fold(Default::default(), |a: coevo_core::context::VerdictTally, e| {
        a.merged(e.verdicts)
    });
    assert_eq!(
        (tally.syntax_repair, tally.design_refinement, tally.tb_realignment, tally.success),
        (1, 1, 1, 1)
    );
}

#[test]
fn tight_summary_budget_merges_into_the_coarse_template() {
    let spec = parse_spec("c", "# Counter\nCONSTRAINT: wraps at 255\n", SpecFormat::Markdown).unwrap();
    let config = ContextConfig {
        budgets: Budgets {
            total: TokenCount(32_000),
            summary_max: TokenCount(20),
            workspace_max: TokenCount(12_000),
        },
        workspace_turns: 1,
        ..ContextConfig::default()
    };
    let mut ctx = init_context(&spec, config).unwrap();
    for verdict in ["syntax_repair", "design_refinement", "tb_realignment", "success"] {
        ctx = ctx
            .push(AgentRole::Arbiter, format!("VERDICT: {verdict} -> modeler\nreasoning"))
            .unwrap();
    }
    assert!(ctx.segment_tokens().summary <= TokenCount(20));
    assert!(ctx.summary().iter().any(|e| e.coarse));
    assert!(ctx.summary().iter().any(|e| e.text.starts_with("rounds ")));
}

#[test]
fn coevo_monte_carlo_tracks_the_closed_forms() {
    let p = CoEvoParams {
        trials: 40_000,
        ..CoEvoParams::default()
    };
    let cf = closed_form_fp(&p);
    for (mode, expect) in [(PolicyName::FixedTb, cf.fixed_tb), (PolicyName::Refevo, cf.refevo)] {
        let r = simulate_coupled_validation(&p, mode).unwrap();
        assert!(
            (r.false_positive_rate - expect).abs() <= 3.0 * r.fp_standard_error,
            "{mode:?}: {} vs {expect}",
            r.false_positive_rate
        );
    }
    let naive = simulate_coupled_validation(&p, PolicyName::Naive).unwrap();
    let flow = simulate_coupled_validation(&p, PolicyName::FlowOnly).unwrap();
    assert_eq!(naive.false_positive_rate, flow.false_positive_rate);
    assert_eq!(naive.mean_rounds, 1.0);
}

#[test]
fn coevo_is_independent_of_thread_count() {
    let p = CoEvoParams {
        trials: 5_000,
        max_rounds: 3,
        ..CoEvoParams::default()
    };
    let many = simulate_coupled_validation(&p, PolicyName::Refevo).unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| simulate_coupled_validation(&p, PolicyName::Refevo).unwrap());
    assert_eq!(many, one);
}

#[test]
fn token_report_over_recorded_sessions() {
    let spec = common::spec("counter/counter_spec.md", "counter");
    let dir = tempfile::tempdir().unwrap();
    let sim = common::cxx(dir.path());
    let provider = common::mock("counter/counter.script.json");
    let r = run_session(&spec, LoopPolicy::refevo(), &provider, &sim, SessionConfig::default()).unwrap();
    let report = token_report(&[r.transcript.clone()]).unwrap();
    assert_eq!(report.tiers.len(), 1);
    assert_eq!(report.tiers[0].tier, Tier::Simple);
    let ledger = replay(&r.transcript).unwrap().ledger;
    assert_eq!(report.tiers[0].anchored_total, ledger.anchored_total);
    assert_eq!(report.tiers[0].baseline_total, ledger.baseline_total);
    assert_eq!(
        report.tiers[0].absolute_savings,
        ledger.baseline_total.value() as i64 - ledger.anchored_total.value() as i64
    );
}

#[test]
fn transcript_without_plan_is_rejected() {
    let (t, _) = eviction_transcript();
    assert!(token_report(&[t]).is_err());
}
