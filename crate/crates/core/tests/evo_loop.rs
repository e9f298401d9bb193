mod common;

use coevo_core::analytics::replay;
use coevo_core::evo::{run_session, write_outputs, Manifest, SessionConfig, SessionResult};
use coevo_core::gateway::MockProvider;
use coevo_core::session::transcript::{Transcript, TranscriptRecord};
use coevo_core::session::{AgentRole, LoopPolicy, OutcomeStatus, RoutingPath};

fn run(script: &str, policy: LoopPolicy) -> (SessionResult, MockProvider, tempfile::TempDir) {
    let spec = common::spec("counter/counter_spec.md", "counter");
    let dir = tempfile::tempdir().unwrap();
    let sim = common::cxx(dir.path());
    let provider = common::mock(script);
    let r = run_session(&spec, policy, &provider, &sim, SessionConfig::default()).unwrap();
    (r, provider, dir)
}

fn paths(r: &SessionResult) -> Vec<Option<RoutingPath>> {
    r.outcome.iterations.iter().map(|i| i.verdict_path).collect()
}

#[test]
fn syntax_repair_then_success() {
    let (r, _, _d) = run("counter/syntax_then_pass.script.json", LoopPolicy::fixed_tb());
    assert_eq!(r.outcome.status, OutcomeStatus::Success);
    assert_eq!(paths(&r), [Some(RoutingPath::SyntaxRepair), Some(RoutingPath::Success)]);
    let golden = r.outcome.golden.as_ref().unwrap();
    assert_eq!(golden.model.revision, 2);
    assert_eq!(golden.model.content, common::read("counter/dut_v3.cpp"));
}

#[test]
fn three_act_under_refevo_succeeds() {
    let (r, _, _d) = run("counter/counter.script.json", LoopPolicy::refevo());
    assert_eq!(r.outcome.status, OutcomeStatus::Success);
    assert_eq!(
        paths(&r),
        [
            Some(RoutingPath::SyntaxRepair),
            Some(RoutingPath::DesignRefinement),
            Some(RoutingPath::TbRealignment),
            Some(RoutingPath::Success),
        ]
    );
    let revisions: Vec<_> = r.outcome.iterations.iter().map(|i| i.artifact_revisions).collect();
    assert_eq!(revisions, [(1, 1), (2, 1), (3, 1), (3, 2)]);
    let golden = r.outcome.golden.as_ref().unwrap();
    assert_eq!(golden.testbench.content, common::read("counter/tb_v2.cpp"));
    assert!(r.final_sim.as_ref().unwrap().passed());
}

#[test]
fn three_act_under_fixed_tb_fails_functionally() {
    let (r, provider, _d) = run("counter/counter.script.json", LoopPolicy::fixed_tb());
    assert_eq!(r.outcome.status, OutcomeStatus::FuncFail);
    assert!(r.outcome.golden.is_none());
    assert_eq!(r.outcome.iterations.len() as u32, r.plan.max_iterations);
    assert_eq!(r.outcome.iterations.iter().filter(|i| i.blocked).count(), 2);
    assert!(r.outcome.iterations.iter().all(|i| i.artifact_revisions.1 == 1));
    assert_eq!(provider.remaining(AgentRole::Verifier), 1, "second testbench never requested");
}

#[test]
fn non_iterating_policies_stop_after_one_simulation() {
    for policy in [LoopPolicy::naive(), LoopPolicy::flow_only()] {
        let (r, provider, _d) = run("counter/counter.script.json", policy);
        assert_eq!(r.outcome.status, OutcomeStatus::CompileFail);
        assert_eq!(paths(&r), [None]);
        assert!(provider.requests().iter().all(|q| q.role != AgentRole::Arbiter));
    }
}

#[test]
fn replay_reconstructs_records_and_ledger() {
    for script in ["counter/counter.script.json", "counter/syntax_then_pass.script.json"] {
        for policy in [LoopPolicy::naive(), LoopPolicy::fixed_tb(), LoopPolicy::refevo()] {
            let (r, _, _d) = run(script, policy);
            let text = r.transcript.to_jsonl();
            let back = Transcript::parse(&text).unwrap();
            assert_eq!(back, r.transcript);
            let rep = replay(&back).unwrap();
            assert_eq!(rep.iterations, r.outcome.iterations);
            assert_eq!(rep.ledger, r.outcome.token_ledger);
            assert!(rep.anchored_recall.iter().all(|&x| x == 1.0));
        }
    }
}

#[test]
fn iteration_tokens_match_recorded_calls() {
    let (r, _, _d) = run("counter/counter.script.json", LoopPolicy::refevo());
    for it in &r.outcome.iterations {
        let sum: u64 = r
            .transcript
            .records
            .iter()
            .filter_map(|rec| match rec {
                TranscriptRecord::Call { round, call } if *round == it.iteration => Some(call.total().value()),
                _ => None,
            })
            .sum();
        assert_eq!(it.tokens_spent.value(), sum);
    }
}

#[test]
fn mock_sessions_are_bit_reproducible() {
    let (a, _, _d1) = run("counter/counter.script.json", LoopPolicy::refevo());
    let (b, _, _d2) = run("counter/counter.script.json", LoopPolicy::refevo());
    assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl());
}

#[test]
fn outputs_contain_manifest_transcript_and_golden() {
    let (r, _, _d) = run("counter/counter.script.json", LoopPolicy::refevo());
    let out = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({"mode": "refevo"});
    let manifest = write_outputs(&r, out.path(), Some(&cfg)).unwrap();
    let on_disk: Manifest =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk, manifest);
    assert_eq!(manifest.status, OutcomeStatus::Success);
    assert_eq!(manifest.iterations, 4);
    let golden = manifest.golden.unwrap();
    assert_eq!(
        std::fs::read_to_string(out.path().join(&golden.testbench)).unwrap(),
        common::read("counter/tb_v2.cpp")
    );
    assert!(out.path().join("final_sim.json").exists());
    assert!(out.path().join("config.json").exists());
    let t = Transcript::load(&out.path().join("transcript.jsonl")).unwrap();
    assert_eq!(t, r.transcript);
    assert!(manifest.tokens.anchored_total <= manifest.tokens.baseline_total);
}
