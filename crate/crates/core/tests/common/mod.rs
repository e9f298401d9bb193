#![allow(dead_code)]

use std::path::PathBuf;

use coevo_core::gateway::MockProvider;
use coevo_core::session::{parse_spec, DesignSpec, SpecFormat};
use coevo_core::sim::{Simulator, ToolchainConfig};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn spec(rel: &str, id: &str) -> DesignSpec {
    let path = fixture(rel);
    parse_spec(id, &read(rel), SpecFormat::from_path(&path)).unwrap()
}

pub fn mock(rel: &str) -> MockProvider {
    MockProvider::from_json(&read(rel)).unwrap()
}

pub fn cxx(workdir: &std::path::Path) -> Simulator {
    Simulator::new(ToolchainConfig::profile("cxx", workdir).unwrap()).unwrap()
}

pub mod scripted {
    use std::sync::Mutex;

    use coevo_core::evo::{run_session, SessionConfig, SessionResult};
    use coevo_core::gateway::{MockProvider, ScriptEntry};
    use coevo_core::session::{parse_spec, AgentRole, Artifact, DesignSpec, LoopPolicy, SpecFormat};
    use coevo_core::sim::{PhaseDurations, SimBackend, SimError, SimReport};

    /// Every pair compiles and passes; the pairs seen are kept in order.
    #[derive(Default)]
    pub struct AlwaysPass {
        pub seen: Mutex<Vec<(String, String)>>,
    }

    impl SimBackend for AlwaysPass {
        fn simulate(&self, _session_id: &str, model: &Artifact, tb: &Artifact) -> Result<SimReport, SimError> {
            self.seen.lock().unwrap().push((model.content.clone(), tb.content.clone()));
            Ok(SimReport {
                compile_ok: true,
                compile_log: String::new(),
                run_ok: Some(true),
                run_log: Some("ALL TESTS PASS\n".into()),
                exit_code: Some(0),
                duration_ms: PhaseDurations {
                    compile_ms: 0,
                    run_ms: Some(0),
                },
                signatures: Vec::new(),
                build_dir: format!("m{}-t{}", model.revision, tb.revision).into(),
            })
        }
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Sym {
        SyntaxModel,
        SyntaxTb,
        Design,
        Realign,
        Success,
    }

    pub const ALPHABET: [Sym; 5] = [Sym::SyntaxModel, Sym::SyntaxTb, Sym::Design, Sym::Realign, Sym::Success];

    pub fn verdict_json(s: Sym) -> String {
        let (path, target, violated) = match s {
            Sym::SyntaxModel => ("syntax_repair", "modeler", "[]"),
            Sym::SyntaxTb => ("syntax_repair", "verifier", "[]"),
            Sym::Design => ("design_refinement", "modeler", "[\"C1\"]"),
            Sym::Realign => ("tb_realignment", "verifier", "[\"C1\"]"),
            Sym::Success => ("success", "none", "[]"),
        };
        format!(
            r#"{{"path": "{path}", "target_agent": "{target}", "defect_summary": "scripted", "violated_constraints": {violated}, "confidence_note": "n/a"}}"#
        )
    }

    pub fn spec() -> DesignSpec {
        parse_spec("scripted", "# Counter\nCONSTRAINT: @C1 count increments by one\n", SpecFormat::Markdown).unwrap()
    }

    /// Distinct content per generation so every revision is recognisable.
    pub fn provider(seq: &[Sym]) -> MockProvider {
        let mut script = Vec::new();
        for k in 1..=seq.len() + 1 {
            script.push(ScriptEntry::new(AgentRole::Modeler, format!("```cpp\n// model {k}\n```\n")));
            script.push(ScriptEntry::new(AgentRole::Verifier, format!("```cpp\n// tb {k}\n```\n")));
        }
        script.extend(seq.iter().map(|s| ScriptEntry::new(AgentRole::Arbiter, verdict_json(*s))));
        MockProvider::new(script)
    }

    /// Runs `seq` with the iteration cap set to its length.
    pub fn run(seq: &[Sym], policy: LoopPolicy) -> (SessionResult, AlwaysPass) {
        let mut cfg = SessionConfig::default();
        cfg.planner.simple.max_iterations = seq.len() as u32;
        let sim = AlwaysPass::default();
        let r = run_session(&spec(), policy, &provider(seq), &sim, cfg).unwrap();
        (r, sim)
    }
}
