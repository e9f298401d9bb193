mod common;

use std::time::Instant;

use coevo_core::session::{Artifact, ArtifactKind};
use coevo_core::sim::{SignatureKind, SimBackend, SimError, Simulator, ToolchainConfig};

fn pair(model: &str, tb: &str) -> (Artifact, Artifact) {
    (
        Artifact::initial(ArtifactKind::ReferenceModel, "dut.cpp", common::read(model)),
        Artifact::initial(ArtifactKind::Testbench, "tb.cpp", common::read(tb)),
    )
}

#[test]
fn valid_pair_compiles_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (m, t) = pair("sim/ok_dut.cpp", "sim/ok_tb.cpp");
    let r = common::cxx(dir.path()).simulate("s", &m, &t).unwrap();
    assert!(r.compile_ok, "{}", r.compile_log);
    assert_eq!(r.run_ok, Some(true));
    assert_eq!(r.exit_code, Some(0));
    assert!(r.signatures.is_empty());
    assert!(r.run_log.as_deref().unwrap().contains("ALL TESTS PASS"));

    let build = dir.path().join(&r.build_dir);
    for f in ["dut.cpp", "tb.cpp", "sim.bin", "compile.log", "run.log"] {
        assert!(build.join(f).exists(), "missing {f}");
    }
    assert_eq!(std::fs::read_to_string(build.join("run.log")).unwrap(), r.run_log.clone().unwrap());
}

#[test]
fn missing_semicolon_points_at_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let (m, t) = pair("sim/missing_semicolon_dut.cpp", "sim/ok_tb.cpp");
    let r = common::cxx(dir.path()).simulate("s", &m, &t).unwrap();
    assert!(!r.compile_ok);
    assert_eq!(r.run_ok, None);
    assert_eq!(r.run_log, None);
    let first = &r.signatures[0];
    assert_eq!(first.kind, SignatureKind::CompileError);
    assert_eq!(first.file, "dut.cpp");
    assert_eq!(first.line, Some(2));
    assert!(r.compile_log.lines().any(|l| l == first.message));

    // Pinned against GCC's diagnostic format; other compilers word it differently.
    let golden = common::read("sim/missing_semicolon.golden.txt");
    if r.compile_log.contains(golden.trim_end()) {
        assert_eq!(first.message, golden.trim_end());
    }
}

#[test]
fn assertion_line_is_captured_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let (m, t) = pair("sim/ok_dut.cpp", "sim/assert_tb.cpp");
    let r = common::cxx(dir.path()).simulate("s", &m, &t).unwrap();
    assert!(r.compile_ok);
    assert_eq!(r.run_ok, Some(false));
    let s = &r.signatures[0];
    assert_eq!(s.kind, SignatureKind::AssertionFail);
    assert_eq!(s.message, "ASSERT FAIL: counter mismatch at t=5");
    assert_eq!(r.count_by_kind(SignatureKind::Crash), 0);
}

#[test]
fn hanging_run_is_killed_at_the_deadline() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ToolchainConfig::profile("cxx", dir.path()).unwrap();
    cfg.timeout_s = 1;
    let sim = Simulator::new(cfg).unwrap();
    let (m, t) = pair("sim/ok_dut.cpp", "sim/hang_tb.cpp");
    let compiled = sim.compile("s", &m, &t).unwrap();
    assert!(compiled.compile_ok);
    let start = Instant::now();
    let r = sim
        .run_simulation(compiled, &coevo_core::sim::ArtifactNames::new("dut.cpp", "tb.cpp"))
        .unwrap();
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() <= 2.0, "took {elapsed:?}");
    assert_eq!(r.run_ok, Some(false));
    assert_eq!(r.count_by_kind(SignatureKind::Timeout), 1);
    assert!(r.run_log.unwrap().contains("spinning"));
}

#[test]
fn child_sees_only_allowlisted_variables() {
    std::env::set_var("COEVO_TEST_SECRET_TOKEN", "hunter2");
    let dir = tempfile::tempdir().unwrap();
    let (m, t) = pair("sim/ok_dut.cpp", "sim/env_tb.cpp");
    let sim = common::cxx(dir.path());
    let r = sim.simulate("s", &m, &t).unwrap();
    let log = r.run_log.unwrap();
    let names: Vec<&str> = log
        .lines()
        .filter_map(|l| l.strip_prefix("ENV "))
        .map(|kv| kv.split('=').next().unwrap())
        .collect();
    assert!(!names.is_empty());
    for n in &names {
        assert!(sim.config().env_allowlist.iter().any(|a| a == n), "leaked {n}");
    }
    assert!(!log.contains("hunter2"));
}

#[test]
fn missing_compiler_is_a_misconfiguration() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ToolchainConfig::profile("cxx", dir.path()).unwrap();
    cfg.compile_cmd[0] = "definitely-not-a-compiler-xyz".into();
    let (m, t) = pair("sim/ok_dut.cpp", "sim/ok_tb.cpp");
    let err = Simulator::new(cfg).unwrap().simulate("s", &m, &t).unwrap_err();
    assert!(matches!(err, SimError::ToolchainMisconfigured(_)), "{err}");
}

#[test]
fn compiling_twice_is_idempotent_up_to_timing() {
    let dir = tempfile::tempdir().unwrap();
    let sim = common::cxx(dir.path());
    for (model, tb) in [("sim/ok_dut.cpp", "sim/ok_tb.cpp"), ("sim/missing_semicolon_dut.cpp", "sim/ok_tb.cpp")] {
        let (m, t) = pair(model, tb);
        let a = sim.simulate("s", &m, &t).unwrap();
        let b = sim.simulate("s", &m, &t).unwrap();
        assert_eq!(a.without_timing(), b.without_timing());
    }
}

#[test]
fn reference_output_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let (m, t) = pair("sim/ok_dut.cpp", "sim/ok_tb.cpp");
    let ok = common::cxx(dir.path()).with_reference(common::read("sim/ok_expected.txt"));
    assert!(ok.simulate("s", &m, &t).unwrap().passed());
    let bad = common::cxx(dir.path()).with_reference("SOMETHING ELSE\n");
    let r = bad.simulate("s2", &m, &t).unwrap();
    assert_eq!(r.run_ok, Some(false));
    assert!(r.run_log.unwrap().contains("[sim-runner] REFERENCE MISMATCH"));
}

#[test]
fn signature_messages_are_log_lines() {
    let dir = tempfile::tempdir().unwrap();
    let sim = common::cxx(dir.path());
    for (model, tb) in [
        ("sim/missing_semicolon_dut.cpp", "sim/ok_tb.cpp"),
        ("sim/ok_dut.cpp", "sim/assert_tb.cpp"),
    ] {
        let (m, t) = pair(model, tb);
        let r = sim.simulate("s", &m, &t).unwrap();
        for s in &r.signatures {
            assert!(r.primary_log().lines().any(|l| l == s.message), "{}", s.message);
        }
    }
}
