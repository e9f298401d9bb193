//! Simulation environment: compiles a model/testbench pair with a
//! configurable toolchain, runs the binary, and turns the captured logs into
//! structured error signatures.
//!
//! Build layout: `{workdir}/{session_id}/m{model_rev}-t{tb_rev}/` holds both
//! sources, the binary, `compile.log` and `run.log`.

mod process;
mod signature;

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::Artifact;

pub use process::{append_runner_line, run_captured, Captured, Termination, MAX_LOG_BYTES};
pub use signature::{
    extract_signatures, is_failure_line, ArtifactNames, ErrorSignature, SignatureKind, MAX_SIGNATURES, RUNNER_FILE,
    RUNNER_PREFIX,
};

const BINARY_NAME: &str = "sim.bin";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("toolchain misconfigured: {0}")]
    ToolchainMisconfigured(String),
    #[error("workdir error at {path}: {source}")]
    WorkdirError {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn workdir_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::WorkdirError {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolchainConfig {
    pub compile_cmd: Vec<String>,
    pub run_cmd: Vec<String>,
    pub workdir: PathBuf,
    pub timeout_s: u64,
    #[serde(default)]
    pub env_allowlist: Vec<String>,
}

impl ToolchainConfig {
    pub const PROFILES: [&'static str; 2] = ["cxx", "systemc"];

    /// Builtin profiles. `cxx` needs only a C++17 compiler on PATH; `systemc`
    /// expects `SYSTEMC_HOME` to point at an installed SystemC tree.
    pub fn profile(name: &str, workdir: impl Into<PathBuf>) -> Option<Self> {
        let argv = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let workdir = workdir.into();
        match name {
            "cxx" => Some(ToolchainConfig {
                compile_cmd: argv(&["c++", "-std=c++17", "-O0", "-include", "{model}", "{tb}", "-o", "{out}"]),
                run_cmd: argv(&["{out}"]),
                workdir,
                timeout_s: 20,
                env_allowlist: argv(&["PATH", "HOME", "TMPDIR"]),
            }),
            "systemc" => Some(ToolchainConfig {
                compile_cmd: argv(&[
                    "sh",
                    "-c",
                    "c++ -std=c++17 -I\"$SYSTEMC_HOME/include\" -include {model} {tb} \
                     -L\"$SYSTEMC_HOME/lib\" -lsystemc -Wl,-rpath,\"$SYSTEMC_HOME/lib\" -o {out}",
                ]),
                run_cmd: argv(&["{out}"]),
                workdir,
                timeout_s: 60,
                env_allowlist: argv(&["PATH", "HOME", "TMPDIR", "SYSTEMC_HOME", "LD_LIBRARY_PATH"]),
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let has = |argv: &[String], p: &str| argv.iter().any(|a| a.contains(p));
        if self.compile_cmd.is_empty() || self.run_cmd.is_empty() {
            return Err(SimError::ToolchainMisconfigured("empty command template".into()));
        }
        for p in ["{model}", "{tb}", "{out}"] {
            if !has(&self.compile_cmd, p) {
                return Err(SimError::ToolchainMisconfigured(format!("compile_cmd lacks {p}")));
            }
        }
        if !has(&self.run_cmd, "{out}") {
            return Err(SimError::ToolchainMisconfigured("run_cmd lacks {out}".into()));
        }
        if self.timeout_s < 1 {
            return Err(SimError::ToolchainMisconfigured("timeout_s must be at least 1".into()));
        }
        Ok(())
    }

    fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_s)
    }
}

fn substitute(argv: &[String], model: &str, tb: &str, out: &str) -> Vec<String> {
    argv.iter()
        .map(|a| a.replace("{model}", model).replace("{tb}", tb).replace("{out}", out))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseDurations {
    pub compile_ms: u64,
    #[serde(default)]
    pub run_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub compile_ok: bool,
    pub compile_log: String,
    pub run_ok: Option<bool>,
    pub run_log: Option<String>,
    pub exit_code: Option<i32>,
    pub duration_ms: PhaseDurations,
    pub signatures: Vec<ErrorSignature>,
    /// Build directory relative to the toolchain workdir.
    pub build_dir: PathBuf,
}

impl SimReport {
    /// True when the pair compiled and the run passed.
    pub fn passed(&self) -> bool {
        self.compile_ok && self.run_ok == Some(true)
    }

    /// True when the run phase has happened (or compilation failed).
    pub fn is_complete(&self) -> bool {
        !self.compile_ok || self.run_ok.is_some()
    }

    /// The log the arbiter reads: the run log when present, else the compile log.
    pub fn primary_log(&self) -> &str {
        self.run_log.as_deref().unwrap_or(&self.compile_log)
    }

    pub fn count_by_kind(&self, kind: SignatureKind) -> usize {
        self.signatures.iter().filter(|s| s.kind == kind).count()
    }

    /// Copy with durations zeroed, for comparisons that ignore timing.
    pub fn without_timing(&self) -> SimReport {
        SimReport {
            duration_ms: PhaseDurations {
                compile_ms: 0,
                run_ms: self.duration_ms.run_ms.map(|_| 0),
            },
            ..self.clone()
        }
    }
}

/// Anything able to turn an artifact pair into a complete report. The
/// process-backed [`Simulator`] is the production implementation.
pub trait SimBackend: Send + Sync {
    fn simulate(&self, session_id: &str, model: &Artifact, tb: &Artifact) -> Result<SimReport, SimError>;
}

#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: ToolchainConfig,
    reference: Option<String>,
}

impl Simulator {
    pub fn new(cfg: ToolchainConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        Ok(Simulator { cfg, reference: None })
    }

    /// Expected stdout of a passing run. When set, a run that exits cleanly
    /// but prints anything else is reported as a failure.
    pub fn with_reference(mut self, expected: impl Into<String>) -> Self {
        self.reference = Some(expected.into());
        self
    }

    pub fn config(&self) -> &ToolchainConfig {
        &self.cfg
    }

    fn resolve(&self, build_dir: &Path) -> Result<PathBuf, SimError> {
        let dir = self.cfg.workdir.join(build_dir);
        dir.canonicalize().map_err(workdir_err(&dir))
    }

    pub fn compile(&self, session_id: &str, model: &Artifact, tb: &Artifact) -> Result<SimReport, SimError> {
        if model.filename == tb.filename {
            return Err(SimError::ToolchainMisconfigured("model and testbench share a filename".into()));
        }
        let build_dir = Path::new(session_id).join(format!("m{}-t{}", model.revision, tb.revision));
        let unresolved = self.cfg.workdir.join(&build_dir);
        std::fs::create_dir_all(&unresolved).map_err(workdir_err(&unresolved))?;
        let dir = self.resolve(&build_dir)?;
        for a in [model, tb] {
            let p = dir.join(&a.filename);
            std::fs::write(&p, &a.content).map_err(workdir_err(&p))?;
        }
        let out = dir.join(BINARY_NAME);
        let _ = std::fs::remove_file(&out);
        let argv = substitute(&self.cfg.compile_cmd, &model.filename, &tb.filename, &out.to_string_lossy());
        let log_path = dir.join("compile.log");
        let captured = match run_captured(&argv, &dir, &self.cfg.env_allowlist, self.cfg.timeout(), &log_path) {
            Ok(c) => c,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(SimError::ToolchainMisconfigured(format!("compiler `{}` not found", argv[0])));
            }
            Err(e) => return Err(workdir_err(&log_path)(e)),
        };

        let mut log = captured.log;
        let compile_ok = match captured.termination {
            Termination::Exited(0) => true,
            Termination::TimedOut => {
                let line = format!("{RUNNER_PREFIX} TIMEOUT: compile phase exceeded {} s", self.cfg.timeout_s);
                append_runner_line(&mut log, &log_path, &line).map_err(workdir_err(&log_path))?;
                false
            }
            Termination::Exited(_) | Termination::Signaled(_) => false,
        };
        let names = ArtifactNames::new(&model.filename, &tb.filename);
        let mut signatures = Vec::new();
        if !compile_ok {
            signatures = extract_signatures(&log, &names);
            if signatures.is_empty() {
                let line = format!("{RUNNER_PREFIX} COMPILE FAILED: {}", describe(captured.termination));
                append_runner_line(&mut log, &log_path, &line).map_err(workdir_err(&log_path))?;
                signatures = extract_signatures(&log, &names);
            }
        }
        Ok(SimReport {
            compile_ok,
            compile_log: log,
            run_ok: None,
            run_log: None,
            exit_code: None,
            duration_ms: PhaseDurations {
                compile_ms: captured.duration.as_millis() as u64,
                run_ms: None,
            },
            signatures,
            build_dir,
        })
    }

    /// Runs a compiled pair. Reports whose compilation failed are returned
    /// unchanged.
    pub fn run_simulation(&self, report: SimReport, names: &ArtifactNames) -> Result<SimReport, SimError> {
        if !report.compile_ok {
            return Ok(report);
        }
        let dir = self.resolve(&report.build_dir)?;
        let out = dir.join(BINARY_NAME);
        let argv = substitute(&self.cfg.run_cmd, &names.model, &names.tb, &out.to_string_lossy());
        let log_path = dir.join("run.log");
        let captured = run_captured(&argv, &dir, &self.cfg.env_allowlist, self.cfg.timeout(), &log_path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => {
                    SimError::ToolchainMisconfigured(format!("run command `{}` not found", argv[0]))
                }
                _ => workdir_err(&log_path)(e),
            })?;

        let mut log = captured.log;
        let reported_failure = log.lines().any(is_failure_line);
        let mut runner_lines = Vec::new();
        let exit_code = match captured.termination {
            Termination::Exited(code) => {
                if code != 0 && !reported_failure {
                    runner_lines.push(format!("{RUNNER_PREFIX} CRASH: exited with status {code}"));
                }
                Some(code)
            }
            Termination::Signaled(sig) => {
                runner_lines.push(format!("{RUNNER_PREFIX} CRASH: killed by signal {sig}"));
                None
            }
            Termination::TimedOut => {
                runner_lines.push(format!("{RUNNER_PREFIX} TIMEOUT: run phase exceeded {} s", self.cfg.timeout_s));
                None
            }
        };
        if runner_lines.is_empty() && !reported_failure {
            if let Some(expected) = &self.reference {
                if let Some(n) = first_difference(&log, expected) {
                    runner_lines.push(format!("{RUNNER_PREFIX} REFERENCE MISMATCH: output differs at line {n}"));
                }
            }
        }
        for line in &runner_lines {
            append_runner_line(&mut log, &log_path, line).map_err(workdir_err(&log_path))?;
        }
        let run_ok = exit_code == Some(0) && !reported_failure && runner_lines.is_empty();
        let signatures = if run_ok { Vec::new() } else { extract_signatures(&log, names) };

        Ok(SimReport {
            run_ok: Some(run_ok),
            run_log: Some(log),
            exit_code,
            duration_ms: PhaseDurations {
                run_ms: Some(captured.duration.as_millis() as u64),
                ..report.duration_ms
            },
            signatures,
            ..report
        })
    }
}

impl SimBackend for Simulator {
    fn simulate(&self, session_id: &str, model: &Artifact, tb: &Artifact) -> Result<SimReport, SimError> {
        let report = self.compile(session_id, model, tb)?;
        self.run_simulation(report, &ArtifactNames::new(&model.filename, &tb.filename))
    }
}

fn describe(t: Termination) -> String {
    match t {
        Termination::Exited(code) => format!("compiler exited with status {code}"),
        Termination::Signaled(sig) => format!("compiler killed by signal {sig}"),
        Termination::TimedOut => "compiler timed out".into(),
    }
}

/// 1-based line number of the first difference, ignoring trailing whitespace
/// on each line and trailing blank lines.
fn first_difference(actual: &str, expected: &str) -> Option<usize> {
    let norm = |s: &str| {
        let mut v: Vec<String> = s.lines().map(|l| l.trim_end().to_owned()).collect();
        while v.last().is_some_and(|l| l.is_empty()) {
            v.pop();
        }
        v
    };
    let (a, e) = (norm(actual), norm(expected));
    (0..a.len().max(e.len())).find(|&i| a.get(i) != e.get(i)).map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_validate() {
        for name in ToolchainConfig::PROFILES {
            ToolchainConfig::profile(name, "/tmp").unwrap().validate().unwrap();
        }
        assert!(ToolchainConfig::profile("verilator", "/tmp").is_none());
    }

    #[test]
    fn missing_placeholder_is_rejected() {
        let mut cfg = ToolchainConfig::profile("cxx", "/tmp").unwrap();
        cfg.compile_cmd.retain(|a| a != "{tb}");
        assert!(matches!(cfg.validate(), Err(SimError::ToolchainMisconfigured(m)) if m.contains("{tb}")));
        let mut cfg = ToolchainConfig::profile("cxx", "/tmp").unwrap();
        cfg.timeout_s = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn reference_difference() {
        assert_eq!(first_difference("a\nb\n", "a\nb"), None);
        assert_eq!(first_difference("a  \nb\n\n", "a\nb\n"), None);
        assert_eq!(first_difference("a\nc\n", "a\nb\n"), Some(2));
        assert_eq!(first_difference("a\n", "a\nb\n"), Some(2));
    }
}
