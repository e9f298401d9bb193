use std::collections::HashSet;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Prefix of the lines the runner itself appends to captured logs.
pub const RUNNER_PREFIX: &str = "[sim-runner]";

/// Upper bound on signatures extracted from one log.
pub const MAX_SIGNATURES: usize = 10;

/// File attributed to signatures that come from the runner rather than from
/// a diagnostic naming a source file.
pub const RUNNER_FILE: &str = "<sim>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureKind {
    CompileError,
    LinkError,
    AssertionFail,
    Timeout,
    Crash,
}

impl SignatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SignatureKind::CompileError => "compile_error",
            SignatureKind::LinkError => "link_error",
            SignatureKind::AssertionFail => "assertion_fail",
            SignatureKind::Timeout => "timeout",
            SignatureKind::Crash => "crash",
        }
    }
}

/// Structured (file, line, kind, message) extraction from a log line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSignature {
    pub file: String,
    pub line: Option<u32>,
    pub kind: SignatureKind,
    /// The verbatim log line.
    pub message: String,
}

/// Source file names of the artifact pair, used to normalise diagnostic paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactNames {
    pub model: String,
    pub tb: String,
}

impl ArtifactNames {
    pub fn new(model: impl Into<String>, tb: impl Into<String>) -> Self {
        ArtifactNames {
            model: model.into(),
            tb: tb.into(),
        }
    }

    fn normalise(&self, path: &str) -> String {
        let base = Path::new(path).file_name().and_then(|b| b.to_str()).unwrap_or(path);
        if base == self.model || base == self.tb {
            base.to_owned()
        } else {
            path.to_owned()
        }
    }
}

static COMPILE_DIAG: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<file>[^\s:][^:]*):(?P<line>\d+):(?:\d+:)?\s*(?:fatal\s+)?error:").unwrap()
});
static LINK_DIAG: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?P<file>[^\s:]+):\([^)]*\):\s*undefined reference to").unwrap());
static LINKER_SUMMARY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:collect2|ld|/usr/bin/ld): error:").unwrap());
static LOCATED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?P<file>[\w./-]+):(?P<line>\d+):").unwrap());

/// Scans `log` for compiler diagnostics, linker errors, assertion failures
/// and runner-reported timeouts or crashes.
///
/// Signatures are deduplicated by `(file, line, kind)`, kept in order of first
/// occurrence, and capped at [`MAX_SIGNATURES`].
pub fn extract_signatures(log: &str, names: &ArtifactNames) -> Vec<ErrorSignature> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for line in log.lines() {
        let Some(sig) = classify(line, names) else {
            continue;
        };
        if seen.insert((sig.file.clone(), sig.line, sig.kind)) {
            out.push(sig);
            if out.len() == MAX_SIGNATURES {
                break;
            }
        }
    }
    out
}

fn classify(line: &str, names: &ArtifactNames) -> Option<ErrorSignature> {
    let sig = |file: String, lineno: Option<u32>, kind| ErrorSignature {
        file,
        line: lineno,
        kind,
        message: line.to_owned(),
    };

    if let Some(rest) = line.strip_prefix(RUNNER_PREFIX) {
        let rest = rest.trim_start();
        let kind = if rest.starts_with("TIMEOUT") {
            SignatureKind::Timeout
        } else if rest.starts_with("CRASH") {
            SignatureKind::Crash
        } else if rest.starts_with("COMPILE FAILED") {
            SignatureKind::CompileError
        } else if rest.starts_with("REFERENCE MISMATCH") {
            SignatureKind::AssertionFail
        } else {
            return None;
        };
        return Some(sig(RUNNER_FILE.to_owned(), None, kind));
    }
    if let Some(c) = COMPILE_DIAG.captures(line) {
        return Some(sig(names.normalise(&c["file"]), c["line"].parse().ok(), SignatureKind::CompileError));
    }
    if let Some(c) = LINK_DIAG.captures(line) {
        return Some(sig(names.normalise(&c["file"]), None, SignatureKind::LinkError));
    }
    if LINKER_SUMMARY.is_match(line) {
        return Some(sig("ld".to_owned(), None, SignatureKind::LinkError));
    }
    if line.contains("ASSERT FAIL:") || line.contains("Error:") {
        // Assertions come from the testbench unless the line names a source
        // location of one of the artifacts.
        let (file, lineno) = LOCATED
            .captures(line)
            .map(|c| (names.normalise(&c["file"]), c["line"].parse().ok()))
            .filter(|(f, _)| *f == names.model || *f == names.tb)
            .unwrap_or_else(|| (names.tb.clone(), None));
        return Some(sig(file, lineno, SignatureKind::AssertionFail));
    }
    None
}

/// True when `line` reports a functional failure during the run phase.
pub fn is_failure_line(line: &str) -> bool {
    line.contains("ASSERT FAIL:") || line.contains("Error:")
}
