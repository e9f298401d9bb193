use std::sync::LazyLock;

use regex::Regex;

use super::{TokenCount, Turn, VerdictTally};
use crate::session::RoutingPath;

static ERROR_SIGNATURE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(^\S+:\d+(?::\d+)?:\s*(?:fatal\s+)?error:)|ASSERT FAIL:|Error:|^\[sim-runner\]").unwrap()
});

static VERDICT_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^VERDICT:\s*(syntax_repair|design_refinement|tb_realignment|success)\b").unwrap()
});

/// Turns an evicted workspace turn into summary text of at most `line_max`
/// tokens.
pub trait Compressor: Send + Sync {
    fn summarize(&self, turn: &Turn, line_max: TokenCount) -> String;
}

/// Keeps the first non-blank line plus every line that looks like an error
/// signature or an arbiter verdict, truncated to the per-entry cap.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractiveCompressor;

impl Compressor for ExtractiveCompressor {
    fn summarize(&self, turn: &Turn, line_max: TokenCount) -> String {
        let mut lines = turn.content.lines().map(|l| l.trim_end_matches('\r'));
        let mut kept: Vec<&str> = Vec::new();
        if let Some(first) = lines.by_ref().find(|l| !l.trim().is_empty()) {
            kept.push(first);
        }
        kept.extend(lines.filter(|l| is_signature_line(l) || VERDICT_LINE.is_match(l)));
        truncate_to_bytes(kept.join("\n"), line_max.byte_capacity())
    }
}

pub(crate) fn is_signature_line(line: &str) -> bool {
    ERROR_SIGNATURE.is_match(line)
}

/// Counts `VERDICT: <path>` lines in `content`.
pub fn verdict_tally(content: &str) -> VerdictTally {
    let mut tally = VerdictTally::default();
    for line in content.lines() {
        if let Some(caps) = VERDICT_LINE.captures(line) {
            if let Ok(path) = caps[1].parse::<RoutingPath>() {
                tally.record(path);
            }
        }
    }
    tally
}

fn truncate_to_bytes(mut text: String, max: usize) -> String {
    if text.len() > max {
        let mut cut = max;
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        text.truncate(cut);
    }
    text
}
