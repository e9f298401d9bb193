use serde::{Deserialize, Serialize};

use super::replay::replay;
use super::AnalyticsError;
use crate::context::TokenCount;
use crate::session::transcript::Transcript;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecall {
    pub spec_id: String,
    pub rounds: usize,
    pub anchored_min: f64,
    pub baseline_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    /// Token budget of the sliding-window baseline; absent means unlimited.
    pub baseline_budget: Option<TokenCount>,
    pub transcripts: Vec<TranscriptRecall>,
    pub anchored_min: f64,
    pub baseline_min: f64,
}

impl RecallReport {
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<24} {:>6} {:>10} {:>10}\n", "spec", "rounds", "anchored", "baseline");
        for t in &self.transcripts {
            s.push_str(&format!(
                "{:<24} {:>6} {:>10.3} {:>10.3}\n",
                t.spec_id, t.rounds, t.anchored_min, t.baseline_min
            ));
        }
        s.push_str(&format!(
            "{:<24} {:>6} {:>10.3} {:>10.3}\n",
            "minimum", "", self.anchored_min, self.baseline_min
        ));
        s
    }
}

/// Minimum recall at every round under the anchored window and a sliding
/// window of `baseline_budget` tokens. A transcript without rounds is
/// measured once on the bare spec.
pub fn recall_report(
    transcripts: &[Transcript],
    baseline_budget: Option<TokenCount>,
) -> Result<RecallReport, AnalyticsError> {
    let mut rows = Vec::new();
    for t in transcripts {
        let r = replay(t)?;
        let baseline = r.baseline_recall(baseline_budget);
        let min = |v: &[f64]| v.iter().copied().fold(1.0_f64, f64::min);
        rows.push(TranscriptRecall {
            spec_id: r.spec.spec_id.clone(),
            rounds: r.anchored_recall.len(),
            anchored_min: min(&r.anchored_recall),
            baseline_min: min(&baseline),
        });
    }
    Ok(RecallReport {
        baseline_budget,
        anchored_min: rows.iter().map(|r| r.anchored_min).fold(1.0, f64::min),
        baseline_min: rows.iter().map(|r| r.baseline_min).fold(1.0, f64::min),
        transcripts: rows,
    })
}
