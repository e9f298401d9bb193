//! Line-delimited JSON session transcript. Every line is one record tagged
//! by `record_type`.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DesignSpec, OutcomeStatus, RoutingPath};
use crate::context::{ContextConfig, Turn};
use crate::gateway::{ArbiterVerdict, CallRecord};
use crate::planner::ExecutionPlan;
use crate::sim::SimReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record_type", rename_all = "snake_case")]
pub enum TranscriptRecord {
    Spec {
        spec: DesignSpec,
    },
    Plan {
        plan: ExecutionPlan,
    },
    ContextConfig {
        config: ContextConfig,
    },
    Turn {
        turn: Turn,
    },
    Call {
        round: u32,
        call: CallRecord,
    },
    Sim {
        round: u32,
        model_revision: u32,
        tb_revision: u32,
        report: SimReport,
    },
    Verdict {
        round: u32,
        verdict: ArbiterVerdict,
        prefiltered: bool,
    },
    Route {
        round: u32,
        path: RoutingPath,
        blocked: bool,
    },
    Outcome {
        status: OutcomeStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
}

impl TranscriptRecord {
    pub fn record_type(&self) -> &'static str {
        match self {
            TranscriptRecord::Spec { .. } => "spec",
            TranscriptRecord::Plan { .. } => "plan",
            TranscriptRecord::ContextConfig { .. } => "context_config",
            TranscriptRecord::Turn { .. } => "turn",
            TranscriptRecord::Call { .. } => "call",
            TranscriptRecord::Sim { .. } => "sim",
            TranscriptRecord::Verdict { .. } => "verdict",
            TranscriptRecord::Route { .. } => "route",
            TranscriptRecord::Outcome { .. } => "outcome",
        }
    }
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TranscriptRecord) {
        self.records.push(record);
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("transcript records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.to_jsonl().as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), TranscriptError> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    /// Parses JSONL; blank lines are skipped.
    pub fn from_reader(r: impl BufRead) -> Result<Self, TranscriptError> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line).map_err(|e| TranscriptError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Ok(Transcript { records })
    }

    pub fn parse(text: &str) -> Result<Self, TranscriptError> {
        Self::from_reader(text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, TranscriptError> {
        let f = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(f))
    }

    pub fn spec(&self) -> Option<&DesignSpec> {
        self.records.iter().find_map(|r| match r {
            TranscriptRecord::Spec { spec } => Some(spec),
            _ => None,
        })
    }

    pub fn turns(&self) -> impl Iterator<Item = &Turn> {
        self.records.iter().filter_map(|r| match r {
            TranscriptRecord::Turn { turn } => Some(turn),
            _ => None,
        })
    }
}
