//! Agents 2 to 4: prompt templates, the text-completion provider abstraction
//! (scripted mock and HTTP), and strict parsing of agent replies into
//! artifacts and verdicts.
//!
//! Nothing in this module touches the filesystem after construction or
//! spawns processes.

mod agents;
mod provider;
mod templates;
mod verdict;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{AgentRole, RoutingPath};

pub use agents::{
    extract_code_block, Agents, Arbitration, ArtifactContext, CallRecord, Generation,
    GenerationSettings, MODEL_FILENAME, TB_FILENAME,
};
pub use provider::{
    build_provider, HttpProvider, MockProvider, Provider, ProviderConfig, ProviderKind, RetryPolicy, ScriptEntry,
    DEFAULT_API_KEY_ENV,
};
pub(crate) use agents::describe_sim;
pub use templates::{TemplateError, Templates, TEMPLATE_VERSION};
pub use verdict::{parse_verdict, VERDICT_SCHEMA_REMINDER};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("mock script has no remaining `{role}` response")]
    ScriptExhausted { role: AgentRole },
    #[error("transport error after {attempts} attempt(s): {message}")]
    TransportError { attempts: u32, message: String },
    #[error("malformed provider response: {0}")]
    MalformedProviderResponse(String),
    #[error("response contains no fenced code block")]
    NoCodeBlockInResponse,
    #[error("response contains {0} fenced code blocks where exactly one is required")]
    MultipleCodeBlocks(usize),
    #[error("policy violation: {0}")]
    PolicyViolation(String),
    #[error("verdict parse error: {0}")]
    VerdictParseError(String),
    #[error("inconsistent verdict: {0}")]
    InconsistentVerdict(String),
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
    #[error("execution plan has no {0} task")]
    MissingTask(&'static str),
    #[error("simulation report is incomplete")]
    IncompleteSimReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub role: AgentRole,
    pub max_output_tokens: u32,
    pub temperature_hint: f64,
    /// The newest tool output the request reacts to, when there is one. It
    /// is already part of `prompt`; scripted providers match conditions
    /// against it so that stale history cannot trigger them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<String>,
}

impl CompletionRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt.is_empty() {
            return Err(GatewayError::InvalidConfig("empty prompt".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature_hint) {
            return Err(GatewayError::InvalidConfig("temperature_hint must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetAgent {
    Modeler,
    Verifier,
    None,
}

impl TargetAgent {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetAgent::Modeler => "modeler",
            TargetAgent::Verifier => "verifier",
            TargetAgent::None => "none",
        }
    }
}

impl fmt::Display for TargetAgent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetAgent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "modeler" => Ok(TargetAgent::Modeler),
            "verifier" => Ok(TargetAgent::Verifier),
            "none" => Ok(TargetAgent::None),
            other => Err(format!("unknown target agent `{other}`")),
        }
    }
}

/// Routing decision of the arbiter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VerdictRepr")]
pub struct ArbiterVerdict {
    pub path: RoutingPath,
    pub target_agent: TargetAgent,
    pub defect_summary: String,
    pub violated_constraints: Vec<String>,
    pub confidence_note: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct VerdictRepr {
    path: RoutingPath,
    target_agent: TargetAgent,
    defect_summary: String,
    violated_constraints: Vec<String>,
    confidence_note: String,
}

impl VerdictRepr {
    pub(crate) fn unchecked(self) -> ArbiterVerdict {
        ArbiterVerdict {
            path: self.path,
            target_agent: self.target_agent,
            defect_summary: self.defect_summary,
            violated_constraints: self.violated_constraints,
            confidence_note: self.confidence_note,
        }
    }
}

impl TryFrom<VerdictRepr> for ArbiterVerdict {
    type Error = GatewayError;

    fn try_from(r: VerdictRepr) -> Result<Self, Self::Error> {
        let v = r.unchecked();
        v.check_invariants()?;
        Ok(v)
    }
}

impl ArbiterVerdict {
    /// Path/target agreement and the empty-violations rule for success.
    pub fn check_invariants(&self) -> Result<(), GatewayError> {
        use RoutingPath::*;
        let ok = match self.path {
            DesignRefinement => self.target_agent == TargetAgent::Modeler,
            TbRealignment => self.target_agent == TargetAgent::Verifier,
            Success => self.target_agent == TargetAgent::None,
            SyntaxRepair => self.target_agent != TargetAgent::None,
        };
        if !ok {
            return Err(GatewayError::InconsistentVerdict(format!(
                "path {} cannot target {}",
                self.path, self.target_agent
            )));
        }
        if self.path == Success && !self.violated_constraints.is_empty() {
            return Err(GatewayError::InconsistentVerdict(
                "success verdict lists violated constraints".into(),
            ));
        }
        Ok(())
    }

    /// One-line rendering used for workspace turns and summaries.
    pub fn turn_text(&self) -> String {
        let mut s = format!("VERDICT: {} -> {}\n{}", self.path, self.target_agent, self.defect_summary);
        if !self.violated_constraints.is_empty() {
            s.push_str(&format!("\nviolated: {}", self.violated_constraints.join(", ")));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn path_target_table() {
        use RoutingPath::*;
        use TargetAgent as T;
        let allowed = [
            (SyntaxRepair, T::Modeler),
            (SyntaxRepair, T::Verifier),
            (DesignRefinement, T::Modeler),
            (TbRealignment, T::Verifier),
            (Success, T::None),
        ];
        for p in RoutingPath::ALL {
            for t in [T::Modeler, T::Verifier, T::None] {
                assert_eq!(verdict(p, t).check_invariants().is_ok(), allowed.contains(&(p, t)), "{p} {t}");
            }
        }
    }

    #[test]
    fn verdict_round_trips() {
        let mut v = verdict(RoutingPath::DesignRefinement, TargetAgent::Modeler);
        v.violated_constraints = vec!["C1".into()];
        let back: ArbiterVerdict = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
    }
}
