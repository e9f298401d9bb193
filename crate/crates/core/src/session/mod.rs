//! Shared domain types and serialization contracts.
//!
//! Everything here is an immutable value object. Records that cross module
//! boundaries are serialized into a line-delimited JSON transcript (see
//! [`transcript`]).

mod spec;
pub mod transcript;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::TokenLedger;
use crate::evo::IterationRecord;

pub use spec::{parse_spec, SpecFormat, SpecParseError, CONSTRAINT_MARKER};

/// Hex-encoded SHA-256 of `content`. Always 64 lowercase hex characters.
pub fn digest(content: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(content.as_ref()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintCategory {
    Interface,
    Register,
    Timing,
    Behavior,
}

impl ConstraintCategory {
    pub const ALL: [ConstraintCategory; 4] = [
        ConstraintCategory::Interface,
        ConstraintCategory::Register,
        ConstraintCategory::Timing,
        ConstraintCategory::Behavior,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintCategory::Interface => "interface",
            ConstraintCategory::Register => "register",
            ConstraintCategory::Timing => "timing",
            ConstraintCategory::Behavior => "behavior",
        }
    }
}

impl FromStr for ConstraintCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConstraintCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown constraint category `{s}`"))
    }
}

/// A critical design constraint quoted verbatim from the specification body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintItem {
    pub id: String,
    pub text: String,
    pub category: ConstraintCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    ModelCode,
    Testbench,
    Other,
}

impl AssetKind {
    /// The artifact kind this asset could stand in for, if any.
    pub fn artifact_kind(self) -> Option<ArtifactKind> {
        match self {
            AssetKind::ModelCode => Some(ArtifactKind::ReferenceModel),
            AssetKind::Testbench => Some(ArtifactKind::Testbench),
            AssetKind::Other => None,
        }
    }
}

impl FromStr for AssetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model_code" | "model" => Ok(AssetKind::ModelCode),
            "testbench" | "tb" => Ok(AssetKind::Testbench),
            "other" => Ok(AssetKind::Other),
            _ => Err(format!("unknown asset kind `{s}`")),
        }
    }
}

/// A legacy asset offered for reuse.
///
/// `content` is carried alongside the reference so the asset evaluator can
/// stay a pure function; it is loaded once at ingestion time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRef {
    pub path: String,
    pub kind: AssetKind,
    pub content_digest: String,
    #[serde(default)]
    pub content: String,
}

impl AssetRef {
    pub fn new(path: impl Into<String>, kind: AssetKind, content: impl Into<String>) -> Self {
        let content = content.into();
        AssetRef {
            path: path.into(),
            kind,
            content_digest: digest(&content),
            content,
        }
    }
}

/// The immutable specification document plus its extracted constraint list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub spec_id: String,
    pub title: String,
    pub body: String,
    pub constraints: Vec<ConstraintItem>,
    #[serde(default)]
    pub legacy_assets: Vec<AssetRef>,
}

impl DesignSpec {
    pub fn with_assets(mut self, assets: Vec<AssetRef>) -> Self {
        self.legacy_assets = assets;
        self
    }

    pub fn constraint(&self, id: &str) -> Option<&ConstraintItem> {
        self.constraints.iter().find(|c| c.id == id)
    }

    pub fn has_category(&self, category: ConstraintCategory) -> bool {
        self.constraints.iter().any(|c| c.category == category)
    }

    /// Renders the spec back to a document. The body is the full source
    /// document, so this is the identity on parsed input.
    pub fn render(&self) -> &str {
        &self.body
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    ReferenceModel,
    Testbench,
}

impl ArtifactKind {
    pub fn producer(self) -> Producer {
        match self {
            ArtifactKind::ReferenceModel => Producer::Modeler,
            ArtifactKind::Testbench => Producer::Verifier,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Producer {
    Modeler,
    Verifier,
}

/// Generated source for either the reference model or the testbench.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub kind: ArtifactKind,
    pub filename: String,
    pub content: String,
    pub revision: u32,
    pub produced_by: Producer,
}

impl Artifact {
    /// First revision of an artifact. The producer follows from the kind.
    pub fn initial(kind: ArtifactKind, filename: impl Into<String>, content: impl Into<String>) -> Self {
        Artifact {
            kind,
            filename: filename.into(),
            content: content.into(),
            revision: 1,
            produced_by: kind.producer(),
        }
    }

    /// Next revision of the same artifact with new content.
    pub fn regenerate(&self, content: impl Into<String>) -> Self {
        Artifact {
            content: content.into(),
            revision: self.revision + 1,
            ..self.clone()
        }
    }

    pub fn digest(&self) -> String {
        digest(&self.content)
    }
}

/// Participant that produced a turn of the session history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Planner,
    Modeler,
    Verifier,
    Arbiter,
    Tool,
}

impl AgentRole {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Planner => "planner",
            AgentRole::Modeler => "modeler",
            AgentRole::Verifier => "verifier",
            AgentRole::Arbiter => "arbiter",
            AgentRole::Tool => "tool",
        }
    }
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "planner" => Ok(AgentRole::Planner),
            "modeler" => Ok(AgentRole::Modeler),
            "verifier" => Ok(AgentRole::Verifier),
            "arbiter" => Ok(AgentRole::Arbiter),
            "tool" => Ok(AgentRole::Tool),
            _ => Err(format!("unknown agent role `{s}`")),
        }
    }
}

/// The four arbiter routing paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingPath {
    SyntaxRepair,
    DesignRefinement,
    TbRealignment,
    Success,
}

impl RoutingPath {
    pub const ALL: [RoutingPath; 4] = [
        RoutingPath::SyntaxRepair,
        RoutingPath::DesignRefinement,
        RoutingPath::TbRealignment,
        RoutingPath::Success,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoutingPath::SyntaxRepair => "syntax_repair",
            RoutingPath::DesignRefinement => "design_refinement",
            RoutingPath::TbRealignment => "tb_realignment",
            RoutingPath::Success => "success",
        }
    }
}

impl fmt::Display for RoutingPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoutingPath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RoutingPath::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown routing path `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Naive,
    FlowOnly,
    FixedTb,
    Refevo,
}

impl PolicyName {
    pub const ALL: [PolicyName; 4] = [
        PolicyName::Naive,
        PolicyName::FlowOnly,
        PolicyName::FixedTb,
        PolicyName::Refevo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Naive => "naive",
            PolicyName::FlowOnly => "flow_only",
            PolicyName::FixedTb => "fixed_tb",
            PolicyName::Refevo => "refevo",
        }
    }
}

impl fmt::Display for PolicyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyName {
    type Err = String;

    /// Accepts both the serialized names and the command-line spellings
    /// (`flow`, `fixed-tb`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(PolicyName::Naive),
            "flow" | "flow_only" | "flow-only" => Ok(PolicyName::FlowOnly),
            "fixed-tb" | "fixed_tb" => Ok(PolicyName::FixedTb),
            "refevo" => Ok(PolicyName::Refevo),
            _ => Err(format!(
                "unknown mode `{s}` (expected naive, flow, fixed-tb or refevo)"
            )),
        }
    }
}

/// Experimental mode governing iteration and testbench mutability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "LoopPolicyRepr")]
pub struct LoopPolicy {
    name: PolicyName,
    allow_iteration: bool,
    allow_tb_modification: bool,
}

#[derive(Deserialize)]
struct LoopPolicyRepr {
    name: PolicyName,
    allow_iteration: bool,
    allow_tb_modification: bool,
}

impl TryFrom<LoopPolicyRepr> for LoopPolicy {
    type Error = String;

    fn try_from(repr: LoopPolicyRepr) -> Result<Self, Self::Error> {
        let policy = LoopPolicy::new(repr.name);
        if policy.allow_iteration != repr.allow_iteration
            || policy.allow_tb_modification != repr.allow_tb_modification
        {
            return Err(format!("inconsistent flags for loop policy `{}`", repr.name));
        }
        Ok(policy)
    }
}

impl LoopPolicy {
    pub fn new(name: PolicyName) -> Self {
        let (allow_iteration, allow_tb_modification) = match name {
            PolicyName::Naive | PolicyName::FlowOnly => (false, false),
            PolicyName::FixedTb => (true, false),
            PolicyName::Refevo => (true, true),
        };
        LoopPolicy {
            name,
            allow_iteration,
            allow_tb_modification,
        }
    }

    pub fn naive() -> Self {
        Self::new(PolicyName::Naive)
    }
    pub fn flow_only() -> Self {
        Self::new(PolicyName::FlowOnly)
    }
    pub fn fixed_tb() -> Self {
        Self::new(PolicyName::FixedTb)
    }
    pub fn refevo() -> Self {
        Self::new(PolicyName::Refevo)
    }

    pub fn name(&self) -> PolicyName {
        self.name
    }
    pub fn allow_iteration(&self) -> bool {
        self.allow_iteration
    }
    pub fn allow_tb_modification(&self) -> bool {
        self.allow_tb_modification
    }
}

impl FromStr for LoopPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(LoopPolicy::new)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Success,
    CompileFail,
    FuncFail,
    BudgetExhausted,
}

impl OutcomeStatus {
    pub const ALL: [OutcomeStatus; 4] = [
        OutcomeStatus::Success,
        OutcomeStatus::CompileFail,
        OutcomeStatus::FuncFail,
        OutcomeStatus::BudgetExhausted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeStatus::Success => "success",
            OutcomeStatus::CompileFail => "compile_fail",
            OutcomeStatus::FuncFail => "func_fail",
            OutcomeStatus::BudgetExhausted => "budget_exhausted",
        }
    }
}

impl fmt::Display for OutcomeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The verified model and testbench pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenPair {
    pub model: Artifact,
    pub testbench: Artifact,
}

/// Terminal record of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub spec_id: String,
    pub status: OutcomeStatus,
    pub golden: Option<GoldenPair>,
    pub iterations: Vec<IterationRecord>,
    pub token_ledger: TokenLedger,
    pub mode: LoopPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SessionOutcome {
    pub fn is_success(&self) -> bool {
        self.status == OutcomeStatus::Success
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_pinned_for_empty_input() {
        // SHA-256 of the empty string.
        assert_eq!(
            digest(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(digest(b"abc"), digest("abc"));
        assert_ne!(digest("a"), digest("b"));
        assert_eq!(digest("x").len(), 64);
    }

    #[test]
    fn policy_table() {
        let naive = LoopPolicy::naive();
        assert!(!naive.allow_iteration());
        let fixed = LoopPolicy::fixed_tb();
        assert!(fixed.allow_iteration() && !fixed.allow_tb_modification());
        let refevo = LoopPolicy::refevo();
        assert!(refevo.allow_iteration() && refevo.allow_tb_modification());
        assert!(!LoopPolicy::flow_only().allow_iteration());
    }

    #[test]
    fn policy_names_parse_cli_and_serde_spellings() {
        assert_eq!("fixed-tb".parse::<PolicyName>(), Ok(PolicyName::FixedTb));
        assert_eq!("fixed_tb".parse::<PolicyName>(), Ok(PolicyName::FixedTb));
        assert_eq!("flow".parse::<PolicyName>(), Ok(PolicyName::FlowOnly));
        assert!("turbo".parse::<PolicyName>().is_err());
    }

    #[test]
    fn inconsistent_policy_json_is_rejected() {
        let bad = r#"{"name":"fixed_tb","allow_iteration":true,"allow_tb_modification":true}"#;
        assert!(serde_json::from_str::<LoopPolicy>(bad).is_err());
        let good = serde_json::to_string(&LoopPolicy::fixed_tb()).unwrap();
        assert_eq!(serde_json::from_str::<LoopPolicy>(&good).unwrap(), LoopPolicy::fixed_tb());
    }

    #[test]
    fn regenerate_bumps_revision_and_keeps_producer() {
        let tb = Artifact::initial(ArtifactKind::Testbench, "tb.cpp", "int main(){}");
        assert_eq!(tb.revision, 1);
        assert_eq!(tb.produced_by, Producer::Verifier);
        let tb2 = tb.regenerate("int main(){return 0;}");
        assert_eq!(tb2.revision, 2);
        assert_eq!(tb2.produced_by, Producer::Verifier);
        assert_eq!(tb2.filename, "tb.cpp");
    }
}
