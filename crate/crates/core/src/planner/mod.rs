//! Design planner: legacy asset reuse, rubric-based complexity scoring, and
//! the execution plan handed to the verification loop.
//!
//! Everything here is a pure function of its inputs.

mod plan;
mod rubric;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::session::{ArtifactKind, AssetRef, ConstraintCategory, DesignSpec};

pub use plan::{
    build_execution_plan, build_execution_plan_with, ExecutionPlan, PlanError, PlanFlag, PlannerConfig,
    ReusedAsset, TaskStep, TierLimits, PLAN_SCHEMA,
};
pub use rubric::{BonusRule, Dimension, Dimensions, KeywordClass, Rubric, RubricError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Simple,
    Medium,
    Complex,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Simple, Tier::Medium, Tier::Complex];

    /// Fixed thresholds over the summed dimension scores.
    pub fn from_sum(sum: u8) -> Tier {
        match sum {
            0..=2 => Tier::Simple,
            3..=5 => Tier::Medium,
            _ => Tier::Complex,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Simple => "simple",
            Tier::Medium => "medium",
            Tier::Complex => "complex",
        }
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr")]
pub struct ComplexityProfile {
    pub interface_score: u8,
    pub state_space_score: u8,
    pub concurrency_score: u8,
    pub tier: Tier,
}

#[derive(Deserialize)]
struct ProfileRepr {
    interface_score: u8,
    state_space_score: u8,
    concurrency_score: u8,
    tier: Tier,
}

impl TryFrom<ProfileRepr> for ComplexityProfile {
    type Error = String;

    fn try_from(r: ProfileRepr) -> Result<Self, Self::Error> {
        if r.interface_score > 3 || r.state_space_score > 3 || r.concurrency_score > 3 {
            return Err("complexity scores must lie in 0..=3".into());
        }
        let p = ComplexityProfile::from_scores(r.interface_score, r.state_space_score, r.concurrency_score);
        if p.tier != r.tier {
            return Err(format!("tier `{}` does not match score sum", r.tier));
        }
        Ok(p)
    }
}

impl ComplexityProfile {
    pub fn from_scores(interface: u8, state_space: u8, concurrency: u8) -> Self {
        ComplexityProfile {
            interface_score: interface,
            state_space_score: state_space,
            concurrency_score: concurrency,
            tier: Tier::from_sum(interface + state_space + concurrency),
        }
    }

    pub fn sum(&self) -> u8 {
        self.interface_score + self.state_space_score + self.concurrency_score
    }
}

/// Scores the spec with the builtin rubric.
pub fn analyze_complexity(spec: &DesignSpec) -> ComplexityProfile {
    analyze_complexity_with(spec, &Rubric::builtin())
}

pub fn analyze_complexity_with(spec: &DesignSpec, rubric: &Rubric) -> ComplexityProfile {
    let text = spec.body.to_lowercase();
    let d = &rubric.dimensions;
    ComplexityProfile::from_scores(
        d.interface.score(&text, spec),
        d.state_space.score(&text, spec),
        d.concurrency.score(&text, spec),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetReport {
    pub reusable: Vec<AssetRef>,
    /// Keyed by asset path.
    pub reuse_rationale: BTreeMap<String, String>,
    pub regenerate: Vec<ArtifactKind>,
}

impl AssetReport {
    pub fn reusable_for(&self, kind: ArtifactKind) -> Option<&AssetRef> {
        self.reusable.iter().find(|a| a.kind.artifact_kind() == Some(kind))
    }
}

/// Constraint categories whose keywords a reusable asset must contain.
fn categories_checked(kind: ArtifactKind) -> &'static [ConstraintCategory] {
    match kind {
        ArtifactKind::Testbench => &[ConstraintCategory::Interface],
        ArtifactKind::ReferenceModel => &[ConstraintCategory::Interface, ConstraintCategory::Register],
    }
}

const STOPWORDS: &[&str] = &[
    "the", "and", "for", "with", "must", "shall", "when", "then", "after", "before", "each", "every",
    "from", "into", "only", "that", "this", "are", "not", "all", "any", "one", "per", "its", "has",
    "have", "while", "within", "will", "should", "than", "over", "under", "both", "same", "upon",
];

/// Identifier-like words of the constraint texts in `categories`.
pub fn constraint_keywords(spec: &DesignSpec, categories: &[ConstraintCategory]) -> BTreeSet<String> {
    spec.constraints
        .iter()
        .filter(|c| categories.contains(&c.category))
        .flat_map(|c| words(&c.text))
        .filter(|w| w.len() >= 3 && !STOPWORDS.contains(&w.as_str()))
        .collect()
}

fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Decides which legacy assets can stand in for generated artifacts.
///
/// An asset is reusable iff its kind maps to a needed artifact and its
/// content contains every keyword of the constraints checked for that kind
/// (interface for testbenches; interface and register for models). At most
/// one asset is reused per kind; kinds without a reusable asset are listed
/// for regeneration.
pub fn evaluate_assets(spec: &DesignSpec) -> AssetReport {
    let mut reusable: Vec<AssetRef> = Vec::new();
    let mut rationale = BTreeMap::new();

    for asset in &spec.legacy_assets {
        let Some(kind) = asset.kind.artifact_kind() else {
            rationale.insert(asset.path.clone(), "kind `other` never stands in for an artifact".into());
            continue;
        };
        if reusable.iter().any(|a| a.kind == asset.kind) {
            rationale.insert(asset.path.clone(), "superseded by an earlier reusable asset of the same kind".into());
            continue;
        }
        let keywords = constraint_keywords(spec, categories_checked(kind));
        if keywords.is_empty() {
            rationale.insert(asset.path.clone(), "no constraint keywords to check the asset against".into());
            continue;
        }
        let present: BTreeSet<String> = words(&asset.content).collect();
        let missing: Vec<&str> = keywords.iter().filter(|k| !present.contains(*k)).map(String::as_str).collect();
        if missing.is_empty() {
            rationale.insert(
                asset.path.clone(),
                format!("covers all {} constraint keywords", keywords.len()),
            );
            reusable.push(asset.clone());
        } else {
            rationale.insert(asset.path.clone(), format!("missing keywords: {}", missing.join(", ")));
        }
    }

    let regenerate = [ArtifactKind::ReferenceModel, ArtifactKind::Testbench]
        .into_iter()
        .filter(|k| !reusable.iter().any(|a| a.kind.artifact_kind() == Some(*k)))
        .collect();
    AssetReport {
        reusable,
        reuse_rationale: rationale,
        regenerate,
    }
}
