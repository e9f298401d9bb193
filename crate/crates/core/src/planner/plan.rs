use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AssetReport, ComplexityProfile, Tier};
use crate::session::{ArtifactKind, ConstraintCategory, DesignSpec, LoopPolicy, PolicyName, Producer};

/// JSON schema every serialized [`ExecutionPlan`] validates against.
pub const PLAN_SCHEMA: &str = include_str!("../../data/plan.schema.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskStep {
    pub step_id: String,
    pub description: String,
    pub assigned_agent: Producer,
    #[serde(default)]
    pub depends_on: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReusedAsset {
    pub kind: ArtifactKind,
    pub path: String,
    pub content_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum PlanFlag {
    /// The policy cannot honour the decomposition the complexity demands.
    PolicyConflict { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PlanRepr")]
pub struct ExecutionPlan {
    pub plan_id: String,
    pub tasks: Vec<TaskStep>,
    pub complexity: ComplexityProfile,
    pub policy: LoopPolicy,
    pub max_iterations: u32,
    pub token_budget: u64,
    #[serde(default)]
    pub reused: Vec<ReusedAsset>,
    #[serde(default)]
    pub flags: Vec<PlanFlag>,
}

#[derive(Deserialize)]
struct PlanRepr {
    plan_id: String,
    tasks: Vec<TaskStep>,
    complexity: ComplexityProfile,
    policy: LoopPolicy,
    max_iterations: u32,
    token_budget: u64,
    #[serde(default)]
    reused: Vec<ReusedAsset>,
    #[serde(default)]
    flags: Vec<PlanFlag>,
}

impl TryFrom<PlanRepr> for ExecutionPlan {
    type Error = PlanError;

    fn try_from(r: PlanRepr) -> Result<Self, PlanError> {
        let plan = ExecutionPlan {
            plan_id: r.plan_id,
            tasks: r.tasks,
            complexity: r.complexity,
            policy: r.policy,
            max_iterations: r.max_iterations,
            token_budget: r.token_budget,
            reused: r.reused,
            flags: r.flags,
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("step `{step}` depends on `{dependency}`, which is not declared before it")]
    ForwardDependency { step: String, dependency: String },
    #[error("duplicate step id `{0}`")]
    DuplicateStep(String),
    #[error("max_iterations and token_budget must be positive")]
    NonPositiveLimit,
}

impl std::fmt::Display for PlanFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlanFlag::PolicyConflict { reason } => write!(f, "policy conflict: {reason}"),
        }
    }
}

impl ExecutionPlan {
    /// Dependencies must name earlier steps, which also rules out cycles.
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.max_iterations == 0 || self.token_budget == 0 {
            return Err(PlanError::NonPositiveLimit);
        }
        let mut declared = HashSet::new();
        for step in &self.tasks {
            for dep in &step.depends_on {
                if !declared.contains(dep.as_str()) {
                    return Err(PlanError::ForwardDependency {
                        step: step.step_id.clone(),
                        dependency: dep.clone(),
                    });
                }
            }
            if !declared.insert(step.step_id.as_str()) {
                return Err(PlanError::DuplicateStep(step.step_id.clone()));
            }
        }
        Ok(())
    }

    pub fn has_task_for(&self, agent: Producer) -> bool {
        self.tasks.iter().any(|t| t.assigned_agent == agent)
    }

    pub fn tasks_for(&self, agent: Producer) -> impl Iterator<Item = &TaskStep> {
        self.tasks.iter().filter(move |t| t.assigned_agent == agent)
    }

    pub fn reused(&self, kind: ArtifactKind) -> Option<&ReusedAsset> {
        self.reused.iter().find(|r| r.kind == kind)
    }

    pub fn policy_conflict(&self) -> bool {
        self.flags.iter().any(|f| matches!(f, PlanFlag::PolicyConflict { .. }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierLimits {
    pub max_iterations: u32,
    pub token_budget: u64,
}

/// Per-tier iteration caps and session token budgets. Tiers missing from a
/// config file keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub simple: TierLimits,
    pub medium: TierLimits,
    pub complex: TierLimits,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            simple: TierLimits {
                max_iterations: 4,
                token_budget: 60_000,
            },
            medium: TierLimits {
                max_iterations: 6,
                token_budget: 150_000,
            },
            complex: TierLimits {
                max_iterations: 10,
                token_budget: 400_000,
            },
        }
    }
}

impl PlannerConfig {
    pub fn limits(&self, tier: Tier) -> TierLimits {
        match tier {
            Tier::Simple => self.simple,
            Tier::Medium => self.medium,
            Tier::Complex => self.complex,
        }
    }
}

pub fn build_execution_plan(
    spec: &DesignSpec,
    profile: &ComplexityProfile,
    assets: &AssetReport,
    policy: LoopPolicy,
) -> ExecutionPlan {
    build_execution_plan_with(spec, profile, assets, policy, &PlannerConfig::default())
}

/// Builds the task decomposition for `profile.tier`.
///
/// Simple designs get one model and one testbench step. Medium designs add an
/// interface skeleton ahead of the model. Complex designs further add one
/// sub-block step per constraint category present in the spec, all feeding
/// the model step. A reusable asset removes the generation step of its kind
/// (for the model, the steps that only feed it go too).
pub fn build_execution_plan_with(
    spec: &DesignSpec,
    profile: &ComplexityProfile,
    assets: &AssetReport,
    policy: LoopPolicy,
    config: &PlannerConfig,
) -> ExecutionPlan {
    let reuse_model = assets.reusable_for(ArtifactKind::ReferenceModel);
    let reuse_tb = assets.reusable_for(ArtifactKind::Testbench);

    let mut tasks = Vec::new();
    let mut model_deps = Vec::new();
    if reuse_model.is_none() {
        if profile.tier >= Tier::Medium {
            tasks.push(TaskStep {
                step_id: "interface_skeleton".into(),
                description: format!("Declare the ports, types and module skeleton of `{}`", spec.title),
                assigned_agent: Producer::Modeler,
                depends_on: Vec::new(),
            });
            model_deps.push("interface_skeleton".to_string());
        }
        if profile.tier == Tier::Complex {
            for category in ConstraintCategory::ALL.into_iter().filter(|c| spec.has_category(*c)) {
                let id = format!("subblock_{}", category.as_str());
                let n = spec.constraints.iter().filter(|c| c.category == category).count();
                tasks.push(TaskStep {
                    step_id: id.clone(),
                    description: format!("Model the {} behaviour covering {n} {} constraint(s)", category.as_str(), category.as_str()),
                    assigned_agent: Producer::Modeler,
                    depends_on: vec!["interface_skeleton".into()],
                });
                model_deps.push(id);
            }
        }
        tasks.push(TaskStep {
            step_id: "generate_model".into(),
            description: format!("Generate the reference model for `{}`", spec.title),
            assigned_agent: Producer::Modeler,
            depends_on: model_deps.clone(),
        });
    }
    if reuse_tb.is_none() {
        tasks.push(TaskStep {
            step_id: "generate_testbench".into(),
            description: format!("Generate a self-checking testbench for `{}`", spec.title),
            assigned_agent: Producer::Verifier,
            depends_on: Vec::new(),
        });
    }

    let mut flags = Vec::new();
    if policy.name() == PolicyName::Naive && !model_deps.is_empty() {
        flags.push(PlanFlag::PolicyConflict {
            reason: format!(
                "{} tier asks for {} decomposition step(s) but the naive policy generates in one shot",
                profile.tier,
                model_deps.len()
            ),
        });
    }

    let reused = [(ArtifactKind::ReferenceModel, reuse_model), (ArtifactKind::Testbench, reuse_tb)]
        .into_iter()
        .filter_map(|(kind, a)| {
            a.map(|a| ReusedAsset {
                kind,
                path: a.path.clone(),
                content_digest: a.content_digest.clone(),
            })
        })
        .collect();

    let limits = config.limits(profile.tier);
    ExecutionPlan {
        plan_id: format!("{}-plan", spec.spec_id),
        tasks,
        complexity: *profile,
        policy,
        max_iterations: limits.max_iterations,
        token_budget: limits.token_budget,
        reused,
        flags,
    }
}
