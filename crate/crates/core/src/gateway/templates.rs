use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::session::AgentRole;

pub const TEMPLATE_VERSION: &str = "v1";

const MODELER: &str = include_str!("../../data/prompts/modeler.v1.txt");
const VERIFIER: &str = include_str!("../../data/prompts/verifier.v1.txt");
const ARBITER: &str = include_str!("../../data/prompts/arbiter.v1.txt");

const KNOWN: &[&str] = &[
    "anchor",
    "summary",
    "workspace",
    "constraints",
    "tasks",
    "filename",
    "previous",
    "artifacts",
    "sim_report",
];

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{\{(\w+)\}\}").unwrap());

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{role} template lacks the {{{{anchor}}}} placeholder")]
    MissingAnchor { role: AgentRole },
    #[error("{role} template uses unknown placeholder {{{{{name}}}}}")]
    UnknownPlaceholder { role: AgentRole, name: String },
    #[error("no template for role {0}")]
    NoTemplate(AgentRole),
}

/// Prompt templates for the three generating/judging agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub version: String,
    modeler: String,
    verifier: String,
    arbiter: String,
}

impl Templates {
    pub fn builtin() -> Self {
        Self::new(TEMPLATE_VERSION, MODELER, VERIFIER, ARBITER).expect("builtin templates are valid")
    }

    pub fn new(version: &str, modeler: &str, verifier: &str, arbiter: &str) -> Result<Self, TemplateError> {
        let t = Templates {
            version: version.to_owned(),
            modeler: modeler.to_owned(),
            verifier: verifier.to_owned(),
            arbiter: arbiter.to_owned(),
        };
        for role in [AgentRole::Modeler, AgentRole::Verifier, AgentRole::Arbiter] {
            let text = t.get(role)?;
            let mut has_anchor = false;
            for c in PLACEHOLDER.captures_iter(text) {
                let name = &c[1];
                if !KNOWN.contains(&name) {
                    return Err(TemplateError::UnknownPlaceholder {
                        role,
                        name: name.to_owned(),
                    });
                }
                has_anchor |= name == "anchor";
            }
            if !has_anchor {
                return Err(TemplateError::MissingAnchor { role });
            }
        }
        Ok(t)
    }

    /// Loads `{modeler,verifier,arbiter}.{version}.txt` from `dir`.
    pub fn load_dir(dir: &Path, version: &str) -> Result<Self, TemplateError> {
        let read = |role: &str| {
            let path = dir.join(format!("{role}.{version}.txt"));
            std::fs::read_to_string(&path).map_err(|source| TemplateError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        Self::new(version, &read("modeler")?, &read("verifier")?, &read("arbiter")?)
    }

    fn get(&self, role: AgentRole) -> Result<&str, TemplateError> {
        match role {
            AgentRole::Modeler => Ok(&self.modeler),
            AgentRole::Verifier => Ok(&self.verifier),
            AgentRole::Arbiter => Ok(&self.arbiter),
            other => Err(TemplateError::NoTemplate(other)),
        }
    }

    /// Single-pass substitution: values are inserted verbatim and never
    /// rescanned, so placeholder-like text inside a value survives intact.
    /// Placeholders without a value render empty.
    pub fn render(&self, role: AgentRole, values: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let template = self.get(role)?;
        Ok(PLACEHOLDER
            .replace_all(template, |c: &regex::Captures<'_>| {
                values.get(&c[1]).cloned().unwrap_or_default()
            })
            .into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_anchor_first() {
        let t = Templates::builtin();
        let mut v = BTreeMap::new();
        v.insert("anchor", "SPEC BODY {{summary}}".to_owned());
        v.insert("summary", "S".to_owned());
        for role in [AgentRole::Modeler, AgentRole::Verifier, AgentRole::Arbiter] {
            let out = t.render(role, &v).unwrap();
            assert!(out.contains("SPEC BODY {{summary}}"), "value rescanned for {role}");
            assert!(out.find("SPEC BODY").unwrap() < out.find("HISTORY SUMMARY").unwrap());
        }
    }

    #[test]
    fn validation() {
        assert!(matches!(
            Templates::new("x", "no anchor", "{{anchor}}", "{{anchor}}"),
            Err(TemplateError::MissingAnchor { role: AgentRole::Modeler })
        ));
        assert!(matches!(
            Templates::new("x", "{{anchor}}", "{{anchor}} {{bogus}}", "{{anchor}}"),
            Err(TemplateError::UnknownPlaceholder { .. })
        ));
    }
}
