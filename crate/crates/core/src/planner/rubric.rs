use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{ConstraintCategory, DesignSpec};

const BUILTIN_RUBRIC: &str = include_str!("../../data/complexity_rubric.json");

#[derive(Debug, Error)]
pub enum RubricError {
    #[error("cannot read rubric: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed rubric: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("rubric dimension `{0}` has a cap outside 0..=3")]
    BadCap(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordClass {
    pub name: String,
    pub keywords: Vec<String>,
}

/// Extra point awarded when a count threshold is met: either the number of
/// constraints of one category, or the number of keyword occurrences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BonusRule {
    pub name: String,
    #[serde(default)]
    pub constraint_category: Option<ConstraintCategory>,
    #[serde(default)]
    pub keywords: Vec<String>,
    pub min_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimension {
    pub cap: u8,
    pub classes: Vec<KeywordClass>,
    #[serde(default)]
    pub bonuses: Vec<BonusRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub interface: Dimension,
    pub state_space: Dimension,
    pub concurrency: Dimension,
}

/// Complexity scoring table, loaded from `complexity_rubric.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub version: u32,
    #[serde(default)]
    pub description: String,
    pub dimensions: Dimensions,
}

impl Rubric {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_RUBRIC).expect("builtin rubric is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, RubricError> {
        let rubric: Rubric = serde_json::from_str(text)?;
        for (name, dim) in [
            ("interface", &rubric.dimensions.interface),
            ("state_space", &rubric.dimensions.state_space),
            ("concurrency", &rubric.dimensions.concurrency),
        ] {
            if dim.cap > 3 {
                return Err(RubricError::BadCap(name));
            }
        }
        Ok(rubric)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, RubricError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl Dimension {
    pub(crate) fn score(&self, text: &str, spec: &DesignSpec) -> u8 {
        let classes = self
            .classes
            .iter()
            .filter(|c| c.keywords.iter().any(|k| count_keyword(text, k) > 0))
            .count();
        let bonuses = self
            .bonuses
            .iter()
            .filter(|b| {
                let n = match b.constraint_category {
                    Some(cat) => spec.constraints.iter().filter(|c| c.category == cat).count(),
                    None => b.keywords.iter().map(|k| count_keyword(text, k)).sum(),
                };
                n >= b.min_count
            })
            .count();
        (classes + bonuses).min(self.cap as usize) as u8
    }
}

/// Whole-word occurrences of `keyword` in lowercase `text`.
pub(crate) fn count_keyword(text: &str, keyword: &str) -> usize {
    let needle = keyword.to_lowercase();
    if needle.is_empty() {
        return 0;
    }
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    text.match_indices(&needle)
        .filter(|(at, _)| {
            let before = text[..*at].chars().next_back();
            let after = text[at + needle.len()..].chars().next();
            !before.is_some_and(is_word) && !after.is_some_and(is_word)
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_word_matching() {
        assert_eq!(count_keyword("an axi bus and axis", "axi"), 1);
        assert_eq!(count_keyword("two clock domains", "clock domain"), 0);
        assert_eq!(count_keyword("valid/ready handshake", "valid/ready"), 1);
        assert_eq!(count_keyword("mode; modes; mode", "mode"), 2);
    }

    #[test]
    fn builtin_rubric_loads() {
        let r = Rubric::builtin();
        assert_eq!(r.version, 1);
        assert!(r.dimensions.interface.classes.len() >= 3);
    }

    #[test]
    fn caps_above_three_are_rejected() {
        let mut r = Rubric::builtin();
        r.dimensions.concurrency.cap = 4;
        let text = serde_json::to_string(&r).unwrap();
        assert!(matches!(Rubric::from_json(&text), Err(RubricError::BadCap("concurrency"))));
    }
}
