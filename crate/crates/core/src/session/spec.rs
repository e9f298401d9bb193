use std::collections::HashSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ConstraintCategory, ConstraintItem, DesignSpec};

/// Literal prefix that marks a line as a critical design constraint.
pub const CONSTRAINT_MARKER: &str = "CONSTRAINT:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecFormat {
    Markdown,
    Plain,
}

impl SpecFormat {
    /// Markdown for `.md`/`.markdown` paths, plain otherwise.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("md") | Some("markdown") => SpecFormat::Markdown,
            _ => SpecFormat::Plain,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecParseError {
    #[error("specification document is empty")]
    EmptyDocument,
    #[error("duplicate constraint id `{id}` on line {line}")]
    DuplicateConstraintId { id: String, line: usize },
    #[error("constraint on line {line} has no text")]
    EmptyConstraint { line: usize },
}

/// Parses a specification document.
///
/// Constraints are the lines that start with [`CONSTRAINT_MARKER`]. After the
/// marker an optional `@ID` token names the constraint (default `C<n>`, 1-based
/// in document order) and an optional trailing `[category]` tag sets its
/// category (default `behavior`). In markdown, list bullets may precede the
/// marker and fenced code blocks are skipped.
pub fn parse_spec(spec_id: &str, document: &str, format: SpecFormat) -> Result<DesignSpec, SpecParseError> {
    if document.trim().is_empty() {
        return Err(SpecParseError::EmptyDocument);
    }

    let mut constraints = Vec::new();
    let mut seen = HashSet::new();
    let mut in_fence = false;
    let mut title = None;

    for (index, raw) in document.lines().enumerate() {
        let line_no = index + 1;
        let line = raw.trim();

        if format == SpecFormat::Markdown && line.starts_with("```") {
            in_fence = !in_fence;
            continue;
        }
        if in_fence {
            continue;
        }

        if title.is_none() {
            title = match format {
                SpecFormat::Markdown => line
                    .strip_prefix('#')
                    .map(|rest| rest.trim_start_matches('#').trim())
                    .filter(|t| !t.is_empty()),
                SpecFormat::Plain => Some(line).filter(|t| !t.is_empty()),
            }
            .map(str::to_owned);
        }

        let Some(rest) = strip_marker(line, format) else {
            continue;
        };
        let (explicit_id, rest) = split_id(rest);
        let (text, category) = split_category(rest);
        if text.is_empty() {
            return Err(SpecParseError::EmptyConstraint { line: line_no });
        }

        let id = explicit_id
            .map(str::to_owned)
            .unwrap_or_else(|| format!("C{}", constraints.len() + 1));
        if !seen.insert(id.clone()) {
            return Err(SpecParseError::DuplicateConstraintId { id, line: line_no });
        }
        constraints.push(ConstraintItem {
            id,
            text: text.to_owned(),
            category,
        });
    }

    Ok(DesignSpec {
        spec_id: spec_id.to_owned(),
        title: title.unwrap_or_else(|| spec_id.to_owned()),
        body: document.to_owned(),
        constraints,
        legacy_assets: Vec::new(),
    })
}

fn strip_marker(line: &str, format: SpecFormat) -> Option<&str> {
    let line = match format {
        SpecFormat::Markdown => line
            .strip_prefix("- ")
            .or_else(|| line.strip_prefix("* "))
            .or_else(|| line.strip_prefix("+ "))
            .map(str::trim_start)
            .unwrap_or(line),
        SpecFormat::Plain => line,
    };
    line.strip_prefix(CONSTRAINT_MARKER).map(str::trim)
}

fn split_id(rest: &str) -> (Option<&str>, &str) {
    match rest.strip_prefix('@') {
        Some(tail) => {
            let end = tail.find(char::is_whitespace).unwrap_or(tail.len());
            let id = &tail[..end];
            if id.is_empty() {
                (None, rest)
            } else {
                (Some(id), tail[end..].trim_start())
            }
        }
        None => (None, rest),
    }
}

fn split_category(rest: &str) -> (&str, ConstraintCategory) {
    if let Some(open) = rest.rfind('[') {
        if let Some(tag) = rest[open + 1..].strip_suffix(']') {
            if let Ok(category) = ConstraintCategory::from_str(tag.trim()) {
                return (rest[..open].trim_end(), category);
            }
        }
    }
    (rest, ConstraintCategory::Behavior)
}
