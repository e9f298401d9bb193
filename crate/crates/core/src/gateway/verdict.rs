use super::agents::{fenced_blocks, Fence};
use super::{ArbiterVerdict, GatewayError, VerdictRepr};
use crate::session::DesignSpec;

/// Appended to the arbiter prompt when its previous reply did not parse.
pub const VERDICT_SCHEMA_REMINDER: &str = "\n\n=== FORMAT REMINDER ===\n\
Your previous reply could not be parsed. Reply with ONE JSON object and no other text. \
It must have exactly these fields: path (syntax_repair | design_refinement | tb_realignment | success), \
target_agent (modeler | verifier | none), defect_summary (string), violated_constraints (array of \
constraint ids), confidence_note (string).\n";

/// Parses an arbiter reply: a single JSON object, optionally wrapped in one
/// fenced block, with exactly the verdict fields. Structural problems give
/// `VerdictParseError`; well-formed verdicts breaking a routing invariant or
/// naming unknown constraint ids give `InconsistentVerdict`.
pub fn parse_verdict(text: &str, spec: &DesignSpec) -> Result<ArbiterVerdict, GatewayError> {
    let parse_err = |m: String| Err(GatewayError::VerdictParseError(m));
    let trimmed = text.trim();
    let body = if trimmed.contains("```") {
        match fenced_blocks(trimmed) {
            Fence::Blocks(blocks) if blocks.len() == 1 => {
                let b = &blocks[0];
                if !trimmed[..b.start].trim().is_empty() || !trimmed[b.end..].trim().is_empty() {
                    return parse_err("text outside the JSON block".into());
                }
                b.body.trim()
            }
            Fence::Blocks(blocks) => return parse_err(format!("{} fenced blocks", blocks.len())),
            Fence::Unclosed => return parse_err("unclosed fenced block".into()),
        }
    } else {
        trimmed
    };
    if !body.starts_with('{') {
        return parse_err("reply is not a JSON object".into());
    }
    let repr: VerdictRepr = match serde_json::from_str(body) {
        Ok(r) => r,
        Err(e) => return parse_err(e.to_string()),
    };
    let verdict = repr.unchecked();
    verdict.check_invariants()?;
    if let Some(bad) = verdict.violated_constraints.iter().find(|id| spec.constraint(id).is_none()) {
        return Err(GatewayError::InconsistentVerdict(format!("unknown constraint id `{bad}`")));
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::TargetAgent;
    use crate::session::{parse_spec, RoutingPath, SpecFormat};

    fn spec() -> DesignSpec {
        parse_spec("s", "# s\nCONSTRAINT: @C1 count up\nCONSTRAINT: @C2 reset clears\n", SpecFormat::Markdown).unwrap()
    }

    #[test]
    fn bare_and_fenced_objects() {
        let j = r#"{"path":"tb_realignment","target_agent":"verifier","defect_summary":"tb expects 0","violated_constraints":["C2"],"confidence_note":"high"}"#;
        let v = parse_verdict(j, &spec()).unwrap();
        assert_eq!(v.path, RoutingPath::TbRealignment);
        assert_eq!(v.target_agent, TargetAgent::Verifier);
        let fenced = format!("```json\n{j}\n```\n");
        assert_eq!(parse_verdict(&fenced, &spec()).unwrap(), v);
    }

    #[test]
    fn success_with_violations_is_inconsistent() {
        let j = r#"{"path":"success","target_agent":"none","defect_summary":"","violated_constraints":["C1"],"confidence_note":""}"#;
        assert!(matches!(parse_verdict(j, &spec()), Err(GatewayError::InconsistentVerdict(_))));
    }

    #[test]
    fn prose_is_a_parse_error() {
        let r = parse_verdict("The model looks fine to me.", &spec());
        assert!(matches!(r, Err(GatewayError::VerdictParseError(_))));
    }
}
