use crate::plan::MissionRequest;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_TEMPLATE: &str = include_str!("../../assets/templates/planner_system.md");

/// Section headings every planner template must carry, in order.
pub const TEMPLATE_SECTIONS: [&str; 6] = [
    "System Overview",
    "Operational Environment",
    "Robot Capabilities",
    "Coordination Requirements",
    "Mission Parameters",
    "Response Format",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template not found: {0}")]
    TemplateNotFound(String),
    #[error("template placeholder {{{0}}} has no value")]
    MissingPlaceholder(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_prompt: String,
    pub user_prompt: String,
}

/// Placeholder values derived from the request.
fn values(request: &MissionRequest) -> Vec<(&'static str, String)> {
    let env = &request.environment;
    let landmarks = env
        .landmarks
        .iter()
        .map(|(name, p)| format!("- {name}: ({:.1}, {:.1})", p.x, p.y))
        .collect::<Vec<_>>()
        .join("\n");
    let actions = request
        .allowed_actions
        .iter()
        .map(|a| match a.required_robot() {
            Some(r) => format!("- {a} ({r} only)"),
            None => format!("- {a} (USV or UAV)"),
        })
        .collect::<Vec<_>>()
        .join("\n");
    let constraints = request
        .knowledge
        .constraint_lines()
        .into_iter()
        .map(|l| format!("- {l}"))
        .collect::<Vec<_>>()
        .join("\n");
    let b = &env.bounds;
    vec![
        ("environment", env.summary.clone()),
        (
            "bounds",
            format!(
                "x [{:.1}, {:.1}], y [{:.1}, {:.1}], z [{:.1}, {:.1}]",
                b.min[0], b.max[0], b.min[1], b.max[1], b.min[2], b.max[2]
            ),
        ),
        ("landmarks", landmarks),
        ("action_space", actions),
        ("constraints", constraints),
    ]
}

/// Replace `{identifier}` placeholders. Braces around anything that is not a
/// bare identifier (JSON examples, for instance) are left alone.
pub fn fill_template(template: &str, values: &[(&str, String)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let ident_len = after.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(after.len());
        let ident = &after[..ident_len];
        let is_placeholder = ident_len > 0
            && after[ident_len..].starts_with('}')
            && !ident.starts_with(|c: char| c.is_ascii_digit());
        if is_placeholder {
            let value = values
                .iter()
                .find(|(k, _)| *k == ident)
                .ok_or_else(|| PromptError::MissingPlaceholder(ident.to_string()))?;
            out.push_str(&value.1);
            rest = &after[ident_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}

pub fn assemble_prompt_from_str(request: &MissionRequest, template: &str) -> Result<PromptBundle, PromptError> {
    Ok(PromptBundle {
        system_prompt: fill_template(template, &values(request))?,
        user_prompt: request.instruction.clone(),
    })
}

pub fn assemble_prompt(request: &MissionRequest, template: &Path) -> Result<PromptBundle, PromptError> {
    let text = std::fs::read_to_string(template).map_err(|_| PromptError::TemplateNotFound(template.display().to_string()))?;
    assemble_prompt_from_str(request, &text)
}

/// Text of a `## <heading>` section up to the next heading.
pub fn template_section<'a>(template: &'a str, heading: &str) -> Option<&'a str> {
    let marker = format!("## {heading}\n");
    let start = template.find(&marker)? + marker.len();
    let body = &template[start..];
    let end = body.find("\n## ").map_or(body.len(), |i| i + 1);
    Some(&body[..end])
}
