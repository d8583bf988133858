use super::{ActionKind, MissionPlan, RawTheta, Robot, StepId, SymbolicAction, ThetaParams};
use serde::Deserialize;
use serde_json::value::RawValue;
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    MalformedDocument(String),
    UnknownAction(String),
    UnknownRobot(String),
    RobotMismatch { action: ActionKind, robot: Robot },
    MissingField(&'static str),
    DanglingPrecondition { reference: StepId },
    SelfPrecondition,
    NonDenseId { expected: StepId, found: u64 },
    InvalidParams(String),
    EmptyQueries,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::MalformedDocument(msg) => write!(f, "malformed document: {msg}"),
            ParseErrorKind::UnknownAction(name) => write!(f, "unknown action {name:?}"),
            ParseErrorKind::UnknownRobot(name) => write!(f, "unknown robot {name:?}"),
            ParseErrorKind::RobotMismatch { action, robot } => {
                write!(f, "action {action} cannot be performed by {robot}")
            }
            ParseErrorKind::MissingField(field) => write!(f, "missing field {field:?}"),
            ParseErrorKind::DanglingPrecondition { reference } => {
                write!(f, "precondition references unknown step {reference}")
            }
            ParseErrorKind::SelfPrecondition => write!(f, "step lists itself as a precondition"),
            ParseErrorKind::NonDenseId { expected, found } => {
                write!(f, "step ids must be dense and ordered: expected {expected}, found {found}")
            }
            ParseErrorKind::InvalidParams(msg) => write!(f, "invalid params: {msg}"),
            ParseErrorKind::EmptyQueries => write!(f, "Inspect requires at least one query"),
        }
    }
}

/// A rejected plan document. `offset` is the byte offset of the offending value.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("byte {offset}{}: {kind}", .step.map(|s| format!(" (step {s})")).unwrap_or_default())]
pub struct ParseError {
    pub offset: usize,
    pub step: Option<StepId>,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn document(offset: usize, kind: ParseErrorKind) -> Self {
        Self { offset, step: None, kind }
    }
}

#[derive(Deserialize)]
struct RawPlan<'a> {
    mission_id: Option<String>,
    #[serde(borrow)]
    steps: Option<Vec<&'a RawValue>>,
}

#[derive(Deserialize)]
struct RawStep {
    id: Option<u64>,
    action: Option<String>,
    robot: Option<String>,
    params: Option<RawTheta>,
    queries: Option<Vec<String>>,
    preconditions: Option<Vec<u64>>,
}

/// Byte offset for a 1-based line / column pair reported by serde_json.
fn offset_of(document: &str, line: usize, column: usize) -> usize {
    let line_start: usize = document.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(document.len())
}

/// Parse and check a plan document.
pub fn parse_plan(document: &str) -> Result<MissionPlan, ParseError> {
    let raw: RawPlan<'_> = serde_json::from_str(document).map_err(|e| {
        ParseError::document(offset_of(document, e.line(), e.column()), ParseErrorKind::MalformedDocument(e.to_string()))
    })?;
    let mission_id = raw
        .mission_id
        .ok_or(ParseError::document(0, ParseErrorKind::MissingField("mission_id")))?;
    let raw_steps = raw.steps.ok_or(ParseError::document(0, ParseErrorKind::MissingField("steps")))?;
    let n = raw_steps.len();

    let mut steps = Vec::with_capacity(n);
    for (index, value) in raw_steps.iter().enumerate() {
        let text = value.get();
        let base = text.as_ptr() as usize - document.as_ptr() as usize;
        let err = |kind| ParseError { offset: base, step: Some(index), kind };

        let step: RawStep = serde_json::from_str(text).map_err(|e| ParseError {
            offset: base + offset_of(text, e.line(), e.column()),
            step: Some(index),
            kind: ParseErrorKind::MalformedDocument(e.to_string()),
        })?;

        let id = step.id.ok_or_else(|| err(ParseErrorKind::MissingField("id")))?;
        if id != index as u64 {
            return Err(err(ParseErrorKind::NonDenseId { expected: index, found: id }));
        }
        let action_name = step.action.ok_or_else(|| err(ParseErrorKind::MissingField("action")))?;
        let action =
            ActionKind::from_name(&action_name).ok_or_else(|| err(ParseErrorKind::UnknownAction(action_name.clone())))?;
        let robot_name = step.robot.ok_or_else(|| err(ParseErrorKind::MissingField("robot")))?;
        let robot = Robot::from_name(&robot_name).ok_or_else(|| err(ParseErrorKind::UnknownRobot(robot_name.clone())))?;
        if action.required_robot().is_some_and(|r| r != robot) {
            return Err(err(ParseErrorKind::RobotMismatch { action, robot }));
        }
        let theta = match step.params {
            Some(raw) => ThetaParams::try_from(raw).map_err(|m| err(ParseErrorKind::InvalidParams(m)))?,
            None => ThetaParams::default(),
        };
        let sigma = step.queries.unwrap_or_default();
        if action == ActionKind::Inspect && sigma.iter().all(|q| q.trim().is_empty()) {
            return Err(err(ParseErrorKind::EmptyQueries));
        }
        let mut preconditions = BTreeSet::new();
        for reference in step.preconditions.unwrap_or_default() {
            if reference == index as u64 {
                return Err(err(ParseErrorKind::SelfPrecondition));
            }
            if reference >= n as u64 {
                return Err(err(ParseErrorKind::DanglingPrecondition { reference: reference as StepId }));
            }
            preconditions.insert(reference as StepId);
        }
        steps.push(SymbolicAction { id: index, action, robot, theta, sigma, preconditions });
    }
    Ok(MissionPlan { mission_id, steps })
}
