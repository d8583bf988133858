//! Rubric scoring of plan documents: 20 points for a valid document,
//! 40 for ordering, 40 for preconditions.

use super::{parse_plan, MissionPlan};
use crate::depgraph::{build_graph, GraphError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const VALIDITY_POINTS: f64 = 20.0;
pub const ORDERING_POINTS: f64 = 40.0;
pub const PRECONDITION_POINTS: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("rubric has no precedence pairs and no precondition edges")]
    EmptyRubric,
    #[error("reference plan is not a valid dependency graph: {0}")]
    InvalidReference(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanScore {
    pub json_validity: f64,
    pub ordering: f64,
    pub preconditions: f64,
    pub total: f64,
}

impl PlanScore {
    pub const ZERO: PlanScore = PlanScore { json_validity: 0.0, ordering: 0.0, preconditions: 0.0, total: 0.0 };

    fn from_components(json_validity: f64, ordering: f64, preconditions: f64) -> Self {
        Self { json_validity, ordering, preconditions, total: json_validity + ordering + preconditions }
    }
}

/// Expected ordering and dependency structure, expressed over step labels
/// (`ROBOT:Action#k`, k counting occurrences in listed order) so that
/// renumbering a plan does not change its score.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringRubric {
    pub precedence: BTreeSet<(String, String)>,
    pub preconditions: BTreeSet<(String, String)>,
}

impl ScoringRubric {
    /// Derive a rubric from a reference plan: every ancestor/descendant pair of
    /// its dependency graph must keep its order, every direct edge must be declared.
    pub fn from_reference(plan: &MissionPlan) -> Result<Self, ScoreError> {
        let graph = build_graph(plan)?;
        let labels = step_labels(plan);
        let mut rubric = ScoringRubric::default();
        for step in &plan.steps {
            for a in graph.ancestors(step.id) {
                rubric.precedence.insert((labels[a].clone(), labels[step.id].clone()));
            }
            for &p in &step.preconditions {
                rubric.preconditions.insert((labels[p].clone(), labels[step.id].clone()));
            }
        }
        Ok(rubric)
    }

    pub fn is_empty(&self) -> bool {
        self.precedence.is_empty() && self.preconditions.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rubric serialization is infallible")
    }
}

/// Occurrence-indexed label for every step, in listed order.
pub fn step_labels(plan: &MissionPlan) -> Vec<String> {
    let mut counts: BTreeMap<(super::Robot, super::ActionKind), usize> = BTreeMap::new();
    plan.steps
        .iter()
        .map(|s| {
            let k = counts.entry((s.robot, s.action)).or_insert(0);
            *k += 1;
            format!("{}:{}#{}", s.robot, s.action, k)
        })
        .collect()
}

/// Round half-up to one decimal place.
pub fn round_half_up(value: f64) -> f64 {
    ((value * 10.0) + 0.5 + 1e-9).floor() / 10.0
}

fn ratio_points(points: f64, satisfied: usize, total: usize) -> f64 {
    if total == 0 {
        return points;
    }
    round_half_up(points * satisfied as f64 / total as f64)
}

pub fn score_plan(document: &str, rubric: &ScoringRubric) -> Result<PlanScore, ScoreError> {
    if rubric.is_empty() {
        return Err(ScoreError::EmptyRubric);
    }
    let Ok(plan) = parse_plan(document) else {
        return Ok(PlanScore::ZERO);
    };
    let labels = step_labels(&plan);
    let position: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

    let ordered = rubric
        .precedence
        .iter()
        .filter(|(a, b)| matches!((position.get(a.as_str()), position.get(b.as_str())), (Some(i), Some(j)) if i < j))
        .count();

    let declared: BTreeSet<(&str, &str)> = plan
        .steps
        .iter()
        .flat_map(|s| s.preconditions.iter().map(|&p| (labels[p].as_str(), labels[s.id].as_str())))
        .collect();
    let matched = rubric
        .preconditions
        .iter()
        .filter(|(a, b)| declared.contains(&(a.as_str(), b.as_str())))
        .count();

    Ok(PlanScore::from_components(
        VALIDITY_POINTS,
        ratio_points(ORDERING_POINTS, ordered, rubric.precedence.len()),
        ratio_points(PRECONDITION_POINTS, matched, rubric.preconditions.len()),
    ))
}
