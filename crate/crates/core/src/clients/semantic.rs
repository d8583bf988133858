use super::entity_categories;
use crate::world::SceneObservation;
use thiserror::Error;

/// Words that count as spatial or contextual detail in an answer.
pub const DETAIL_TOKENS: [&str; 25] = [
    "near", "left", "right", "beside", "next", "behind", "front", "adjacent", "north", "south", "east", "west",
    "pier", "dock", "docking", "crane", "container", "containers", "quay", "berth", "bearing", "meters", "between",
    "above", "below",
];

const NEGATIONS: [&str; 12] =
    ["no", "not", "none", "nothing", "without", "absent", "cannot", "cant", "isnt", "arent", "dont", "nobody"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticError {
    #[error("query names no known entity category: {0:?}")]
    UnclassifiableQuery(String),
}

fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .replace('\'', "")
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn category_of(word: &str) -> Option<&'static str> {
    Some(match word {
        "human" | "humans" | "person" | "persons" | "people" | "personnel" | "worker" | "workers" | "pedestrian"
        | "pedestrians" => "human",
        "vehicle" | "vehicles" | "car" | "cars" => "vehicle",
        "truck" | "trucks" => "truck",
        "forklift" | "forklifts" => "forklift",
        "sailboat" | "sailboats" => "sailboat",
        "boat" | "boats" | "vessel" | "vessels" | "ship" | "ships" | "tugboat" | "tugboats" => "boat",
        _ => return None,
    })
}

/// Entity category a query asks about: the first category word in the query.
pub fn classify_query(query: &str) -> Option<&'static str> {
    tokens(query).iter().find_map(|t| category_of(t))
}

/// Polarity of a free-text answer: a leading yes/no decides, otherwise any
/// negation word makes it negative.
fn polarity(answer: &str) -> bool {
    let toks = tokens(answer);
    match toks.first().map(String::as_str) {
        Some("yes") => true,
        Some("no") => false,
        _ => !toks.iter().any(|t| NEGATIONS.contains(&t.as_str())),
    }
}

/// Grade an answer against ground truth: 0 for wrong polarity, 0.5 for right
/// polarity without detail, 1 for right polarity with a detail token.
pub fn score_semantic(answer: &str, truth: &SceneObservation, query: &str) -> Result<f64, SemanticError> {
    let category = classify_query(query).ok_or_else(|| SemanticError::UnclassifiableQuery(query.to_string()))?;
    let present = truth.visible.iter().any(|e| entity_categories(&e.label).contains(&category));
    if polarity(answer) != present {
        return Ok(0.0);
    }
    let detailed = tokens(answer).iter().any(|t| DETAIL_TOKENS.contains(&t.as_str()));
    Ok(if detailed { 1.0 } else { 0.5 })
}
