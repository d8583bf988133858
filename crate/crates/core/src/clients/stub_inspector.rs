use super::{
    classify_query, inspection_prompt, ClientError, Concern, InspectionReport, InspectorClient, InspectorResponse,
    Severity,
};
use crate::world::{SceneObservation, VisibleEntity};
use std::collections::BTreeMap;
use std::time::Duration;

/// Categories an entity label belongs to, most specific first.
pub fn entity_categories(label: &str) -> &'static [&'static str] {
    let l = label.to_lowercase();
    if l.contains("sailboat") {
        &["sailboat", "boat"]
    } else if l.contains("forklift") {
        &["forklift", "vehicle"]
    } else if l.contains("truck") {
        &["truck", "vehicle"]
    } else if l.contains("worker") || l.contains("person") || l.contains("human") {
        &["human"]
    } else if l.contains("boat") || l.contains("vessel") || l.contains("ship") {
        &["boat"]
    } else {
        &[]
    }
}

fn severity(category: &str) -> Severity {
    match category {
        "human" => Severity::High,
        "vehicle" => Severity::Medium,
        _ => Severity::Low,
    }
}

fn whereabouts(e: &VisibleEntity) -> String {
    match (&e.landmark, e.side) {
        (Some(l), Some(s)) => format!("on the {} side of the {l}", s.as_str()),
        (Some(l), None) => format!("near the {l}"),
        _ => format!("at {:.0} meters", e.range),
    }
}

/// Ground-truth inspector: answers from the observation's visible entities.
#[derive(Debug, Clone, Default)]
pub struct StubInspector;

impl StubInspector {
    pub fn report(&self, obs: &SceneObservation, queries: &[String], context: &str) -> InspectionReport {
        let basic = if obs.visible.is_empty() {
            "Nothing is visible in the camera view.".to_string()
        } else {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for e in &obs.visible {
                *counts.entry(e.label.as_str()).or_default() += 1;
            }
            let parts: Vec<String> =
                counts.iter().map(|(l, n)| format!("{n} {l}{}", if *n == 1 { "" } else { "s" })).collect();
            let n = obs.visible.len();
            format!("{n} object{} visible: {}.", if n == 1 { "" } else { "s" }, parts.join(", "))
        };
        let detailed = obs
            .visible
            .iter()
            .map(|e| {
                let side = if e.bearing >= 0.0 { "left" } else { "right" };
                format!(
                    "A {} at {:.1} meters, bearing {:.0} degrees to the {side}, {}.",
                    e.label,
                    e.range,
                    e.bearing.to_degrees().abs(),
                    whereabouts(e)
                )
            })
            .collect::<Vec<_>>()
            .join(" ");

        let mut concerns: Vec<Concern> = Vec::new();
        let mut answers = Vec::with_capacity(queries.len());
        for q in queries {
            let Some(category) = classify_query(q) else {
                answers.push(format!("Cannot assess this query from the scene. {basic}"));
                continue;
            };
            let matches: Vec<&VisibleEntity> =
                obs.visible.iter().filter(|e| entity_categories(&e.label).contains(&category)).collect();
            if matches.is_empty() {
                answers.push(format!("No, no {category} is visible."));
                continue;
            }
            let sightings: Vec<String> = matches.iter().map(|e| format!("a {} {}", e.label, whereabouts(e))).collect();
            answers.push(format!("Yes, {}.", sightings.join("; ")));
            for e in matches {
                let general = entity_categories(&e.label).last().copied().unwrap_or(category);
                let text = format!("{general}: {} {}", e.label, whereabouts(e));
                if !concerns.iter().any(|c| c.text == text) {
                    concerns.push(Concern { text, severity: severity(general) });
                }
            }
        }
        InspectionReport {
            prompt: inspection_prompt(queries, context),
            basic,
            detailed,
            concerns,
            answers,
            tick: obs.frame_id,
            robot: obs.observer,
            pose: obs.pose,
        }
    }
}

impl InspectorClient for StubInspector {
    fn label(&self) -> &str {
        "stub"
    }

    fn inspect(&self, obs: &SceneObservation, queries: &[String], context: &str) -> Result<InspectorResponse, ClientError> {
        Ok(InspectorResponse { report: self.report(obs, queries, context), latency: Duration::ZERO })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::score_semantic;
    use crate::plan::Robot;
    use crate::world::{Pose, Side};

    fn entity(label: &str, bearing: f64, landmark: Option<&str>, side: Option<Side>) -> VisibleEntity {
        VisibleEntity {
            label: label.into(),
            range: 20.0,
            bearing,
            position: [0.0; 3],
            landmark: landmark.map(String::from),
            side,
        }
    }

    fn obs(visible: Vec<VisibleEntity>) -> SceneObservation {
        let mut o = SceneObservation::empty(Robot::Uav, Pose { x: 0.0, y: 0.0, z: 15.0, psi: 0.0 }, 42);
        o.visible = visible;
        o
    }

    #[test]
    fn truck_left_of_crane() {
        let o = obs(vec![entity("truck", 0.3, Some("Crane"), Some(Side::Left))]);
        let q = vec!["Is there any vehicle near the crane?".to_string()];
        let r = StubInspector.report(&o, &q, "");
        assert_eq!(r.concerns.len(), 1);
        assert!(r.concerns[0].text.contains("vehicle") && r.concerns[0].text.contains("left side"));
        assert!(r.answers[0].starts_with("Yes"));
        assert_eq!(score_semantic(&r.answers[0], &o, &q[0]), Ok(1.0));
        assert_eq!(r.tick, 42);
    }

    #[test]
    fn empty_scene() {
        let r = StubInspector.report(&obs(vec![]), &["Is there any human?".to_string()], "");
        assert!(r.concerns.is_empty());
        assert!(r.basic.contains("Nothing"));
        assert!(r.answers[0].starts_with("No"));
    }

    #[test]
    fn two_sailboats_listed() {
        let o = obs(vec![
            entity("sailboat", 0.5, Some("DockingStation"), Some(Side::Left)),
            entity("sailboat", -0.4, Some("DockingStation"), Some(Side::Right)),
        ]);
        let r = StubInspector.report(&o, &["Are there any sailboats?".to_string()], "");
        assert_eq!(r.detailed.matches("A sailboat").count(), 2);
        assert!(r.detailed.contains("29 degrees to the left") && r.detailed.contains("23 degrees to the right"));
        assert_eq!(r.concerns.len(), 2);
    }

    #[test]
    fn answer_yes_iff_match() {
        let o = obs(vec![entity("forklift", 0.0, None, None)]);
        let r = StubInspector.report(&o, &["Any humans?".into(), "Any vehicles?".into()], "");
        assert!(r.answers[0].starts_with("No"));
        assert!(r.answers[1].starts_with("Yes"));
    }
}
