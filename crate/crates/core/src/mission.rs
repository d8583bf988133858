//! Mission files: an instruction, an optional fixed plan and run options.

use crate::coordinator::{Fault, ReplanPolicy};
use crate::plan::{parse_plan, MissionPlan, MissionRequest, ParseError};
use crate::world::{UavStart, WorldDescription};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MissionFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("mission file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("embedded plan rejected: {0}")]
    Plan(#[from] ParseError),
}

/// On-disk mission (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionFile {
    pub instruction: String,
    /// A fixed plan document; when absent the planner is asked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<Fault>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_at: Option<u64>,
    /// Overrides the world's UAV start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uav_start: Option<UavStart>,
}

impl MissionFile {
    pub fn new(instruction: impl Into<String>) -> Self {
        Self { instruction: instruction.into(), plan: None, faults: Vec::new(), abort_at: None, uav_start: None }
    }

    pub fn from_json(text: &str) -> Result<Self, MissionFileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, MissionFileError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| MissionFileError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// The request a planner sees for this mission in `world`.
    pub fn request(&self, world: &WorldDescription) -> MissionRequest {
        let env = crate::plan::EnvDescription {
            summary: world.summary.clone(),
            bounds: world.bounds,
            landmarks: world.landmarks.clone(),
        };
        MissionRequest::new(self.instruction.clone(), env, world.knowledge.clone())
    }

    /// `world` with this mission's overrides applied.
    pub fn apply_to(&self, world: &WorldDescription) -> WorldDescription {
        let mut out = world.clone();
        if let Some(start) = self.uav_start {
            out.uav_start = start;
        }
        out
    }

    pub fn fixed_plan(&self) -> Result<Option<MissionPlan>, MissionFileError> {
        match &self.plan {
            None => Ok(None),
            Some(doc) => Ok(Some(parse_plan(&doc.to_string())?)),
        }
    }

    /// `policy` with this mission's faults and abort tick added.
    pub fn policy(&self, mut policy: ReplanPolicy) -> ReplanPolicy {
        policy.faults.extend(self.faults.iter().copied());
        policy.abort_at = self.abort_at.or(policy.abort_at);
        policy
    }
}
