//! Planner and inspector clients: prompt assembly, chat-completion HTTP
//! access, deterministic offline stubs and transcript replay.

mod mock;
mod prompt;
mod remote;
mod semantic;
mod stub_inspector;
mod stub_planner;
mod transcript;

pub use mock::{MockReply, MockServer, RecordedRequest};
pub use prompt::{
    assemble_prompt, assemble_prompt_from_str, fill_template, template_section, PromptBundle, PromptError,
    DEFAULT_TEMPLATE, TEMPLATE_SECTIONS,
};
pub use remote::{ChatEndpoint, Credential, RemoteConfig, RemoteInspector, RemotePlanner};
pub use semantic::{classify_query, score_semantic, SemanticError, DETAIL_TOKENS};
pub use stub_inspector::{entity_categories, StubInspector};
pub use stub_planner::{replan_remaining, ScriptedPlanner, StubPlanner};
pub use transcript::{request_hash, TranscriptPlanner, TranscriptRecord};

use crate::plan::{MissionPlan, MissionRequest, Robot, StepId};
use crate::world::{Pose, SceneObservation};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("request timed out or endpoint unreachable")]
    Timeout,
    #[error("endpoint returned HTTP {0}")]
    HttpStatus(u16),
    #[error("auth token variable {0} is not set")]
    AuthMissing(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("endpoint not configured: {0} is not set")]
    NotConfigured(String),
    #[error("no recorded response for {0}")]
    NoRecordedResponse(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Raw planner output. `latency` is wall-clock and never enters simulated time.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerResponse {
    pub document: String,
    pub latency: Duration,
}

/// What the planner is told when asked to replace a failed plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplanContext {
    pub previous: MissionPlan,
    pub completed: BTreeSet<StepId>,
    pub failed_step: Option<StepId>,
    pub reason: String,
}

impl ReplanContext {
    /// Text appended to the user prompt for remote planners.
    pub fn describe(&self) -> String {
        let done: Vec<String> = self.completed.iter().map(|id| self.previous.steps[*id].describe() + &format!(" (step {id})")).collect();
        let failed = self
            .failed_step
            .and_then(|id| self.previous.step(id))
            .map_or_else(|| "none".to_string(), |s| format!("{} (step {})", s.describe(), s.id));
        format!(
            "Replanning required. Completed steps: [{}]. Failed step: {failed}. Reason: {}. \
             Return a new plan that covers only the remaining objectives, starting from the current robot states. \
             Previous plan:\n{}",
            done.join(", "),
            self.reason,
            self.previous.to_document()
        )
    }
}

pub trait PlannerClient: Send + Sync {
    fn label(&self) -> &str;

    fn plan(&self, request: &MissionRequest, replan: Option<&ReplanContext>) -> Result<PlannerResponse, ClientError>;

    /// Benchmark entry point; transcript replay keys responses on the task label.
    fn plan_for_task(&self, _task: &str, request: &MissionRequest) -> Result<PlannerResponse, ClientError> {
        self.plan(request, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concern {
    pub text: String,
    pub severity: Severity,
}

/// Structured inspection result: prompt, scene summary, detailed analysis and concerns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectionReport {
    pub prompt: String,
    pub basic: String,
    pub detailed: String,
    pub concerns: Vec<Concern>,
    /// One answer per query, in query order.
    #[serde(default)]
    pub answers: Vec<String>,
    pub tick: u64,
    pub robot: Robot,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InspectorResponse {
    pub report: InspectionReport,
    pub latency: Duration,
}

pub trait InspectorClient: Send + Sync {
    fn label(&self) -> &str;

    fn inspect(
        &self,
        observation: &SceneObservation,
        queries: &[String],
        context: &str,
    ) -> Result<InspectorResponse, ClientError>;
}

/// Prompt text sent to an inspector for a set of queries.
pub fn inspection_prompt(queries: &[String], context: &str) -> String {
    let mut prompt = String::new();
    if !context.is_empty() {
        prompt.push_str(context);
        prompt.push('\n');
    }
    for q in queries {
        prompt.push_str("- ");
        prompt.push_str(q);
        prompt.push('\n');
    }
    prompt
}
