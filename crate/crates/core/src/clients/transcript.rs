use super::{assemble_prompt_from_str, ClientError, PlannerClient, PlannerResponse, PromptBundle, ReplanContext, DEFAULT_TEMPLATE};
use crate::plan::MissionRequest;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

/// One recorded planner call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub model: String,
    pub task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_hash: Option<String>,
    pub response: String,
    pub latency_s: f64,
}

/// Hex SHA-256 of the system prompt, a newline and the user prompt.
pub fn request_hash(bundle: &PromptBundle) -> String {
    let mut h = Sha256::new();
    h.update(bundle.system_prompt.as_bytes());
    h.update(b"\n");
    h.update(bundle.user_prompt.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Replays recorded responses of one model. Each task's records are served
/// in file order.
pub struct TranscriptPlanner {
    model: String,
    records: Vec<TranscriptRecord>,
    cursors: Mutex<BTreeMap<String, usize>>,
}

impl TranscriptPlanner {
    pub fn new(model: impl Into<String>, records: Vec<TranscriptRecord>) -> Self {
        Self { model: model.into(), records, cursors: Mutex::new(BTreeMap::new()) }
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    /// Parse JSON lines and group records by model, in order of first appearance.
    pub fn from_jsonl(text: &str) -> Result<Vec<TranscriptPlanner>, ClientError> {
        let mut groups: Vec<(String, Vec<TranscriptRecord>)> = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let record: TranscriptRecord = serde_json::from_str(line)
                .map_err(|e| ClientError::InvalidResponse(format!("transcript line {}: {e}", n + 1)))?;
            if !(record.latency_s >= 0.0) {
                return Err(ClientError::InvalidResponse(format!("transcript line {}: negative latency", n + 1)));
            }
            match groups.iter_mut().find(|(m, _)| *m == record.model) {
                Some((_, recs)) => recs.push(record),
                None => groups.push((record.model.clone(), vec![record])),
            }
        }
        Ok(groups.into_iter().map(|(m, recs)| TranscriptPlanner::new(m, recs)).collect())
    }

    pub fn load(path: &Path) -> Result<Vec<TranscriptPlanner>, ClientError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ClientError::InvalidResponse(format!("{}: {e}", path.display())))?;
        Self::from_jsonl(&text)
    }

    fn respond(record: &TranscriptRecord) -> PlannerResponse {
        PlannerResponse { document: record.response.clone(), latency: Duration::from_secs_f64(record.latency_s) }
    }
}

impl PlannerClient for TranscriptPlanner {
    fn label(&self) -> &str {
        &self.model
    }

    /// Look the request up by prompt hash.
    fn plan(&self, request: &MissionRequest, _replan: Option<&ReplanContext>) -> Result<PlannerResponse, ClientError> {
        let hash = request_hash(&assemble_prompt_from_str(request, DEFAULT_TEMPLATE)?);
        self.records
            .iter()
            .find(|r| r.request_hash.as_deref() == Some(hash.as_str()))
            .map(Self::respond)
            .ok_or(ClientError::NoRecordedResponse(hash))
    }

    fn plan_for_task(&self, task: &str, _request: &MissionRequest) -> Result<PlannerResponse, ClientError> {
        let mut cursors = self.cursors.lock().expect("transcript cursor poisoned");
        let cursor = cursors.entry(task.to_string()).or_default();
        let record = self
            .records
            .iter()
            .filter(|r| r.task == task)
            .nth(*cursor)
            .ok_or_else(|| ClientError::NoRecordedResponse(format!("{} / {task} #{cursor}", self.model)))?;
        *cursor += 1;
        Ok(Self::respond(record))
    }
}
