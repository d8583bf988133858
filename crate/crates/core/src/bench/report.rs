use crate::clients::InspectionReport;
use crate::coordinator::{Alert, Event, MissionOutcome, MissionStatus, StepResult, TimelineEntry};
use crate::plan::MissionPlan;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportStats {
    pub steps_completed: usize,
    pub steps_failed: usize,
    pub steps_skipped: usize,
    pub replans: u32,
    pub inspections: usize,
    pub alerts: usize,
    pub makespan_ticks: u64,
    pub makespan_s: f64,
    pub end_tick: u64,
    pub end_time_s: f64,
}

/// Everything the control center keeps about one mission. Times are sim ticks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalReport {
    pub mission_id: String,
    pub status: MissionStatus,
    pub statistics: ReportStats,
    /// Inspection reports in tick order.
    pub inspection_results: Vec<InspectionReport>,
    pub alerts: Vec<Alert>,
    pub timeline: Vec<TimelineEntry>,
    pub plans: Vec<MissionPlan>,
    pub safe_return_plan: Option<usize>,
    pub events: Vec<Event>,
}

pub fn aggregate_report(outcome: &MissionOutcome) -> FinalReport {
    let count = |f: fn(&StepResult) -> bool| outcome.timeline.iter().filter(|e| f(&e.result)).count();
    let mut inspection_results = outcome.inspection_results.clone();
    inspection_results.sort_by_key(|r| r.tick);
    let makespan = outcome.makespan();
    FinalReport {
        mission_id: outcome.mission_id.clone(),
        status: outcome.status,
        statistics: ReportStats {
            steps_completed: count(|r| matches!(r, StepResult::Completed)),
            steps_failed: count(|r| matches!(r, StepResult::Failed { .. })),
            steps_skipped: count(|r| matches!(r, StepResult::Skipped)),
            replans: outcome.replans,
            inspections: inspection_results.len(),
            alerts: outcome.alerts.len(),
            makespan_ticks: makespan,
            makespan_s: makespan as f64 * outcome.dt,
            end_tick: outcome.end_tick,
            end_time_s: outcome.end_tick as f64 * outcome.dt,
        },
        inspection_results,
        alerts: outcome.alerts.clone(),
        timeline: outcome.timeline.clone(),
        plans: outcome.plans.clone(),
        safe_return_plan: outcome.safe_return_plan,
        events: outcome.events.clone(),
    }
}

impl FinalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible") + "\n"
    }
}

/// Paths written for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub report: PathBuf,
    pub events: PathBuf,
    pub trace: PathBuf,
}

/// Write `<root>/<mission_id>-t<end_tick>/` with the report, event stream and trace.
pub fn write_run_dir(root: &Path, outcome: &MissionOutcome) -> std::io::Result<RunArtifacts> {
    let dir = root.join(format!("{}-t{}", outcome.mission_id, outcome.end_tick));
    std::fs::create_dir_all(&dir)?;
    let artifacts = RunArtifacts {
        report: dir.join("report.json"),
        events: dir.join("events.jsonl"),
        trace: dir.join("trace.tsv"),
        dir,
    };
    std::fs::write(&artifacts.report, aggregate_report(outcome).to_json())?;
    std::fs::write(&artifacts.events, outcome.events_jsonl())?;
    std::fs::write(&artifacts.trace, outcome.trace_tsv())?;
    Ok(artifacts)
}
