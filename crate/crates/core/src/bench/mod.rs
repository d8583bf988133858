//! Planner benchmark harness and final mission reports.

mod report;

pub use report::{aggregate_report, write_run_dir, FinalReport, ReportStats, RunArtifacts};

use crate::clients::{PlannerClient, StubInspector};
use crate::coordinator::{admit_plan, run_mission, MissionStatus, ModelClients, ReplanPolicy};
use crate::plan::{score_plan, MissionRequest, PlanScore, ScoreError, ScoringRubric};
use crate::world::{WorldDescription, WorldState};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("trials per cell must be at least 1")]
    NoTrials,
    #[error("{path}: {detail}")]
    TaskFile { path: String, detail: String },
    #[error("no task files in {0}")]
    NoTasks(String),
    #[error("task {task}: {source}")]
    Rubric { task: String, source: ScoreError },
}

/// A benchmark task: an instruction and the rubric its plans are scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTask {
    pub name: String,
    pub instruction: String,
    pub rubric: ScoringRubric,
}

impl BenchTask {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let fail = |detail: String| BenchError::TaskFile { path: path.display().to_string(), detail };
        let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| fail(e.to_string()))
    }

    /// Every `*.json` task in `dir`, sorted by name.
    pub fn load_dir(dir: &Path) -> Result<Vec<Self>, BenchError> {
        let entries = std::fs::read_dir(dir)
            .map_err(|e| BenchError::TaskFile { path: dir.display().to_string(), detail: e.to_string() })?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut tasks = paths.iter().map(|p| Self::load(p)).collect::<Result<Vec<_>, _>>()?;
        if tasks.is_empty() {
            return Err(BenchError::NoTasks(dir.display().to_string()));
        }
        tasks.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(tasks)
    }

    pub fn request(&self, world: &WorldDescription) -> MissionRequest {
        crate::mission::MissionFile::new(self.instruction.clone()).request(world)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub score: PlanScore,
    pub executed: bool,
    pub latency_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// All trials of one (model, task) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub model: String,
    pub task: String,
    pub trials: Vec<Trial>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl BenchRun {
    pub fn correctness(&self) -> f64 {
        mean(self.trials.iter().map(|t| t.score.total))
    }

    pub fn success_rate(&self) -> f64 {
        mean(self.trials.iter().map(|t| if t.executed { 1.0 } else { 0.0 }))
    }

    pub fn latency(&self) -> f64 {
        mean(self.trials.iter().map(|t| t.latency_s))
    }
}

/// One summary row: a cell, or a model's average across tasks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub model: String,
    pub task: String,
    pub trials: usize,
    pub correctness: f64,
    pub success_pct: f64,
    pub latency_s: f64,
}

pub const AVERAGE_LABEL: &str = "Average across tasks";

/// Cell rows grouped by model, each group followed by its average row.
pub fn summarize(runs: &[BenchRun]) -> Vec<SummaryRow> {
    let mut models: Vec<&str> = Vec::new();
    for r in runs {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
    }
    let mut rows = Vec::new();
    for model in models {
        let cells: Vec<SummaryRow> = runs
            .iter()
            .filter(|r| r.model == model)
            .map(|r| SummaryRow {
                model: r.model.clone(),
                task: r.task.clone(),
                trials: r.trials.len(),
                correctness: r.correctness(),
                success_pct: 100.0 * r.success_rate(),
                latency_s: r.latency(),
            })
            .collect();
        let average = SummaryRow {
            model: model.to_string(),
            task: AVERAGE_LABEL.to_string(),
            trials: cells.iter().map(|c| c.trials).sum(),
            correctness: mean(cells.iter().map(|c| c.correctness)),
            success_pct: mean(cells.iter().map(|c| c.success_pct)),
            latency_s: mean(cells.iter().map(|c| c.latency_s)),
        };
        rows.extend(cells);
        rows.push(average);
    }
    rows
}

const HEADER: [&str; 6] = ["model", "task", "trials", "correctness", "success_pct", "rt_s"];

fn cells(row: &SummaryRow) -> [String; 6] {
    [
        row.model.clone(),
        row.task.clone(),
        row.trials.to_string(),
        format!("{:.2}", row.correctness),
        format!("{:.1}", row.success_pct),
        format!("{:.2}", row.latency_s),
    ]
}

/// Tab-separated table with a header line.
pub fn table_tsv(rows: &[SummaryRow]) -> String {
    let mut out = HEADER.join("\t") + "\n";
    for r in rows {
        out += &(cells(r).join("\t") + "\n");
    }
    out
}

/// Space-aligned table; text columns left-aligned, numbers right-aligned.
pub fn table_text(rows: &[SummaryRow]) -> String {
    let body: Vec<[String; 6]> = rows.iter().map(cells).collect();
    let mut width = HEADER.map(str::len);
    for r in &body {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |r: &[String]| {
        let mut s = String::new();
        for (i, c) in r.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            if i < 2 {
                let _ = write!(s, "{c:<w$}", w = width[i]);
            } else {
                let _ = write!(s, "{c:>w$}", w = width[i]);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&HEADER.map(String::from));
    out += &line(&width.map(|w| "-".repeat(w)));
    for r in &body {
        out += &line(r);
    }
    out
}

fn trial(task: &BenchTask, request: &MissionRequest, client: &dyn PlannerClient, world: &WorldState) -> Trial {
    let response = match client.plan_for_task(&task.name, request) {
        Ok(r) => r,
        Err(e) => {
            return Trial { score: PlanScore::ZERO, executed: false, latency_s: 0.0, error: Some(e.to_string()) }
        }
    };
    let latency_s = response.latency.as_secs_f64();
    let score = score_plan(&response.document, &task.rubric).unwrap_or(PlanScore::ZERO);
    let (executed, error) = match admit_plan(&response.document, request, false) {
        Err(e) => (false, Some(e.to_string())),
        Ok((plan, _)) => {
            let clients = ModelClients { planner: client, inspector: &StubInspector };
            let policy = ReplanPolicy::default().with_max_replans(0);
            let out = run_mission(request, plan, world.clone(), &clients, &policy);
            (out.status == MissionStatus::Succeeded, None)
        }
    };
    Trial { score, executed, latency_s, error }
}

fn run_cell(task: &BenchTask, client: &dyn PlannerClient, trials: usize, world: &WorldState, desc: &WorldDescription) -> BenchRun {
    let request = task.request(desc);
    BenchRun {
        model: client.label().to_string(),
        task: task.name.clone(),
        trials: (0..trials).map(|_| trial(task, &request, client, world)).collect(),
    }
}

/// Score and execute `trials` plans per (model, task) cell. Cells run on up
/// to `parallelism` threads; trials within a cell run in order. Results come
/// back model-major, tasks in the given order.
pub fn run_benchmark(
    tasks: &[BenchTask],
    clients: &[&dyn PlannerClient],
    trials: usize,
    world: &WorldDescription,
    parallelism: usize,
) -> Result<Vec<BenchRun>, BenchError> {
    if trials == 0 {
        return Err(BenchError::NoTrials);
    }
    for t in tasks {
        if t.rubric.is_empty() {
            return Err(BenchError::Rubric { task: t.name.clone(), source: ScoreError::EmptyRubric });
        }
    }
    let state = WorldState::from_description(world)
        .map_err(|e| BenchError::TaskFile { path: "world".into(), detail: e.to_string() })?;
    let jobs: Vec<(&dyn PlannerClient, &BenchTask)> =
        clients.iter().flat_map(|c| tasks.iter().map(move |t| (*c, t))).collect();
    let mut results: Vec<Option<BenchRun>> = vec![None; jobs.len()];
    for (batch, slots) in jobs.chunks(parallelism.max(1)).zip(results.chunks_mut(parallelism.max(1))) {
        std::thread::scope(|scope| {
            let handles: Vec<_> = batch
                .iter()
                .map(|(client, task)| {
                    let state = &state;
                    scope.spawn(move || run_cell(task, *client, trials, state, world))
                })
                .collect();
            for (slot, h) in slots.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("benchmark cell panicked"));
            }
        });
    }
    Ok(results.into_iter().map(|r| r.expect("every cell ran")).collect())
}
