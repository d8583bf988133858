use crate::{BenchArgs, Mode, RunArgs, TableFormat};
use portwatch::bench::{run_benchmark, summarize, table_text, table_tsv, write_run_dir, BenchTask};
use portwatch::clients::{
    InspectorClient, PlannerClient, RemoteConfig, RemoteInspector, RemotePlanner, StubInspector, StubPlanner,
    TranscriptPlanner,
};
use portwatch::coordinator::{plan_mission, run_mission, Event, MissionStatus, ModelClients, ReplanPolicy, StepResult};
use portwatch::mission::MissionFile;
use portwatch::nav::plan_path;
use portwatch::plan::{score_plan, ScoringRubric};
use portwatch::world::{WorldDescription, WorldState};
use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::process::ExitCode;

pub const PLANNER_ENV: &str = "PORTWATCH_PLANNER";
pub const INSPECTOR_ENV: &str = "PORTWATCH_INSPECTOR";

/// A configuration problem; reported on stderr with exit status 2.
#[derive(Debug)]
pub struct ConfigError(String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn config<E: fmt::Display>(context: &str) -> impl FnOnce(E) -> ConfigError + '_ {
    move |e| ConfigError(format!("{context}: {e}"))
}

type CmdResult = Result<ExitCode, ConfigError>;

fn load_world(path: Option<&Path>) -> Result<WorldDescription, ConfigError> {
    match path {
        None => Ok(WorldDescription::default_port()),
        Some(p) => WorldDescription::load(p).map_err(config("world")),
    }
}

fn remote_config(prefix: &str) -> Result<RemoteConfig, ConfigError> {
    if !RemoteConfig::env_present(prefix) {
        return Err(ConfigError(format!(
            "remote mode needs {prefix}_URL, {prefix}_MODEL and {prefix}_API_KEY to be set"
        )));
    }
    RemoteConfig::from_env(prefix).map_err(config("remote endpoint"))
}

pub fn run(args: &RunArgs) -> CmdResult {
    let mut desc = load_world(args.world.as_deref())?;
    if let Some(seed) = args.seed {
        desc.seed = seed;
    }
    let mission = MissionFile::load(&args.mission).map_err(config("mission"))?;
    let fixed = mission.fixed_plan().map_err(config("mission"))?;
    let desc = mission.apply_to(&desc);

    let planner: Box<dyn PlannerClient> = match args.planner {
        Mode::Stub => Box::new(StubPlanner),
        Mode::Remote => Box::new(RemotePlanner::new(remote_config(PLANNER_ENV)?).map_err(config("planner"))?),
    };
    let inspector: Box<dyn InspectorClient> = match args.inspector {
        Mode::Stub => Box::new(StubInspector),
        Mode::Remote => Box::new(RemoteInspector::new(remote_config(INSPECTOR_ENV)?).map_err(config("inspector"))?),
    };
    let world = WorldState::from_description(&desc).map_err(config("world"))?;
    let request = mission.request(&desc);
    request.validate().map_err(config("mission"))?;

    let plan = match fixed {
        Some(p) => p,
        None => match plan_mission(&request, planner.as_ref()) {
            Ok((p, _)) => p,
            Err(e) => {
                eprintln!("portwatch: mission failed before execution: {e}");
                return Ok(ExitCode::from(1));
            }
        },
    };
    let policy = mission.policy(ReplanPolicy { max_replans: args.max_replans, ..ReplanPolicy::default() });
    let clients = ModelClients { planner: planner.as_ref(), inspector: inspector.as_ref() };
    let outcome = run_mission(&request, plan, world, &clients, &policy);
    let artifacts = write_run_dir(&args.out, &outcome).map_err(config("output"))?;

    println!("mission {}: {}", outcome.mission_id, outcome.status.as_str());
    println!("plan\tstep\trobot\taction\tstart\tend\tresult");
    for e in &outcome.timeline {
        let result = match &e.result {
            StepResult::Completed => "completed".to_string(),
            StepResult::Failed { failure } => format!("failed: {failure}"),
            StepResult::Skipped => "skipped".to_string(),
        };
        println!("{}\t{}\t{}\t{}\t{}\t{}\t{}", e.plan, e.step, e.robot, e.action, e.start, e.end, result);
    }
    println!(
        "replans {}  inspections {}  alerts {}  end tick {}",
        outcome.replans,
        outcome.inspection_results.len(),
        outcome.alerts.len(),
        outcome.end_tick
    );
    println!("output {}", artifacts.dir.display());
    Ok(if outcome.status == MissionStatus::Succeeded { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

/// A rubric file holds either a bare rubric or a whole task.
fn load_rubric(path: &Path) -> Result<ScoringRubric, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(config("rubric"))?;
    if let Ok(rubric) = ScoringRubric::from_json(&text) {
        return Ok(rubric);
    }
    serde_json::from_str::<BenchTask>(&text).map(|t| t.rubric).map_err(config("rubric"))
}

pub fn score(plan: &Path, rubric: &Path) -> CmdResult {
    let document = std::fs::read_to_string(plan).map_err(config("plan"))?;
    let rubric = load_rubric(rubric)?;
    let s = score_plan(&document, &rubric).map_err(config("rubric"))?;
    println!("json_validity\t{:.1}", s.json_validity);
    println!("ordering\t{:.1}", s.ordering);
    println!("preconditions\t{:.1}", s.preconditions);
    println!("total\t{:.1}", s.total);
    Ok(ExitCode::SUCCESS)
}

pub fn bench(args: &BenchArgs) -> CmdResult {
    let tasks = BenchTask::load_dir(&args.tasks).map_err(config("tasks"))?;
    let world = load_world(args.world.as_deref())?;
    let mut runs = Vec::new();
    if let Some(path) = &args.transcripts {
        let planners = TranscriptPlanner::load(path).map_err(config("transcripts"))?;
        for planner in &planners {
            let mut counts: Vec<(BenchTask, usize)> = Vec::new();
            for task in &tasks {
                let n = planner.records().iter().filter(|r| r.task == task.name).count();
                if n > 0 {
                    counts.push((task.clone(), n));
                }
            }
            let trials = counts.first().map(|(_, n)| *n).unwrap_or(0);
            if counts.iter().any(|(_, n)| *n != trials) {
                return Err(ConfigError(format!(
                    "transcripts: model {} has unequal record counts across tasks",
                    planner.label()
                )));
            }
            if trials == 0 {
                continue;
            }
            let cell_tasks: Vec<BenchTask> = counts.into_iter().map(|(t, _)| t).collect();
            let clients: Vec<&dyn PlannerClient> = vec![planner];
            runs.extend(run_benchmark(&cell_tasks, &clients, trials, &world, args.parallel).map_err(config("bench"))?);
        }
        if runs.is_empty() {
            return Err(ConfigError("transcripts: no records match any task".into()));
        }
    } else {
        let planner: Box<dyn PlannerClient> = if args.live {
            Box::new(RemotePlanner::new(remote_config(PLANNER_ENV)?).map_err(config("planner"))?)
        } else {
            Box::new(StubPlanner)
        };
        let clients: Vec<&dyn PlannerClient> = vec![planner.as_ref()];
        runs = run_benchmark(&tasks, &clients, args.trials, &world, args.parallel).map_err(config("bench"))?;
    }
    let rows = summarize(&runs);
    match args.format {
        TableFormat::Text => print!("{}", table_text(&rows)),
        TableFormat::Tsv => print!("{}", table_tsv(&rows)),
    }
    Ok(ExitCode::SUCCESS)
}

pub fn export_grid(world: Option<&Path>, out: &Path, route: Option<&[String]>) -> CmdResult {
    let desc = load_world(world)?;
    let state = WorldState::from_description(&desc).map_err(config("world"))?;
    let cells = match route {
        None => Vec::new(),
        Some([from, to]) => {
            let point = |name: &String| {
                state.landmark(name).ok_or_else(|| ConfigError(format!("route: unknown landmark {name}")))
            };
            let path = plan_path(state.grid(), &point(from)?, &point(to)?, 0.0).map_err(config("route"))?;
            println!("route {from} -> {to}: {:.1} m", path.length(state.grid().resolution));
            path.cells
        }
        Some(_) => return Err(ConfigError("route takes two landmarks".into())),
    };
    std::fs::write(out, state.grid().to_pgm(&cells)).map_err(config("output"))?;
    let grid = state.grid();
    println!("grid {}x{} ({} occupied) -> {}", grid.width, grid.height, grid.occupied_count(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn describe(event: &Event) -> (u64, String) {
    match event {
        Event::MissionStart { tick, mission_id, steps } => (*tick, format!("mission {mission_id} starts, {steps} steps")),
        Event::StepStarted { tick, plan, step, robot, action } => {
            (*tick, format!("start    {plan}.{step} {robot} {action}"))
        }
        Event::StepCompleted { tick, plan, step, robot, action } => {
            (*tick, format!("complete {plan}.{step} {robot} {action}"))
        }
        Event::StepFailed { tick, plan, step, robot, action, reason } => {
            (*tick, format!("fail     {plan}.{step} {robot} {action}: {reason}"))
        }
        Event::Inspection { tick, plan, step, robot, concerns } => {
            (*tick, format!("inspect  {plan}.{step} {robot}: {concerns} concern(s)"))
        }
        Event::Alert { tick, plan, step, robot, concern } => (*tick, format!("ALERT    {plan}.{step} {robot}: {concern}")),
        Event::RecordingStarted { tick, robot } => (*tick, format!("recording started on {robot}")),
        Event::ReportFlushed { tick, robot, reports } => (*tick, format!("{robot} flushed {reports} report(s)")),
        Event::BoundaryViolation { tick, robot } => (*tick, format!("{robot} clamped at the workspace boundary")),
        Event::Replanned { tick, plan, steps, reason } => (*tick, format!("replanned as plan {plan} ({steps} steps): {reason}")),
        Event::ReplanFailed { tick, error } => (*tick, format!("replanning failed: {error}")),
        Event::SafeReturn { tick, plan, steps } => (*tick, format!("safe return as plan {plan} ({steps} steps)")),
        Event::Aborted { tick } => (*tick, "operator abort".to_string()),
        Event::MissionEnd { tick, status } => (*tick, format!("mission ends: {}", status.as_str())),
    }
}

/// Accepts a run directory or an events file.
pub fn replay(run: &Path) -> CmdResult {
    let events_path = if run.is_dir() { run.join("events.jsonl") } else { run.to_path_buf() };
    let text = std::fs::read_to_string(&events_path).map_err(config("events"))?;
    let mut out = std::io::stdout().lock();
    let mut end = None;
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let event: Event =
            serde_json::from_str(line).map_err(|e| ConfigError(format!("events line {}: {e}", n + 1)))?;
        if let Event::MissionEnd { status, .. } = &event {
            end = Some(*status);
        }
        let (tick, what) = describe(&event);
        if writeln!(out, "{tick:>7}  {what}").is_err() {
            return Ok(ExitCode::SUCCESS);
        }
    }
    let trace = events_path.with_file_name("trace.tsv");
    if let Ok(t) = std::fs::read_to_string(&trace) {
        let _ = writeln!(out, "trace: {} rows", t.lines().count().saturating_sub(1));
    }
    match end {
        Some(_) => Ok(ExitCode::SUCCESS),
        None => Err(ConfigError("event stream has no mission_end".into())),
    }
}
