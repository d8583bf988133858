use portwatch::bench::BenchTask;
use portwatch::plan::score_plan;
use std::path::PathBuf;
use std::process::{Command, Output};

fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/assets")
}

fn portwatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_portwatch"))
        .args(args)
        .env_remove("PORTWATCH_PLANNER_URL")
        .env_remove("PORTWATCH_INSPECTOR_URL")
        .output()
        .unwrap()
}

fn asset(rel: &str) -> String {
    assets().join(rel).to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn run_succeeds_and_writes_artifacts() {
    let out = tempfile::tempdir().unwrap();
    let o = portwatch(&["run", "--mission", &asset("missions/crane_inspection.json"), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("mission crane_inspection: Succeeded"));
    assert_eq!(text.lines().filter(|l| l.ends_with("\tcompleted")).count(), 7);
    let dir = std::fs::read_dir(out.path()).unwrap().next().unwrap().unwrap().path();
    for f in ["report.json", "events.jsonl", "trace.tsv"] {
        assert!(dir.join(f).is_file(), "{f}");
    }

    let replay = portwatch(&["replay", dir.to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(0));
    let text = stdout(&replay);
    assert!(text.contains("mission ends: Succeeded"));
    assert!(text.contains("ALERT"));
    assert!(text.lines().last().unwrap().starts_with("trace: "));
}

#[test]
fn blocked_world_fails_with_exit_one() {
    let out = tempfile::tempdir().unwrap();
    let o = portwatch(&[
        "run",
        "--world",
        &asset("worlds/blocked_crane.json"),
        "--mission",
        &asset("missions/crane_inspection.json"),
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("replans 2"));
}

#[test]
fn configuration_errors_exit_two() {
    let out = tempfile::tempdir().unwrap();
    let out = out.path().to_str().unwrap();
    let mission = asset("missions/crane_inspection.json");
    let cases: [&[&str]; 4] = [
        &["run", "--world", "/nonexistent/world.json", "--mission", &mission, "--out", out],
        &["run", "--mission", "/nonexistent/mission.json", "--out", out],
        &["run", "--planner", "remote", "--mission", &mission, "--out", out],
        &["replay", "/nonexistent/run"],
    ];
    for args in cases {
        let o = portwatch(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("portwatch: "), "{args:?}");
    }
}

#[test]
fn score_matches_library() {
    let rubric = asset("tasks/crane_inspection.json");
    let task = BenchTask::load(&assets().join("tasks/crane_inspection.json")).unwrap();
    for file in ["crane_golden.json", "crane_swapped.json", "crane_corrupted.json"] {
        let plan = asset(&format!("plans/{file}"));
        let o = portwatch(&["score", &plan, "--rubric", &rubric]);
        assert_eq!(o.status.code(), Some(0));
        let s = score_plan(&std::fs::read_to_string(&plan).unwrap(), &task.rubric).unwrap();
        let expected = format!(
            "json_validity\t{:.1}\nordering\t{:.1}\npreconditions\t{:.1}\ntotal\t{:.1}\n",
            s.json_validity, s.ordering, s.preconditions, s.total
        );
        assert_eq!(stdout(&o), expected, "{file}");
    }
}

#[test]
fn stub_bench_is_deterministic_and_full_marks() {
    let tasks = asset("tasks");
    let args = ["bench", "--tasks", &tasks, "--trials", "1", "--format", "tsv"];
    let (a, b) = (portwatch(&args), portwatch(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    let text = stdout(&a);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        assert_eq!(row[3..5], ["100.00", "100.0"], "{row:?}");
    }
}

#[test]
fn bench_rejects_empty_tasks_and_unconfigured_live() {
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(portwatch(&["bench", "--tasks", empty.path().to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(portwatch(&["bench", "--tasks", &asset("tasks"), "--live"]).status.code(), Some(2));
}

#[test]
fn export_grid_writes_pgm_with_route() {
    let dir = tempfile::tempdir().unwrap();
    let pgm = dir.path().join("grid.pgm");
    let o = portwatch(&["export-grid", "--out", pgm.to_str().unwrap(), "--route", "PortDock", "CraneStandoff"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("route PortDock -> CraneStandoff: "));
    let bytes = std::fs::read(&pgm).unwrap();
    assert!(bytes.starts_with(b"P5"));
    let bad = portwatch(&["export-grid", "--out", pgm.to_str().unwrap(), "--route", "PortDock", "Atlantis"]);
    assert_eq!(bad.status.code(), Some(2));
}
