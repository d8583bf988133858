//! Acceptance suite: one [PASS]/[FAIL] line per criterion.

use portwatch::clients::{score_semantic, StubInspector, StubPlanner};
use portwatch::coordinator::{run_mission, Event, MissionOutcome, MissionStatus, ModelClients, ReplanPolicy};
use portwatch::geometry::Point;
use portwatch::mission::MissionFile;
use portwatch::nav::{plan_cells, NavError};
use portwatch::plan::{
    parse_plan, round_half_up, score_plan, ActionKind, MissionPlan, Robot, SymbolicAction, ThetaParams,
};
use portwatch::bench::BenchTask;
use portwatch::vehicles::{
    uav_step, usv_step, GuidanceMode, UavCommand, UavGuidance, UavState, UsvCommand, UsvState, VehicleConfig,
    DEFAULT_CONFIG,
};
use portwatch::world::{OccupancyGrid, Pose, SceneObservation, VisibleEntity, WorldDescription, WorldState};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/assets")
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn run_mission_file(name: &str) -> MissionOutcome {
    let mission = MissionFile::load(&assets().join("missions").join(name)).unwrap();
    let desc = mission.apply_to(&WorldDescription::default_port());
    let request = mission.request(&desc);
    let plan = mission.fixed_plan().unwrap().unwrap_or_else(|| StubPlanner.template(&request));
    run_plan(&mission, &desc, plan)
}

fn run_plan(mission: &MissionFile, desc: &WorldDescription, plan: MissionPlan) -> MissionOutcome {
    let clients = ModelClients { planner: &StubPlanner, inspector: &StubInspector };
    let policy = mission.policy(ReplanPolicy::default());
    run_mission(&mission.request(desc), plan, WorldState::from_description(desc).unwrap(), &clients, &policy)
}

fn crane_timeline() -> Outcome {
    let started = Instant::now();
    let doc = std::fs::read_to_string(assets().join("plans/crane_golden.json")).unwrap();
    let plan = parse_plan(&doc).map_err(|e| e.to_string())?;
    let mission = MissionFile::load(&assets().join("missions/crane_inspection.json")).unwrap();
    let out = run_plan(&mission, &WorldDescription::default_port(), plan);
    let elapsed = started.elapsed();
    let order: Vec<usize> = out.timeline.iter().map(|e| e.step).collect();
    ensure(order == [0, 1, 2, 3, 4, 5, 6], format!("start order {order:?}"))?;
    ensure(out.timeline.windows(2).all(|w| w[1].start > w[0].end), "a step started before its predecessor ended")?;
    ensure(out.status == MissionStatus::Succeeded, format!("status {:?}", out.status))?;
    ensure(elapsed.as_secs_f64() < 5.0, format!("took {elapsed:?}"))?;
    let starts: Vec<u64> = out.timeline.iter().map(|e| e.start).collect();
    Ok(format!("order 0..6, starts {starts:?}, {:.2} s", elapsed.as_secs_f64()))
}

fn fuzzed_plan() -> impl Strategy<Value = MissionPlan> {
    use proptest::prelude::*;
    (1usize..=20)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec((0u8..4, any::<bool>(), 0u8..6, any::<u32>()), n),
                Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
            )
        })
        .prop_map(|(specs, perm)| {
            let mut steps: Vec<SymbolicAction> = specs
                .iter()
                .enumerate()
                .map(|(i, &(kind, uav, dwell, mask))| {
                    let robot = if uav { Robot::Uav } else { Robot::Usv };
                    let (action, theta) = match kind {
                        0 => (ActionKind::Record, ThetaParams::default()),
                        1 => (ActionKind::Report, ThetaParams::default()),
                        _ => (ActionKind::Hover, ThetaParams::with_dwell(dwell as f64 * 0.05)),
                    };
                    let pre = (0..i).filter(|j| mask & (1 << (j % 32)) != 0).map(|j| perm[j]);
                    SymbolicAction::new(perm[i], action, robot).with_theta(theta).after(pre)
                })
                .collect();
            steps.sort_by_key(|s| s.id);
            MissionPlan::new("fuzz", steps)
        })
}

fn precondition_safety() -> Outcome {
    let mission = MissionFile::new("Hold position and log.");
    let desc = WorldDescription::default_port();
    let mut runner = TestRunner::new_with_rng(Config::default(), proptest::test_runner::TestRng::deterministic_rng(
        proptest::test_runner::RngAlgorithm::ChaCha,
    ));
    let strategy = fuzzed_plan();
    let (mut violations, mut steps, mut edges) = (0usize, 0usize, 0usize);
    for _ in 0..1000 {
        let plan = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        steps += plan.len();
        edges += plan.steps.iter().map(|s| s.preconditions.len()).sum::<usize>();
        let n = plan.len();
        let out = run_plan(&mission, &desc, plan);
        ensure(out.status == MissionStatus::Succeeded && out.timeline.len() == n, "fuzzed plan did not complete")?;
        violations += out.precondition_violations().len() + out.exclusivity_violations().len();
    }
    ensure(violations == 0, format!("{violations} violations"))?;
    Ok(format!("1000 plans, {steps} steps, {edges} edges, 0 violations"))
}

fn parallelism() -> Outcome {
    let mission = MissionFile::load(&assets().join("missions/two_chains.json")).unwrap();
    let desc = mission.apply_to(&WorldDescription::default_port());
    let both = mission.fixed_plan().unwrap().unwrap();
    let chain = |robot: Robot| {
        let ids: Vec<usize> = both.steps.iter().filter(|s| s.robot == robot).map(|s| s.id).collect();
        let steps = both
            .steps
            .iter()
            .filter(|s| s.robot == robot)
            .map(|s| {
                let mut s = s.clone();
                s.id = ids.iter().position(|&i| i == s.id).unwrap();
                s.preconditions = s.preconditions.iter().map(|p| ids.iter().position(|i| i == p).unwrap()).collect();
                s
            })
            .collect();
        MissionPlan::new("chain", steps)
    };
    let mut spans = Vec::new();
    for plan in [chain(Robot::Usv), chain(Robot::Uav), both.clone()] {
        let out = run_plan(&mission, &desc, plan);
        ensure(out.status == MissionStatus::Succeeded, format!("status {:?}", out.status))?;
        spans.push(out.makespan());
    }
    let (usv, uav, joint) = (spans[0], spans[1], spans[2]);
    ensure(joint < usv + uav, format!("makespan {joint} not below {usv} + {uav}"))?;
    Ok(format!("makespan {joint} < {usv} + {uav} ticks"))
}

/// a + b√2, ordered exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Surd(i64, i64);

impl Ord for Surd {
    fn cmp(&self, other: &Self) -> Ordering {
        let (x, y) = (self.0 - other.0, self.1 - other.1);
        match (x.signum(), y.signum()) {
            (0, 0) => Ordering::Equal,
            (sx, sy) if sx >= 0 && sy >= 0 => Ordering::Greater,
            (sx, sy) if sx <= 0 && sy <= 0 => Ordering::Less,
            (1, _) => (x * x).cmp(&(2 * y * y)),
            _ => (2 * y * y).cmp(&(x * x)),
        }
    }
}

impl PartialOrd for Surd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over 8-connected cells, no corner cutting, exact costs.
fn dijkstra(free: &[bool], w: usize, h: usize, s: (usize, usize), g: (usize, usize)) -> Option<Surd> {
    let ok = |i: i64, j: i64| i >= 0 && j >= 0 && (i as usize) < w && (j as usize) < h && free[j as usize * w + i as usize];
    let mut best: Vec<Option<Surd>> = vec![None; w * h];
    let mut heap = BinaryHeap::new();
    best[s.1 * w + s.0] = Some(Surd(0, 0));
    heap.push(std::cmp::Reverse((Surd(0, 0), s)));
    while let Some(std::cmp::Reverse((cost, (i, j)))) = heap.pop() {
        if best[j * w + i].is_some_and(|b| b < cost) {
            continue;
        }
        if (i, j) == g {
            return Some(cost);
        }
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                if (di, dj) == (0, 0) {
                    continue;
                }
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if !ok(ni, nj) {
                    continue;
                }
                let diagonal = di != 0 && dj != 0;
                if diagonal && !(ok(ni, j as i64) && ok(i as i64, nj)) {
                    continue;
                }
                let next = if diagonal { Surd(cost.0, cost.1 + 1) } else { Surd(cost.0 + 1, cost.1) };
                let idx = nj as usize * w + ni as usize;
                if best[idx].is_none_or(|b| next < b) {
                    best[idx] = Some(next);
                    heap.push(std::cmp::Reverse((next, (ni as usize, nj as usize))));
                }
            }
        }
    }
    None
}

fn astar_oracle() -> Outcome {
    let started = Instant::now();
    let (mut found, mut blocked) = (0, 0);
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let occupied: Vec<bool> = (0..900).map(|_| rng.random_bool(0.2)).collect();
        let free: Vec<bool> = occupied.iter().map(|o| !o).collect();
        let free_cells: Vec<(usize, usize)> = (0..900).filter(|&k| free[k]).map(|k| (k % 30, k / 30)).collect();
        let s = free_cells[rng.random_range(0..free_cells.len())];
        let g = free_cells[rng.random_range(0..free_cells.len())];
        let grid = OccupancyGrid::from_cells(30, 30, 1.0, occupied);
        let oracle = dijkstra(&free, 30, 30, s, g);
        match (plan_cells(&grid, s, g, 0.0), oracle) {
            (Ok(path), Some(Surd(a, b))) => {
                let expected = a as f64 + b as f64 * std::f64::consts::SQRT_2;
                ensure(
                    (path.straight_moves as i64, path.diagonal_moves as i64) == (a, b) && path.cost == expected,
                    format!("seed {seed}: cost {} vs oracle {expected}", path.cost),
                )?;
                found += 1;
            }
            (Err(NavError::NoPath), None) => blocked += 1,
            (got, want) => return Err(format!("seed {seed}: planner {got:?} vs oracle {want:?}")),
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    ensure(elapsed < 10.0, format!("took {elapsed:.2} s"))?;
    Ok(format!("100 grids: {found} equal costs, {blocked} agreed unreachable, {elapsed:.2} s"))
}

fn usv_circle() -> Outcome {
    let config = VehicleConfig::from_toml(DEFAULT_CONFIG).unwrap().usv;
    let (v, r, dt) = (1.5, 0.1, 0.05);
    let radius = v / r;
    let mut state = UsvState { v, ..UsvState::new(0.0, 0.0, 0.0) };
    let cmd = UsvCommand { a: 0.0, r };
    let ticks = (std::f64::consts::TAU / r / dt).round() as usize;
    let center = Point::new(0.0, radius);
    let mut worst: f64 = 0.0;
    for _ in 0..ticks {
        state = usv_step(&state, &cmd, dt, &config);
        worst = worst.max(((state.position() - center).norm() - radius).abs() / radius);
    }
    ensure(worst <= 0.02, format!("radial error {:.3}%", worst * 100.0))?;
    Ok(format!("radius {radius} m, max radial error {:.3}% over {ticks} ticks", worst * 100.0))
}

fn uav_closed_form() -> Outcome {
    let dt = 0.05;
    let a = nalgebra::Vector3::new(0.3, -0.7, 0.2);
    let (p0, v0) = (nalgebra::Vector3::new(1.0, 2.0, 3.0), nalgebra::Vector3::new(0.5, 0.25, 0.0));
    let mut state = UavState { position: p0, velocity: v0, psi: 0.0 };
    let cmd = UavCommand::new(a.x, a.y, a.z);
    let mut worst: f64 = 0.0;
    for n in 1..=1000u32 {
        state = uav_step(&state, &cmd, dt);
        let n = n as f64;
        let expected = p0 + v0 * n * dt + a * dt * dt * n * (n + 1.0) / 2.0;
        worst = worst.max((state.position - expected).norm());
    }
    ensure(worst <= 1e-9, format!("deviation {worst:e} m"))?;
    Ok(format!("max deviation {worst:.2e} m over 1000 steps"))
}

fn survey_tracking() -> Outcome {
    let config = VehicleConfig::from_toml(DEFAULT_CONFIG).unwrap().uav;
    let dt = 0.05;
    let center = Point::new(50.0, 50.0);
    let mut orbit = UavGuidance::new(GuidanceMode::Orbit360 { center, radius: 12.0, altitude: 15.0 }, &config);
    let mut state = UavState::at(40.0, 30.0, 15.0);
    for _ in 0..20_000 {
        let out = orbit.update(&state, dt);
        if out.done {
            break;
        }
        state = uav_step(&state, &out.command, dt);
    }
    ensure(orbit.swept() >= std::f64::consts::TAU, "orbit did not complete")?;
    let radial = orbit.max_radial_error() / 12.0;
    ensure(radial < 0.05, format!("orbit radial error {:.2}%", radial * 100.0))?;

    let vertices = [Point::new(150.0, 115.0), Point::new(175.0, 115.0), Point::new(175.0, 140.0), Point::new(150.0, 140.0)];
    let mut rect = UavGuidance::new(GuidanceMode::Rectangle { vertices, altitude: 20.0 }, &config);
    let mut state = UavState::at(145.0, 95.0, 20.0);
    let mut closest = [f64::INFINITY; 4];
    for _ in 0..40_000 {
        let out = rect.update(&state, dt);
        if out.done {
            break;
        }
        state = uav_step(&state, &out.command, dt);
        for (c, v) in closest.iter_mut().zip(&vertices) {
            *c = c.min((state.horizontal() - *v).norm());
        }
    }
    let worst = closest.iter().cloned().fold(0.0, f64::max);
    ensure(worst < 1.0, format!("rectangle vertex miss {worst:.3} m"))?;
    Ok(format!("orbit radial error {:.2}% of radius, worst vertex miss {worst:.3} m", radial * 100.0))
}

fn rubric_scores() -> Outcome {
    let read = |rel: &str| std::fs::read_to_string(assets().join(rel)).unwrap();
    let crane = BenchTask::load(&assets().join("tasks/crane_inspection.json")).unwrap();
    let golden = score_plan(&read("plans/crane_golden.json"), &crane.rubric).map_err(|e| e.to_string())?;
    ensure(golden.total == 100.0, format!("golden scored {}", golden.total))?;
    let corrupted = score_plan(&read("plans/crane_corrupted.json"), &crane.rubric).map_err(|e| e.to_string())?;
    ensure(corrupted.json_validity == 0.0, "corrupted plan kept validity points")?;

    let pairs = crane.rubric.precedence.len() as f64;
    let swapped = score_plan(&read("plans/crane_swapped.json"), &crane.rubric).map_err(|e| e.to_string())?;
    ensure(
        swapped.ordering == round_half_up(40.0 - 40.0 / pairs),
        format!("crane ordering {} with {pairs} pairs", swapped.ordering),
    )?;

    // A 5-step chain has 10 pairs, so one inversion costs exactly 4 points.
    let docking = BenchTask::load(&assets().join("tasks/docking_sailboats.json")).unwrap();
    let request = docking.request(&WorldDescription::default_port());
    let mut plan = StubPlanner.template(&request);
    plan.steps.swap(1, 2);
    for (i, s) in plan.steps.iter_mut().enumerate() {
        s.id = i;
        s.preconditions = (i > 0).then(|| i - 1).into_iter().collect();
    }
    let dock_pairs = docking.rubric.precedence.len() as f64;
    let one_off = score_plan(&plan.to_document(), &docking.rubric).map_err(|e| e.to_string())?;
    ensure(
        40.0 - one_off.ordering == 40.0 / dock_pairs,
        format!("docking ordering {} with {dock_pairs} pairs", one_off.ordering),
    )?;
    Ok(format!(
        "golden 100, corrupted validity 0, one inversion: -{} of 40 ({dock_pairs} pairs), {} ordering ({pairs} pairs)",
        40.0 - one_off.ordering,
        swapped.ordering
    ))
}

fn replanning() -> Outcome {
    let out = run_mission_file("crane_fault.json");
    ensure(out.status == MissionStatus::Succeeded, format!("status {:?}", out.status))?;
    ensure(out.replans == 1, format!("replans {}", out.replans))?;
    let done_before: usize =
        out.entries_of(0).iter().filter(|e| e.result == portwatch::coordinator::StepResult::Completed).count();
    let mut completed = BTreeSet::new();
    let mut previous = 0;
    for e in &out.events {
        if let Event::StepCompleted { plan, step, .. } = e {
            let objective = if *plan == 0 { *step } else { step + done_before };
            completed.insert(objective);
            ensure(completed.len() > previous, format!("objective {objective} completed twice"))?;
            previous = completed.len();
        }
    }
    ensure(completed.len() == 7, format!("{} objectives completed", completed.len()))?;
    ensure(out.plans[1].steps[0].action == ActionKind::FlyTo, "replan did not resume at FlyTo")?;
    Ok(format!("replans 1, resumed at FlyTo, completed grew 0 -> {}", completed.len()))
}

fn bench_fixture() -> Outcome {
    let output = Command::new(env!("CARGO_BIN_EXE_portwatch"))
        .args(["bench", "--format", "tsv", "--tasks"])
        .arg(assets().join("tasks"))
        .arg("--transcripts")
        .arg(assets().join("bench/transcripts.jsonl"))
        .output()
        .map_err(|e| e.to_string())?;
    ensure(output.status.success(), String::from_utf8_lossy(&output.stderr).to_string())?;
    let text = String::from_utf8(output.stdout).unwrap();
    let avg = text
        .lines()
        .find(|l| l.contains("Average across tasks"))
        .ok_or_else(|| format!("no average row in {text}"))?;
    let cols: Vec<&str> = avg.split('\t').collect();
    // (100 + 100 + 100 + 78.1 + 0) / 5, 4 of 5 executed, (7.8 + 8.5 + 7.2 + 10.0 + 8.7) / 5
    ensure(cols[3..] == ["75.62", "80.0", "8.44"], format!("average row {avg}"))?;
    Ok(format!("correctness {}, success {}%, RT {} s", cols[3], cols[4], cols[5]))
}

fn semantic_scorer() -> Outcome {
    let pose = Pose { x: 0.0, y: 0.0, z: 15.0, psi: 0.0 };
    let mut truck = SceneObservation::empty(Robot::Uav, pose, 0);
    truck.visible.push(VisibleEntity {
        label: "truck".into(),
        range: 12.0,
        bearing: 0.2,
        position: [12.0, 2.0, 0.0],
        landmark: Some("Crane".into()),
        side: None,
    });
    let empty = SceneObservation::empty(Robot::Uav, pose, 0);
    let got = [
        score_semantic("Yes, a truck near the pier.", &truck, "Is there a truck?"),
        score_semantic("Yes.", &truck, "Is there a truck?"),
        score_semantic("Yes, a person.", &empty, "Is there any human?"),
    ];
    let got: Vec<f64> = got.into_iter().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    ensure(got == [1.0, 0.5, 0.0], format!("scores {got:?}"))?;
    Ok("full 1, half 0.5, wrong 0".into())
}

fn cli_run(out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_portwatch"))
        .args(["run", "--seed", "11", "--mission"])
        .arg(assets().join("missions/joint_crane_docking.json"))
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), String::from_utf8_lossy(&status.stderr).to_string())
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cli_run(a.path())?;
    cli_run(b.path())?;
    let dir = |root: &Path| std::fs::read_dir(root).unwrap().next().unwrap().unwrap().path();
    let (da, db) = (dir(a.path()), dir(b.path()));
    ensure(da.file_name() == db.file_name(), "run directories differ")?;
    let mut bytes = 0;
    for f in ["events.jsonl", "trace.tsv", "report.json"] {
        let (x, y) = (std::fs::read(da.join(f)).unwrap(), std::fs::read(db.join(f)).unwrap());
        ensure(x == y, format!("{f} differs"))?;
        bytes += x.len();
    }
    Ok(format!("events, trace and report identical ({bytes} bytes)"))
}

fn main() {
    let criteria: [Check; 12] = [
        ("1 timeline reproduction", crane_timeline),
        ("2 precondition safety", precondition_safety),
        ("3 parallelism", parallelism),
        ("4 A* oracle equivalence", astar_oracle),
        ("5 USV kinematics", usv_circle),
        ("6 UAV double integrator", uav_closed_form),
        ("7 survey tracking", survey_tracking),
        ("8 plan scorer rubric", rubric_scores),
        ("9 replanning", replanning),
        ("10 benchmark fixtures", bench_fixture),
        ("11 semantic scorer", semantic_scorer),
        ("12 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("[PASS] {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("[FAIL] {name}: panicked");
            }
        }
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
