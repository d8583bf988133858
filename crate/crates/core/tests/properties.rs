use portwatch::depgraph::{build_graph, ready_set, ExecutionState};
use portwatch::geometry::{wrap_angle, Bounds, Point, Polygon};
use portwatch::plan::{parse_plan, score_plan, ActionKind, MissionPlan, Robot, ScoringRubric, SymbolicAction, ThetaParams};
use portwatch::vehicles::{
    uav_step, usv_step, GuidanceMode, UavCommand, UavConfig, UavGuidance, UavState, UsvCommand, UsvState,
    UsvTracker, VehicleConfig, DEFAULT_CONFIG,
};
use portwatch::world::{build_grid, WorldDescription, WorldState};
use proptest::prelude::*;
use std::collections::BTreeSet;
use std::f64::consts::PI;

fn plans() -> impl Strategy<Value = MissionPlan> {
    (1usize..=15)
        .prop_flat_map(|n| proptest::collection::vec((0u8..3, any::<bool>(), any::<u16>(), 0u8..20), n))
        .prop_map(|specs| {
            let steps = specs
                .iter()
                .enumerate()
                .map(|(i, &(kind, uav, mask, dwell))| {
                    let robot = if uav { Robot::Uav } else { Robot::Usv };
                    let (action, theta) = match kind {
                        0 => (ActionKind::Record, ThetaParams::default()),
                        1 => (ActionKind::Report, ThetaParams::default()),
                        _ => (ActionKind::Hover, ThetaParams::with_dwell(dwell as f64 * 0.25)),
                    };
                    SymbolicAction::new(i, action, robot)
                        .with_theta(theta)
                        .after((0..i).filter(|j| mask & (1 << (j % 16)) != 0))
                })
                .collect();
            MissionPlan::new("prop", steps)
        })
}

fn usv_config() -> portwatch::vehicles::UsvConfig {
    VehicleConfig::from_toml(DEFAULT_CONFIG).unwrap().usv
}

proptest! {
    #[test]
    fn plan_document_round_trips(plan in plans()) {
        let parsed = parse_plan(&plan.to_document()).unwrap();
        prop_assert_eq!(&parsed, &plan);
        prop_assert_eq!(parse_plan(&parsed.to_document()).unwrap(), plan);
    }

    #[test]
    fn scores_stay_in_range(golden in plans(), candidate in plans(), cut in 0usize..40) {
        let rubric = ScoringRubric::from_reference(&golden).unwrap();
        prop_assume!(!rubric.is_empty());
        let doc = candidate.to_document();
        let truncated = &doc[..cut.min(doc.len())];
        for d in [doc.as_str(), truncated] {
            let s = score_plan(d, &rubric).unwrap();
            prop_assert!((0.0..=100.0).contains(&s.total));
        }
        prop_assert_eq!(score_plan(&golden.to_document(), &rubric).unwrap().total, 100.0);
    }

    #[test]
    fn graph_edges_match_preconditions(plan in plans()) {
        let graph = build_graph(&plan).unwrap();
        let edges: BTreeSet<(usize, usize)> = graph.edges().into_iter().collect();
        let declared: BTreeSet<(usize, usize)> =
            plan.steps.iter().flat_map(|s| s.preconditions.iter().map(move |&p| (p, s.id))).collect();
        prop_assert_eq!(edges, declared);
    }

    #[test]
    fn ready_rounds_terminate_safely(plan in plans()) {
        let graph = build_graph(&plan).unwrap();
        let mut state = ExecutionState::new(&graph);
        let mut done = BTreeSet::new();
        let mut rounds = 0;
        while !state.is_finished() {
            let ready = ready_set(&graph, &state);
            prop_assert_eq!(&ready, &ready_set(&graph, &state));
            prop_assert!(!ready.is_empty());
            for &id in &ready {
                prop_assert!(graph.prerequisites(id).is_subset(&done));
                state.start(&graph, id).unwrap();
            }
            for id in ready {
                state.mark_complete(id).unwrap();
                done.insert(id);
            }
            rounds += 1;
        }
        prop_assert!(rounds <= plan.len());
        prop_assert_eq!(done.len(), plan.len());
    }

    #[test]
    fn grid_ignores_vertex_order(x in 5.0..80.0f64, y in 5.0..60.0f64, w in 1.0..15.0f64, h in 1.0..15.0f64, rot in 0usize..4, rev in any::<bool>()) {
        let bounds = Bounds::new([0.0, 0.0, 0.0], [100.0, 80.0, 50.0]);
        let rect = Polygon::rect(x, y, x + w, y + h);
        let mut vertices = rect.vertices.clone();
        vertices.rotate_left(rot);
        if rev {
            vertices.reverse();
        }
        let a = build_grid(std::slice::from_ref(&rect), &bounds, 0.5, 1.0).unwrap();
        let b = build_grid(&[Polygon::new(vertices)], &bounds, 0.5, 1.0).unwrap();
        let twice = build_grid(&[rect.clone(), rect], &bounds, 0.5, 1.0).unwrap();
        prop_assert_eq!(a.cells(), b.cells());
        prop_assert_eq!(a.cells(), twice.cells());
    }

    #[test]
    fn observation_survives_translation(dx in -500.0..500.0f64, dy in -500.0..500.0f64) {
        let desc = WorldDescription::default_port();
        let (a, b) = (WorldState::from_description(&desc).unwrap(), WorldState::from_description(&desc.translated(dx, dy)).unwrap());
        for robot in [Robot::Usv, Robot::Uav] {
            let labels = |w: &WorldState| w.observe(robot).visible.into_iter().map(|e| e.label).collect::<Vec<_>>();
            prop_assert_eq!(labels(&a), labels(&b));
        }
    }

    #[test]
    fn usv_yaw_stays_wrapped(psi in -10.0..10.0f64, v in -3.0..3.0f64, r in -5.0..5.0f64, a in -5.0..5.0f64, n in 1usize..400) {
        let cfg = usv_config();
        let mut s = UsvState { v, ..UsvState::new(0.0, 0.0, psi) };
        for _ in 0..n {
            s = usv_step(&s, &UsvCommand { a, r }, 0.05, &cfg);
            prop_assert!(s.psi > -PI && s.psi <= PI);
            prop_assert!(s.v.abs() <= cfg.v_max);
        }
        prop_assert!(wrap_angle(s.psi) == s.psi);
    }

    #[test]
    fn controllers_respect_saturation(
        x in -60.0..60.0f64, y in -60.0..60.0f64, psi in -PI..PI, v in -3.0..3.0f64,
        vx in -6.0..6.0f64, vy in -6.0..6.0f64, vz in -3.0..3.0f64, z in 0.0..40.0f64,
    ) {
        let cfg = usv_config();
        let mut tracker = UsvTracker::new(vec![Point::new(0.0, 0.0), Point::new(30.0, 10.0)], &cfg);
        let out = tracker.track(&UsvState { v, ..UsvState::new(x, y, psi) }, 0.05);
        prop_assert!(out.command.a.abs() <= cfg.a_max && out.command.r.abs() <= cfg.r_max);

        let uav_cfg = UavConfig::default();
        let state = UavState { velocity: nalgebra::Vector3::new(vx, vy, vz), ..UavState::at(x, y, z) };
        let modes = [
            GuidanceMode::Orbit360 { center: Point::new(0.0, 0.0), radius: 12.0, altitude: 15.0 },
            GuidanceMode::Point { target: nalgebra::Vector3::new(10.0, -5.0, 20.0) },
        ];
        for mode in modes {
            let cmd = UavGuidance::new(mode, &uav_cfg).update(&state, 0.05).command;
            prop_assert!(cmd.accel.iter().all(|u| u.abs() <= uav_cfg.u_max));
        }
    }

    #[test]
    fn uav_hover_is_a_fixed_point(x in -100.0..100.0f64, y in -100.0..100.0f64, z in 0.0..50.0f64) {
        let s = UavState::at(x, y, z);
        prop_assert_eq!(uav_step(&s, &UavCommand::default(), 0.05), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn usv_reaches_nearby_waypoint(range in 2.0..50.0f64, bearing in -PI..PI, psi in -PI..PI) {
        let cfg = usv_config();
        let start = Point::new(range * bearing.cos(), range * bearing.sin());
        let mut tracker = UsvTracker::new(vec![Point::new(0.0, 0.0)], &cfg);
        let mut s = UsvState::new(start.x, start.y, psi);
        let mut reached = None;
        for k in 0..5000 {
            let out = tracker.track(&s, 0.05);
            if out.complete {
                reached = Some(k);
                break;
            }
            s = usv_step(&s, &out.command, 0.05, &cfg);
        }
        prop_assert!(reached.is_some(), "still {:.2} m away", s.position().coords.norm());
    }
}
