use super::*;
use crate::model::{validate_scenario, RawScenario, TargetSpec};

fn scenario(points: &[(f64, f64)], r0: f64) -> Scenario {
    let targets: Vec<TargetSpec> = points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| TargetSpec::new(i as u32 + 1, Point::new(x, y), 1.0, 20.0, 3.0).unwrap())
        .collect();
    let n = targets.len();
    validate_scenario(RawScenario {
        sequence: (1..=n as u32).collect(),
        targets,
        initial_uncertainty: vec![r0; n],
    })
    .unwrap()
}

fn pair(distance: f64) -> Scenario {
    scenario(&[(0.0, 0.0), (distance, 0.0)], 0.0)
}

fn triangle() -> Scenario {
    let h = 20.0 * 3f64.sqrt() / 2.0;
    scenario(&[(0.0, 0.0), (20.0, 0.0), (10.0, h)], 0.0)
}

#[test]
fn initialization_faces_neighbours() {
    let a = initialize_angles(&pair(10.0)).unwrap();
    assert_eq!(a.psi[0], 0.0);
    assert!((a.phi[1] - PI).abs() < 1e-15);
    assert!((a.psi[1] - PI).abs() < 1e-15);
    assert_eq!(a.phi[0], 0.0);
    let sc = triangle();
    let a = initialize_angles(&sc).unwrap();
    for k in 0..3 {
        let x0 = sc.visit_target(k).position;
        let x1 = sc.visit_target((k + 1) % 3).position;
        for p in [a.departure(&sc, k), a.entrance(&sc, (k + 1) % 3)] {
            let c = (p - x0).perp(&(x1 - x0));
            assert!(c.abs() < 1e-9 * (x1 - x0).norm());
            assert!((p - x0).dot(&(x1 - x0)) > 0.0);
        }
    }
}

#[test]
fn single_visit_initialization_is_rejected() {
    let t = TargetSpec::new(1, Point::zeros(), 1.0, 20.0, 3.0).unwrap();
    let sc = validate_scenario(RawScenario {
        targets: vec![t],
        sequence: vec![1],
        initial_uncertainty: vec![0.0],
    })
    .unwrap();
    assert!(matches!(initialize_angles(&sc), Err(CoordinatorError::TooFewVisits(1))));
}

#[test]
fn switch_segment_examples() {
    let s = switch_segment(Point::zeros(), Point::new(0.0, 1.0), Point::new(10.0, 0.0), Point::new(0.0, 1.0));
    assert_eq!(s.duration, 10.0);
    assert_eq!(s.d_from, 0.0);
    assert_eq!(s.d_to, 0.0);
    let s = switch_segment(Point::new(1.0, 1.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0));
    assert!(s.degenerate && s.d_from == 0.0 && s.d_to == 0.0);

    let sc = pair(10.0);
    let a = BoundaryAngles::new(vec![0.3, 2.9], vec![0.4, 3.5]).unwrap();
    let len = |psi: f64| {
        let mut b = a.clone();
        b.psi[0] = psi;
        leg(&sc, &b, 0).duration
    };
    let h = 1e-6;
    let fd = (len(0.4 + h) - len(0.4 - h)) / (2.0 * h);
    assert!((fd - leg(&sc, &a, 0).d_from).abs() < 1e-8);
}

#[test]
fn step_rule_and_update() {
    let o = BilevelOptions {
        alpha0: 0.1,
        decay: 1.0,
        ..Default::default()
    };
    assert!((o.step_size(9) - 0.01).abs() < 1e-15);
    let a = BoundaryAngles::new(vec![1.0, 2.0], vec![3.0, 4.0]).unwrap();
    assert_eq!(update_angles(&a, &[0.0; 4], 3, &o), a);
    let o = BilevelOptions {
        decay: 0.0,
        ..Default::default()
    };
    let b = update_angles(&a, &[1.0; 4], 7, &o);
    for (x, y) in b.to_vector().iter().zip(a.to_vector()) {
        assert!((y - x - 0.1).abs() < 1e-12);
    }
    assert!(BilevelOptions { alpha0: 0.0, ..Default::default() }.validate().is_err());
    assert!(BilevelOptions { decay: -1.0, ..Default::default() }.validate().is_err());
}

#[test]
fn angle_difference_wraps() {
    assert!(angle_difference(0.1, TAU - 0.1) - 0.2 < 1e-12);
    assert!((angle_difference(3.0, -3.0) - (TAU - 6.0)).abs() < 1e-12);
}

#[test]
fn cycle_bookkeeping_matches_simulation() {
    let sc = triangle();
    let o = BilevelOptions::default();
    let a = initialize_angles(&sc).unwrap();
    let run = run_cycle(&sc, &a, &[5.0, 0.0, 30.0], None, &o, 0).unwrap();
    let sum: f64 = run.record.visits.iter().map(|v| v.drain_time + v.switch_time).sum();
    assert!((sum - run.record.period).abs() < 1e-9);
    let sim = run.simulate(&sc, o.dt).unwrap();
    assert!((sim.period - run.record.period).abs() < 1e-6);
    for (k, v) in run.record.visits.iter().enumerate() {
        assert_eq!(sim.arrival_uncertainty[k], v.arrival_uncertainty);
        assert!(v.departure_uncertainty <= 1e-6);
    }
    assert_eq!(sim.final_uncertainty, run.end_uncertainty);
}

#[test]
fn prediction_matches_steady_cycle() {
    let sc = pair(20.0);
    let o = BilevelOptions::default();
    let a = initialize_angles(&sc).unwrap();
    let mut r = sc.initial_uncertainty().to_vec();
    let mut warm: Option<Vec<DrainingSolution>> = None;
    let mut runs = Vec::new();
    for n in 0..6 {
        let run = run_cycle(&sc, &a, &r, warm.as_deref(), &o, n).unwrap();
        r = run.end_uncertainty.clone();
        warm = Some(run.solutions.clone());
        runs.push(run);
    }
    let last = &runs[5].record;
    for k in 0..2 {
        let p = predicted_arrival_uncertainty(&sc, &runs[4].record, k).unwrap();
        assert!((p - last.visits[k].arrival_uncertainty).abs() <= 2e-3, "{p} vs {}", last.visits[k].arrival_uncertainty);
    }
}

#[test]
fn prediction_grows_with_travel() {
    let o = BilevelOptions::default();
    let near = pair(20.0);
    let far = pair(40.0);
    let a = initialize_angles(&near).unwrap();
    let run = run_cycle(&near, &a, &[40.0, 40.0], None, &o, 0).unwrap();
    // same visits, legs stretched by the added distance
    let mut stretched = run.record.clone();
    for v in &mut stretched.visits {
        v.switch_time += 20.0;
    }
    for k in 0..2 {
        let p1 = predicted_arrival_uncertainty(&near, &run.record, k).unwrap();
        let p2 = predicted_arrival_uncertainty(&far, &stretched, k).unwrap();
        assert!((p2 - p1 - 40.0).abs() < 1e-9, "{}", p2 - p1);
    }
}

#[test]
fn symmetric_pair_has_mirrored_gradient() {
    let sc = pair(20.0);
    let o = BilevelOptions::default();
    let a = initialize_angles(&sc).unwrap();
    let run = run_cycle(&sc, &a, &[30.0, 30.0], None, &o, 0).unwrap();
    let g = cycle_gradient(&sc, &run.record, false).unwrap();
    // mirror image through the perpendicular bisector swaps the visits and flips angles
    assert!((g[0] + g[1]).abs() < 1e-4, "{g:?}");
    assert!((g[2] + g[3]).abs() < 1e-4, "{g:?}");
}

#[test]
fn dual_gradient_matches_frozen_differences() {
    let sc = triangle();
    let o = BilevelOptions::default();
    let a = BoundaryAngles::new(vec![-2.0, 2.9, -1.3], vec![0.3, 2.3, -1.6]).unwrap();
    let run = run_cycle(&sc, &a, &[20.0, 35.0, 50.0], None, &o, 0).unwrap();
    let g = cycle_gradient(&sc, &run.record, false).unwrap();
    let tight = BilevelOptions {
        draining: DrainingOptions {
            solver: crate::nlp::SolverOptions {
                kkt_tolerance: 1e-10,
                feasibility_tolerance: 1e-12,
                ..Default::default()
            },
        },
        ..o
    };
    let fd = fd_cycle_gradient(&sc, &run.record, &run.solutions, false, 1e-4, &tight).unwrap();
    let scale = fd.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for (x, y) in g.iter().zip(&fd) {
        assert!((x - y).abs() <= 1e-3 * scale, "{g:?} vs {fd:?}");
    }
}

#[test]
fn coupled_gradient_matches_steady_state_differences() {
    let sc = triangle();
    let o = BilevelOptions::default();
    let a = BoundaryAngles::new(vec![-2.0, 2.9, -1.3], vec![0.3, 2.3, -1.6]).unwrap();
    let start = run_cycle(&sc, &a, &[20.0, 35.0, 50.0], None, &o, 0).unwrap();
    let arrivals: Vec<f64> = start.record.visits.iter().map(|v| v.arrival_uncertainty).collect();
    let (_, steady) = steady_cycle_time(&sc, &a, &arrivals, &start.solutions, &o).unwrap();
    // a cycle whose arrivals are the steady ones
    let run = run_cycle_with_arrivals(&sc, &a, &steady, &start.solutions, &o);
    let g = cycle_gradient(&sc, &run.0, true).unwrap();
    let fd = fd_cycle_gradient(&sc, &run.0, &run.1, true, 1e-4, &o).unwrap();
    let scale = fd.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for (x, y) in g.iter().zip(&fd) {
        assert!((x - y).abs() <= 1e-3 * scale, "{g:?} vs {fd:?}");
    }
}

fn run_cycle_with_arrivals(
    sc: &Scenario,
    a: &BoundaryAngles,
    arrivals: &[f64],
    warm: &[DrainingSolution],
    o: &BilevelOptions,
) -> (CycleRecord, Vec<DrainingSolution>) {
    let solutions = solve_visits(sc, a, arrivals, warm, o).unwrap();
    let visits = (0..arrivals.len())
        .map(|k| VisitRecord {
            target_id: sc.visit_target(k).id,
            arrival_uncertainty: arrivals[k],
            departure_uncertainty: 0.0,
            drain_time: solutions[k].total_time,
            inner_exit_time: solutions[k].inner_exit_time,
            switch_time: leg(sc, a, k).duration,
            lambda_phi: solutions[k].lambda_phi,
            lambda_psi: solutions[k].lambda_psi,
            lambda_r: solutions[k].lambda_r,
            mode: solutions[k].mode,
        })
        .collect();
    let record = CycleRecord {
        cycle: 0,
        angles: a.clone(),
        visits,
        period: period_of(sc, a, &solutions),
        gradient: Vec::new(),
        grad_norm: 0.0,
        uncertainty_residual: 0.0,
        cpu_seconds: Vec::new(),
    };
    (record, solutions)
}

#[test]
fn symmetric_pair_stays_at_initialization() {
    let sc = pair(20.0);
    let o = BilevelOptions::default();
    let init = initialize_angles(&sc).unwrap();
    let res = run_bilevel(&sc, &o, None).unwrap();
    assert!(res.converged, "{:?}", res.history.last());
    assert!(res.angles.max_difference(&init) < 1e-3);
}

#[test]
fn multistart_is_deterministic() {
    let a = multistart_initial_angles(3, 4, 7);
    let b = multistart_initial_angles(3, 4, 7);
    assert_eq!(a, b);
    assert_ne!(a[0], a[1]);
    assert!(a.iter().flat_map(|x| x.to_vector()).all(|v| (0.0..TAU).contains(&v)));
}
