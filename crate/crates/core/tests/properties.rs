use std::f64::consts::PI;

use proptest::prelude::*;

use pmcycle::coordinator::{epsilon_annulus, multistart_initial_angles, run_multistart, BilevelOptions};
use pmcycle::draining::{solve_draining, DrainingOptions, DrainingProblem};
use pmcycle::io::{parse_scenario, scenario_to_toml};
use pmcycle::model::{validate_scenario, Point, RawScenario, TargetSpec};
use pmcycle::sim::{displacement_endpoint, homotopy_blend, ControlPiece, Phase};

fn target_strategy() -> impl Strategy<Value = TargetSpec> {
    (0.1f64..5.0, 1.05f64..40.0, 0.2f64..10.0, -50.0f64..50.0, -50.0f64..50.0)
        .prop_map(|(a, ratio, r, x, y)| TargetSpec::new(1, Point::new(x, y), a, a * ratio, r).unwrap())
}

fn pieces_strategy() -> impl Strategy<Value = Vec<ControlPiece>> {
    prop::collection::vec((0.01f64..2.0, 0.0f64..1.0, 0.0..2.0 * PI), 1..8).prop_map(|v| {
        v.into_iter()
            .map(|(d, m, a)| ControlPiece::new(d, m * Point::new(a.cos(), a.sin()), Phase::Draining(0)))
            .collect()
    })
}

/// Appends a piece to `u2` so it ends where `u1` does.
fn matched_pair(u1: Vec<ControlPiece>, mut u2: Vec<ControlPiece>, slack: f64) -> (Vec<ControlPiece>, Vec<ControlPiece>) {
    let gap = displacement_endpoint(Point::zeros(), &u1) - displacement_endpoint(Point::zeros(), &u2);
    let duration = gap.norm() * (1.0 + slack) + 1e-3;
    u2.push(ControlPiece::new(duration, gap / duration, Phase::Draining(0)));
    (u1, u2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn annulus_accumulation_is_nonnegative(t in target_strategy(), psi0 in -PI..PI, psi in -PI..PI) {
        let eps = epsilon_annulus(&t, psi0, psi);
        prop_assert!(eps >= -1e-12 * t.sensing_gain * t.sensing_radius, "{eps}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn homotopy_blend_is_feasible(u1 in pieces_strategy(), u2 in pieces_strategy(), slack in 0.0f64..1.0) {
        let (u1, u2) = matched_pair(u1, u2, slack);
        let end = displacement_endpoint(Point::zeros(), &u1);
        for sigma in [0.25, 0.5, 0.75] {
            let blend = homotopy_blend(&u1, &u2, sigma, 64);
            prop_assert!(blend.iter().all(|p| p.control.norm() <= 1.0 + 1e-9));
            let miss = (displacement_endpoint(Point::zeros(), &blend) - end).norm();
            prop_assert!(miss <= 1e-6, "sigma {sigma}: miss {miss}");
        }
    }

    #[test]
    fn scenario_round_trips(x in -100.0f64..100.0, y in -100.0f64..100.0, r0 in 0.0f64..100.0, a in 0.1f64..3.0) {
        let targets = vec![
            TargetSpec::new(4, Point::new(x, y), a, 20.0 * a, 3.0).unwrap(),
            TargetSpec::new(9, Point::new(x + 10.0, y - 0.5), 1.0, 7.5, 2.5).unwrap(),
        ];
        let sc = validate_scenario(RawScenario { targets, sequence: vec![9, 4], initial_uncertainty: vec![r0, 0.0] }).unwrap();
        prop_assert_eq!(parse_scenario(&scenario_to_toml(&sc)).unwrap(), sc);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn optimal_time_is_monotone_in_arrival_uncertainty(phi in -PI..PI, turn in 0.5f64..PI) {
        let t = TargetSpec::new(1, Point::new(0.0, 0.0), 1.0, 20.0, 3.0).unwrap();
        let mut last = 0.0;
        for step in 0..8 {
            let arrival = 20.0 * step as f64;
            let p = DrainingProblem::from_angles(t.clone(), phi, phi + turn, arrival, 20).unwrap();
            let time = solve_draining(&p, None, &DrainingOptions::default()).unwrap().total_time;
            prop_assert!(time >= last - 1e-6 * time, "{arrival}: {time} < {last}");
            last = time;
        }
    }
}

#[test]
fn seeded_multistart_is_deterministic() {
    let h = 20.0 * 3f64.sqrt() / 2.0;
    let targets = [(0.0, 0.0), (20.0, 0.0), (10.0, h)]
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| TargetSpec::new(i as u32 + 1, Point::new(x, y), 1.0, 20.0, 3.0).unwrap())
        .collect();
    let sc = validate_scenario(RawScenario { targets, sequence: vec![1, 2, 3], initial_uncertainty: vec![0.0; 3] }).unwrap();
    assert_eq!(multistart_initial_angles(3, 4, 11), multistart_initial_angles(3, 4, 11));
    assert_ne!(multistart_initial_angles(3, 4, 11), multistart_initial_angles(3, 4, 12));
    let o = BilevelOptions { max_cycles: 15, ..Default::default() };
    let a = run_multistart(&sc, &o, 2, 11);
    let b = run_multistart(&sc, &o, 2, 11);
    assert_eq!(a, b);
}
