//! Acceptance criteria 1 to 8. Prints one line per criterion and exits
//! nonzero when a criterion fails unless it is listed in `KNOWN_FAILURES`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pmcycle::baseline::{run_greedy_baseline, BaselineOptions};
use pmcycle::coordinator::{
    cycle_gradient, epsilon_annulus, epsilon_annulus_printed_variant, fd_cycle_gradient, initialize_angles, multistart_initial_angles,
    run_bilevel, run_cycle, run_multistart, BilevelOptions, BoundaryAngles,
};
use pmcycle::draining::{relaxed_replay, replay_solution, solve_draining, verify_solution, DrainingOptions, DrainingProblem, VerifyOptions};
use pmcycle::model::{greedy_threshold, greedy_threshold_printed_variant, validate_scenario, Point, RawScenario, Scenario, TargetSpec};
use pmcycle::nlp::SolverOptions;
use pmcycle::sim::{displacement_endpoint, homotopy_blend, integrate_relaxed, recover_true_uncertainty, ControlPiece, Phase, UncertaintyTrace};
use pmcycle::model::AgentState;

/// Criteria reported as failing; see the project notes.
const KNOWN_FAILURES: &[u32] = &[6, 7];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn example_target(id: u32, x: f64, y: f64) -> TargetSpec {
    TargetSpec::new(id, Point::new(x, y), 1.0, 20.0, 3.0).unwrap()
}

fn triangle() -> Scenario {
    let h = 20.0 * 3f64.sqrt() / 2.0;
    validate_scenario(RawScenario {
        targets: vec![example_target(1, 0.0, 0.0), example_target(2, 20.0, 0.0), example_target(3, 10.0, h)],
        sequence: vec![1, 2, 3],
        initial_uncertainty: vec![0.0; 3],
    })
    .unwrap()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + inner + f(b)) * h / 3.0
}

fn criterion_1() -> Outcome {
    let t = example_target(1, 0.0, 0.0);
    let expected = 7.36643;
    let mut worst_time = 0.0_f64;
    let mut parts = Vec::new();
    let mut ok = true;
    for (nodes, tol) in [(20, 7e-3), (200, 7e-4)] {
        let p = DrainingProblem::new(t.clone(), Point::new(3.0, 0.0), Point::new(-3.0, 0.0), 100.0, nodes).unwrap();
        let start = Instant::now();
        let sol = solve_draining(&p, None, &DrainingOptions::default());
        let secs = start.elapsed().as_secs_f64();
        worst_time = worst_time.max(secs);
        match sol {
            Ok(s) => {
                let rel = (s.total_time - expected).abs() / expected;
                ok &= rel <= tol;
                parts.push(format!("N={nodes} T*={:.6} rel {:.2e} ({:.0} ms)", s.total_time, rel, secs * 1e3));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("N={nodes} failed: {e}"));
            }
        }
    }
    ok &= worst_time < 0.5;
    outcome(ok, parts.join(", "))
}

fn criterion_2() -> Outcome {
    let t = example_target(1, 0.0, 0.0);
    let (a, b, r) = (1.0_f64, 20.0_f64, 3.0_f64);
    let delta = r * ((b - a) / b).sqrt();
    let rate = |d: f64| a - b * (1.0 - d * d / (r * r));
    // radial in from r to the center, then out to delta
    let oracle = -(simpson(rate, 0.0, r, 20_000) + simpson(rate, 0.0, delta, 20_000));
    let threshold = greedy_threshold(&t);
    // simulated: relaxed uncertainty along the same path starting from zero
    let path = [
        ControlPiece::new(r, Point::new(-1.0, 0.0), Phase::Draining(0)),
        ControlPiece::new(delta, Point::new(-1.0, 0.0), Phase::Draining(0)),
    ];
    let sc = validate_scenario(RawScenario { targets: vec![t.clone()], sequence: vec![1], initial_uncertainty: vec![0.0] }).unwrap();
    let samples = integrate_relaxed(&sc, AgentState::new(Point::new(r, 0.0), 0.0), &[0.0], &path, 1e-5).unwrap();
    let simulated = -samples.last().unwrap().r[0];
    let printed = greedy_threshold_printed_variant(&t);
    let a_ok = (threshold - 74.0378).abs() <= 1e-3 && (threshold - oracle).abs() <= 1e-3 && (printed - simulated).abs() > 10.0;

    let eps_oracle = simpson(rate, delta, r, 20_000);
    let eps = epsilon_annulus(&t, 0.3, 0.3);
    let eps_printed = epsilon_annulus_printed_variant(&t, 0.3, 0.3);
    let b_ok = (eps - 0.0378188).abs() <= 1e-6 && (eps - eps_oracle).abs() <= 1e-6 && eps_printed < 0.0;
    outcome(
        a_ok && b_ok,
        format!(
            "threshold {threshold:.6} (oracle {oracle:.6}, simulated {simulated:.4}, printed variant {printed:.3}); \
             radial eps {eps:.7} (quadrature {eps_oracle:.7}, printed variant {eps_printed:.5})"
        ),
    )
}

fn random_problem(rng: &mut ChaCha8Rng) -> DrainingProblem {
    let a = rng.random_range(0.5..2.0);
    let b = a * rng.random_range(5.0..30.0);
    let r = rng.random_range(1.5..5.0);
    let t = TargetSpec::new(1, Point::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)), a, b, r).unwrap();
    let phi = rng.random_range(-PI..PI);
    let psi = rng.random_range(-PI..PI);
    let arrival = rng.random_range(0.0..150.0);
    let delta = t.inner_radius();
    let radius = if rng.random_bool(0.5) { delta } else { rng.random_range(delta..r) };
    let departure = t.position + radius * Point::new(psi.cos(), psi.sin());
    DrainingProblem::new(t.clone(), t.point_on_sensing_circle(phi), departure, arrival, 20).unwrap()
}

fn criteria_3_and_4() -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut exact_fail, mut verify_fail, mut solve_fail) = (Vec::new(), Vec::new(), Vec::new());
    let (mut worst_min, mut worst_miss, mut worst_trace) = (0.0_f64, 0.0_f64, 0.0_f64);
    let dt = 1e-3;
    for i in 0..50 {
        let p = random_problem(&mut rng);
        let scale = p.arrival_uncertainty.max(1.0);
        let r = p.target.sensing_radius;
        let sol = match solve_draining(&p, None, &DrainingOptions::default()) {
            Ok(s) => s,
            Err(e) => {
                solve_fail.push(format!("#{i}: {e}"));
                continue;
            }
        };
        let replay = replay_solution(&sol, &p, dt);
        let min_r = replay.iter().map(|s| s.r[0]).fold(f64::INFINITY, f64::min);
        let miss = (replay.last().unwrap().s - p.departure).norm();
        let relaxed = UncertaintyTrace::from_samples(&relaxed_replay(&sol, &p, dt), 0);
        let recovered = recover_true_uncertainty(&relaxed, sol.inner_exit_time).unwrap();
        let trace_err = recovered
            .trace
            .values
            .iter()
            .zip(&replay)
            .map(|(v, s)| (v - s.r[0]).abs())
            .fold(0.0, f64::max);
        worst_min = worst_min.max(min_r / scale);
        worst_miss = worst_miss.max(miss / r);
        worst_trace = worst_trace.max(trace_err / scale);
        if !(min_r <= 1e-4 * scale && miss <= 1e-3 * r && trace_err <= 5e-3 * scale) {
            exact_fail.push(i);
        }
        let report = verify_solution(&sol, &p, &VerifyOptions::for_problem(&p));
        if !report.passed() {
            verify_fail.push(format!("#{i}: {:?}", report.failures().iter().map(|c| &c.name).collect::<Vec<_>>()));
        }
    }
    let c3 = outcome(
        exact_fail.is_empty() && solve_fail.is_empty(),
        format!(
            "50 problems, {} unsolved, {} failing; worst min R/scale {worst_min:.2e}, endpoint miss/r {worst_miss:.2e}, trace error/scale {worst_trace:.2e} {:?}",
            solve_fail.len(),
            exact_fail.len(),
            solve_fail
        ),
    );
    let c4 = outcome(
        verify_fail.is_empty() && solve_fail.is_empty(),
        format!("{} of {} converged solutions fail verification {:?}", verify_fail.len(), 50 - solve_fail.len(), verify_fail),
    );
    (c3, c4)
}

fn tight() -> BilevelOptions {
    BilevelOptions {
        draining: DrainingOptions {
            solver: SolverOptions {
                kkt_tolerance: 1e-10,
                feasibility_tolerance: 1e-12,
                ..Default::default()
            },
        },
        ..Default::default()
    }
}

/// Largest component error relative to the largest finite-difference component.
fn gradient_error(sc: &Scenario, angles: &BoundaryAngles, r_start: &[f64]) -> Result<(f64, f64), String> {
    let o = tight();
    let run = run_cycle(sc, angles, r_start, None, &o, 0).map_err(|e| e.to_string())?;
    let g = cycle_gradient(sc, &run.record, false).map_err(|e| e.to_string())?;
    let fd = fd_cycle_gradient(sc, &run.record, &run.solutions, false, 1e-4, &o).map_err(|e| e.to_string())?;
    let scale = fd.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let err = g.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((err / scale, scale))
}

fn criterion_5() -> Outcome {
    let sc = triangle();
    let init = initialize_angles(&sc).unwrap();
    let converged = run_bilevel(&sc, &BilevelOptions::default(), None).unwrap();
    let steady: Vec<f64> = converged.last.start_uncertainty.clone();
    let at_init = gradient_error(&sc, &init, &steady);
    let at_conv = gradient_error(&sc, &converged.angles, &steady);
    match (at_init, at_conv) {
        (Ok((e0, s0)), Ok((e1, s1))) => outcome(
            e0 <= 1e-2 && e1 <= 1e-2,
            format!("relative error {e0:.2e} at initialization (|fd| {s0:.3}), {e1:.2e} at convergence (|fd| {s1:.2e})"),
        ),
        (a, b) => outcome(false, format!("gradient evaluation failed: {a:?} {b:?}")),
    }
}

fn criterion_6() -> Outcome {
    let sc = triangle();
    let start = Instant::now();
    let res = run_bilevel(&sc, &BilevelOptions::default(), None).unwrap();
    let greedy = run_greedy_baseline(&sc, &BaselineOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let last = res.record();
    let ratio = res.period() / greedy.period;
    let within = res.converged && res.cycles() <= 50 && last.grad_norm <= 1e-3 && last.uncertainty_residual <= 1e-4;
    let first_converged = res
        .history
        .iter()
        .position(|c| c.grad_norm <= 1e-3 && c.uncertainty_residual <= 1e-4)
        .map_or(0, |i| i + 1);
    outcome(
        within && ratio <= 0.95 && secs < 300.0,
        format!(
            "converged {} after {} cycles (limit 50), |g| {:.1e}, residual {:.1e}; period {:.4} vs greedy {:.4} (ratio {:.3}, limit 0.95); {:.2} s",
            res.converged,
            first_converged.max(res.cycles()),
            last.grad_norm,
            last.uncertainty_residual,
            res.period(),
            greedy.period,
            ratio,
            secs
        ),
    )
}

fn criterion_7() -> Outcome {
    let sc = triangle();
    let start = Instant::now();
    let runs = run_multistart(&sc, &BilevelOptions::default(), 100, 7);
    let secs = start.elapsed().as_secs_f64();
    let mut finals = Vec::new();
    let mut failures = 0;
    let mut unconverged = 0;
    for (_, r) in &runs {
        match r {
            Ok(run) => {
                if !run.converged {
                    unconverged += 1;
                }
                finals.push(run.final_period());
            }
            Err(_) => failures += 1,
        }
    }
    finals.sort_by(f64::total_cmp);
    let median = finals[finals.len() / 2];
    let worst = finals.iter().map(|p| (p - median).abs() / median).fold(0.0, f64::max);
    let within = finals.iter().filter(|p| (*p - median).abs() <= 5e-3 * median).count();
    outcome(
        failures == 0 && finals.len() == 100 && worst <= 5e-3 && secs < 1800.0,
        format!(
            "100 starts: {failures} errors, {unconverged} hit max cycles, {within} within 0.5% of median {median:.4}; range [{:.4}, {:.4}], worst deviation {:.3}%; {:.1} s",
            finals[0],
            finals[finals.len() - 1],
            100.0 * worst,
            secs
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut parts = Vec::new();

    let mut eps_min = f64::INFINITY;
    for _ in 0..1000 {
        let a = rng.random_range(0.1..5.0);
        let t = TargetSpec::new(1, Point::zeros(), a, a * rng.random_range(1.05..40.0), rng.random_range(0.2..10.0)).unwrap();
        eps_min = eps_min.min(epsilon_annulus(&t, rng.random_range(-PI..PI), rng.random_range(-PI..PI)));
    }
    let eps_ok = eps_min >= -1e-12;
    parts.push(format!("eps min {eps_min:.2e} over 1000"));

    let mut homotopy_bad = 0;
    for _ in 0..200 {
        let make = |rng: &mut ChaCha8Rng| -> Vec<ControlPiece> {
            (0..rng.random_range(1..8))
                .map(|_| {
                    let ang: f64 = rng.random_range(0.0..2.0 * PI);
                    ControlPiece::new(rng.random_range(0.01..2.0), rng.random_range(0.0..1.0) * Point::new(ang.cos(), ang.sin()), Phase::Draining(0))
                })
                .collect()
        };
        let u1 = make(&mut rng);
        let mut u2 = make(&mut rng);
        let gap = displacement_endpoint(Point::zeros(), &u1) - displacement_endpoint(Point::zeros(), &u2);
        let d = gap.norm() * (1.0 + rng.random_range(0.0..1.0)) + 1e-3;
        u2.push(ControlPiece::new(d, gap / d, Phase::Draining(0)));
        let end = displacement_endpoint(Point::zeros(), &u1);
        for sigma in [0.25, 0.5, 0.75] {
            let blend = homotopy_blend(&u1, &u2, sigma, 64);
            let feasible = blend.iter().all(|p| p.control.norm() <= 1.0 + 1e-9);
            let miss = (displacement_endpoint(Point::zeros(), &blend) - end).norm();
            if !feasible || miss > 1e-6 {
                homotopy_bad += 1;
            }
        }
    }
    parts.push(format!("{homotopy_bad} infeasible blends of 600"));

    let t = example_target(1, 0.0, 0.0);
    let mut monotone = true;
    for (phi, psi) in [(0.0, PI), (0.4, 2.0), (-1.0, 0.2)] {
        let mut last = 0.0;
        for step in 0..=15 {
            let p = DrainingProblem::from_angles(t.clone(), phi, psi, 10.0 * step as f64, 20).unwrap();
            match solve_draining(&p, None, &DrainingOptions::default()) {
                Ok(s) => {
                    monotone &= s.total_time >= last - 1e-6 * s.total_time;
                    last = s.total_time;
                }
                Err(_) => monotone = false,
            }
        }
    }
    parts.push(format!("T* monotone {monotone}"));

    let sc = triangle();
    let o = BilevelOptions { max_cycles: 10, ..Default::default() };
    let deterministic = multistart_initial_angles(3, 5, 3) == multistart_initial_angles(3, 5, 3)
        && run_multistart(&sc, &o, 2, 3) == run_multistart(&sc, &o, 2, 3);
    parts.push(format!("seeded runs identical {deterministic}"));

    outcome(eps_ok && homotopy_bad == 0 && monotone && deterministic, parts.join(", "))
}

fn main() -> ExitCode {
    let (c3, c4) = criteria_3_and_4();
    let results = [
        (1, criterion_1()),
        (2, criterion_2()),
        (3, c3),
        (4, c4),
        (5, criterion_5()),
        (6, criterion_6()),
        (7, criterion_7()),
        (8, criterion_8()),
    ];
    let mut unexpected = false;
    for (n, o) in &results {
        println!("criterion {n}: {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        let known = KNOWN_FAILURES.contains(n);
        if o.passed == known {
            unexpected = true;
            if known {
                println!("criterion {n}: listed as a known failure but passed");
            }
        }
    }
    if unexpected {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
