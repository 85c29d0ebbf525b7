//! Outer loop over the entrance and departure angles of every visit.
//!
//! Each cycle solves the draining problem of every visit in sequence order,
//! replays the controls through the clamped dynamics to get the next arrival
//! uncertainty, and then takes one gradient step on the angles. Gradients
//! come from the draining duals plus the analytic switching-leg derivatives.

mod annulus;

use std::cell::RefCell;
use std::f64::consts::{PI, TAU};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::draining::{solve_draining, DrainingError, DrainingOptions, DrainingProblem, DrainingSolution, ExitMode};
use crate::model::{AgentState, Point, Scenario};
use crate::nlp::fd_sensitivity;
use crate::sim::{simulate_cycle, straight_leg, CyclePlan, CycleSimulation, HybridState, Phase, PhasePlan, SimError};

pub use annulus::{annulus_exit, epsilon_annulus, epsilon_annulus_printed_variant, epsilon_partials, AnnulusExit};

#[derive(Debug, Error)]
pub enum CoordinatorError {
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("angles must be finite with {expected} entrance and departure angles, got {phi} and {psi}")]
    InvalidAngles { expected: usize, phi: usize, psi: usize },
    #[error("need at least two visits, scenario has {0}")]
    TooFewVisits(usize),
    #[error("visit {visit}: {source}")]
    Draining {
        visit: usize,
        #[source]
        source: Box<DrainingError>,
    },
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("target of visit {0} was not drained")]
    NotDrained(usize),
    #[error("cycle record does not match the scenario ({0})")]
    RecordMismatch(String),
}

/// Smallest absolute difference between two angles, modulo 2π.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    ((a - b + PI).rem_euclid(TAU) - PI).abs()
}

fn tangent(angle: f64) -> Point {
    Point::new(-angle.sin(), angle.cos())
}

/// Entrance angles `phi` (sensing circle) and departure angles `psi` (inner
/// circle), one pair per visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAngles {
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl BoundaryAngles {
    pub fn new(phi: Vec<f64>, psi: Vec<f64>) -> Result<Self, CoordinatorError> {
        if phi.len() != psi.len() || phi.iter().chain(&psi).any(|v| !v.is_finite()) {
            return Err(CoordinatorError::InvalidAngles {
                expected: phi.len(),
                phi: phi.len(),
                psi: psi.len(),
            });
        }
        Ok(BoundaryAngles { phi, psi })
    }

    /// Uniform angles in `[0, 2π)`.
    pub fn random<R: Rng>(visits: usize, rng: &mut R) -> Self {
        let phi = (0..visits).map(|_| rng.random_range(0.0..TAU)).collect();
        let psi = (0..visits).map(|_| rng.random_range(0.0..TAU)).collect();
        BoundaryAngles { phi, psi }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// `[phi_1..phi_K, psi_1..psi_K]`.
    pub fn to_vector(&self) -> Vec<f64> {
        self.phi.iter().chain(&self.psi).copied().collect()
    }

    pub fn from_vector(v: &[f64]) -> Self {
        let k = v.len() / 2;
        BoundaryAngles {
            phi: v[..k].to_vec(),
            psi: v[k..2 * k].to_vec(),
        }
    }

    /// Largest per-angle difference modulo 2π.
    pub fn max_difference(&self, other: &BoundaryAngles) -> f64 {
        self.to_vector()
            .iter()
            .zip(other.to_vector())
            .map(|(a, b)| angle_difference(*a, b))
            .fold(0.0, f64::max)
    }

    pub fn entrance(&self, scenario: &Scenario, k: usize) -> Point {
        scenario.visit_target(k).point_on_sensing_circle(self.phi[k])
    }

    pub fn departure(&self, scenario: &Scenario, k: usize) -> Point {
        scenario.visit_target(k).point_on_inner_circle(self.psi[k])
    }

    fn check(&self, scenario: &Scenario) -> Result<(), CoordinatorError> {
        let k = scenario.num_visits();
        if self.phi.len() != k || self.psi.len() != k || self.phi.iter().chain(&self.psi).any(|v| !v.is_finite()) {
            return Err(CoordinatorError::InvalidAngles {
                expected: k,
                phi: self.phi.len(),
                psi: self.psi.len(),
            });
        }
        Ok(())
    }
}

/// Points every departure at the next target's center and every entrance at
/// the previous one's.
pub fn initialize_angles(scenario: &Scenario) -> Result<BoundaryAngles, CoordinatorError> {
    let k = scenario.num_visits();
    if k < 2 {
        return Err(CoordinatorError::TooFewVisits(k));
    }
    let mut phi = vec![0.0; k];
    let mut psi = vec![0.0; k];
    for j in 0..k {
        let next = (j + 1) % k;
        let v = scenario.visit_target(next).position - scenario.visit_target(j).position;
        psi[j] = v.y.atan2(v.x);
        phi[next] = (0.0 - v.y).atan2(0.0 - v.x);
    }
    Ok(BoundaryAngles { phi, psi })
}

/// Straight switching leg and the derivatives of its length in the angles
/// of both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchSegment {
    pub duration: f64,
    pub d_from: f64,
    pub d_to: f64,
    /// Endpoints coincide; the derivatives are the zero subgradient.
    pub degenerate: bool,
}

/// `from_tangent` and `to_tangent` are the derivatives of the endpoints in
/// their own angles.
pub fn switch_segment(from: Point, from_tangent: Point, to: Point, to_tangent: Point) -> SwitchSegment {
    let d = to - from;
    let len = d.norm();
    if len <= 0.0 {
        return SwitchSegment {
            duration: 0.0,
            d_from: 0.0,
            d_to: 0.0,
            degenerate: true,
        };
    }
    let e = d / len;
    SwitchSegment {
        duration: len,
        d_from: -e.dot(&from_tangent),
        d_to: e.dot(&to_tangent),
        degenerate: false,
    }
}

/// Leg `k`, from the departure of visit `k` to the entrance of visit `k + 1`.
fn leg(scenario: &Scenario, angles: &BoundaryAngles, k: usize) -> SwitchSegment {
    let next = (k + 1) % angles.len();
    let from = scenario.visit_target(k);
    let to = scenario.visit_target(next);
    switch_segment(
        angles.departure(scenario, k),
        from.inner_radius() * tangent(angles.psi[k]),
        angles.entrance(scenario, next),
        to.sensing_radius * tangent(angles.phi[next]),
    )
}

fn leg_exit(scenario: &Scenario, angles: &BoundaryAngles, k: usize) -> Option<AnnulusExit> {
    let next = (k + 1) % angles.len();
    let to = scenario.visit_target(next);
    annulus_exit(
        scenario.visit_target(k),
        angles.psi[k],
        angles.entrance(scenario, next),
        to.sensing_radius * tangent(angles.phi[next]),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilevelOptions {
    /// Initial step size.
    pub alpha0: f64,
    /// Step decay `c` in `alpha0 / (1 + c n)`.
    pub decay: f64,
    pub tol_grad: f64,
    pub tol_uncertainty: f64,
    pub max_cycles: usize,
    /// Add the arrival-uncertainty sensitivities to the gradient.
    pub include_uncertainty_coupling: bool,
    pub nodes: usize,
    pub dt: f64,
    pub draining: DrainingOptions,
}

impl Default for BilevelOptions {
    fn default() -> Self {
        BilevelOptions {
            alpha0: 0.1,
            decay: 0.1,
            tol_grad: 1e-3,
            tol_uncertainty: 1e-4,
            max_cycles: 200,
            include_uncertainty_coupling: false,
            nodes: 20,
            dt: 1e-3,
            draining: DrainingOptions::default(),
        }
    }
}

impl BilevelOptions {
    pub fn validate(&self) -> Result<(), CoordinatorError> {
        let bad = |m: &str| Err(CoordinatorError::InvalidOptions(m.to_string()));
        if !(self.alpha0 > 0.0) || !self.alpha0.is_finite() {
            return bad("alpha0 must be positive");
        }
        if !(self.decay >= 0.0) || !self.decay.is_finite() {
            return bad("decay must be nonnegative");
        }
        if !(self.tol_grad > 0.0) || !(self.tol_uncertainty > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.nodes < 2 {
            return bad("need at least two nodes");
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        Ok(())
    }

    /// `alpha0 / (1 + decay * n)`.
    pub fn step_size(&self, cycle: usize) -> f64 {
        self.alpha0 / (1.0 + self.decay * cycle as f64)
    }
}

/// One visit of a completed cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub target_id: u32,
    pub arrival_uncertainty: f64,
    /// True uncertainty when the draining phase ends.
    pub departure_uncertainty: f64,
    pub drain_time: f64,
    pub inner_exit_time: f64,
    pub switch_time: f64,
    pub lambda_phi: Point,
    pub lambda_psi: Point,
    pub lambda_r: f64,
    pub mode: ExitMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub angles: BoundaryAngles,
    pub visits: Vec<VisitRecord>,
    pub period: f64,
    /// `[dT/dphi_1..K, dT/dpsi_1..K]`.
    pub gradient: Vec<f64>,
    pub grad_norm: f64,
    /// Largest change in arrival uncertainty against the previous cycle.
    pub uncertainty_residual: f64,
    /// Wall-clock seconds per draining solve. Not reproducible.
    #[serde(skip)]
    pub cpu_seconds: Vec<f64>,
}

/// A simulated cycle with the solutions that produced it.
#[derive(Debug, Clone)]
pub struct CycleRun {
    pub record: CycleRecord,
    pub solutions: Vec<DrainingSolution>,
    pub plan: CyclePlan,
    pub start_uncertainty: Vec<f64>,
    pub end_uncertainty: Vec<f64>,
}

impl CycleRun {
    /// Re-simulates the cycle with recorded samples.
    pub fn simulate(&self, scenario: &Scenario, dt: f64) -> Result<CycleSimulation, SimError> {
        simulate_cycle(scenario, &self.plan, &self.start_uncertainty, dt)
    }
}

fn draining_error(visit: usize, e: DrainingError) -> CoordinatorError {
    CoordinatorError::Draining {
        visit,
        source: Box::new(e),
    }
}

/// Runs one cycle with fixed angles, starting at the first entrance point
/// with uncertainties `r_start`. Gradient and residual are left empty.
pub fn run_cycle(
    scenario: &Scenario,
    angles: &BoundaryAngles,
    r_start: &[f64],
    warm: Option<&[DrainingSolution]>,
    options: &BilevelOptions,
    cycle: usize,
) -> Result<CycleRun, CoordinatorError> {
    angles.check(scenario)?;
    let k_total = scenario.num_visits();
    let start = angles.entrance(scenario, 0);
    let mut state = HybridState::new(scenario, AgentState::new(start, 0.0), r_start)?;
    let mut visits = Vec::with_capacity(k_total);
    let mut solutions = Vec::with_capacity(k_total);
    let mut phases = Vec::with_capacity(2 * k_total);
    let mut cpu_seconds = Vec::with_capacity(k_total);
    let mut period = 0.0;
    for k in 0..k_total {
        let i = scenario.sequence()[k];
        let target = scenario.target(i);
        let arrival = state.uncertainty[i];
        let problem = DrainingProblem::from_angles(target.clone(), angles.phi[k], angles.psi[k], arrival, options.nodes)
            .map_err(|e| draining_error(k, e))?;
        let clock = Instant::now();
        let solution = solve_draining(&problem, warm.and_then(|w| w.get(k)), &options.draining).map_err(|e| draining_error(k, e))?;
        cpu_seconds.push(clock.elapsed().as_secs_f64());
        let departure = angles.departure(scenario, k);
        let drain = solution.control_schedule(departure, Phase::Draining(k));
        state.advance(scenario, &drain, options.dt)?;
        let departure_uncertainty = state.uncertainty[i];
        let next = angles.entrance(scenario, (k + 1) % k_total);
        let switch: Vec<_> = straight_leg(departure, next, Phase::Switching(k)).into_iter().collect();
        state.advance(scenario, &switch, options.dt)?;
        let switch_time = (next - departure).norm();
        period += solution.total_time + switch_time;
        visits.push(VisitRecord {
            target_id: target.id,
            arrival_uncertainty: arrival,
            departure_uncertainty,
            drain_time: solution.total_time,
            inner_exit_time: solution.inner_exit_time,
            switch_time,
            lambda_phi: solution.lambda_phi,
            lambda_psi: solution.lambda_psi,
            lambda_r: solution.lambda_r,
            mode: solution.mode,
        });
        phases.push(PhasePlan {
            phase: Phase::Draining(k),
            pieces: drain,
        });
        phases.push(PhasePlan {
            phase: Phase::Switching(k),
            pieces: switch,
        });
        solutions.push(solution);
    }
    Ok(CycleRun {
        record: CycleRecord {
            cycle,
            angles: angles.clone(),
            visits,
            period,
            gradient: Vec::new(),
            grad_norm: f64::NAN,
            uncertainty_residual: f64::NAN,
            cpu_seconds,
        },
        solutions,
        plan: CyclePlan { start, phases },
        start_uncertainty: r_start.to_vec(),
        end_uncertainty: state.uncertainty,
    })
}

/// Previous visit of the same target (cyclically, possibly `k` itself) and
/// the visits strictly between it and `k`.
fn previous_visit(scenario: &Scenario, k: usize) -> (usize, Vec<usize>) {
    let k_total = scenario.num_visits();
    let i = scenario.sequence()[k];
    let mut p = (k + k_total - 1) % k_total;
    while scenario.sequence()[p] != i {
        p = (p + k_total - 1) % k_total;
    }
    let mut between = Vec::new();
    let mut j = (p + 1) % k_total;
    while j != k {
        between.push(j);
        j = (j + 1) % k_total;
    }
    (p, between)
}

fn check_record(scenario: &Scenario, record: &CycleRecord) -> Result<(), CoordinatorError> {
    record.angles.check(scenario)?;
    if record.visits.len() != scenario.num_visits() {
        return Err(CoordinatorError::RecordMismatch(format!(
            "{} visits recorded, sequence has {}",
            record.visits.len(),
            scenario.num_visits()
        )));
    }
    Ok(())
}

/// Arrival uncertainty of visit `k` in a periodic repetition of `record`:
/// what builds up on the annulus after the previous drain of the same target
/// plus growth at rate `A` until the next entrance.
///
/// Assumes switching legs do not cross other visits' target disks.
pub fn predicted_arrival_uncertainty(scenario: &Scenario, record: &CycleRecord, k: usize) -> Result<f64, CoordinatorError> {
    check_record(scenario, record)?;
    let (p, between) = previous_visit(scenario, k);
    let v = &record.visits[p];
    if v.departure_uncertainty > 1e-6 * v.arrival_uncertainty.max(1.0) {
        return Err(CoordinatorError::NotDrained(p));
    }
    let exit = leg_exit(scenario, &record.angles, p).ok_or_else(|| CoordinatorError::RecordMismatch(format!("leg {p} has zero length")))?;
    let outside = (v.switch_time - exit.length).max(0.0)
        + between.iter().map(|&j| record.visits[j].drain_time + record.visits[j].switch_time).sum::<f64>();
    Ok(exit.epsilon + scenario.visit_target(k).growth_rate * outside)
}

/// Gradient of the period in `[phi, psi]`, from the draining duals and the
/// switching-leg derivatives with the arrival uncertainties held fixed.
/// With `coupling`, adds the `lambda_R`-weighted sensitivities of the
/// steady-state arrival uncertainties.
pub fn cycle_gradient(scenario: &Scenario, record: &CycleRecord, coupling: bool) -> Result<Vec<f64>, CoordinatorError> {
    check_record(scenario, record)?;
    let k_total = scenario.num_visits();
    let angles = &record.angles;
    let legs: Vec<SwitchSegment> = (0..k_total).map(|k| leg(scenario, angles, k)).collect();
    // dT*_k with fixed arrival, as rows over all 2K angles
    let drain_rows: Vec<DVector<f64>> = (0..k_total)
        .map(|k| {
            let t = scenario.visit_target(k);
            let v = &record.visits[k];
            let mut row = DVector::zeros(2 * k_total);
            row[k] = v.lambda_phi.dot(&(t.sensing_radius * tangent(angles.phi[k])));
            row[k_total + k] = v.lambda_psi.dot(&(t.inner_radius() * tangent(angles.psi[k])));
            row
        })
        .collect();
    let leg_rows: Vec<DVector<f64>> = (0..k_total)
        .map(|k| {
            let mut row = DVector::zeros(2 * k_total);
            row[k_total + k] += legs[k].d_from;
            row[(k + 1) % k_total] += legs[k].d_to;
            row
        })
        .collect();
    let mut grad = DVector::zeros(2 * k_total);
    for k in 0..k_total {
        grad += &drain_rows[k] + &leg_rows[k];
    }
    if coupling {
        let mut c = DMatrix::<f64>::identity(k_total, k_total);
        let mut d = DMatrix::<f64>::zeros(k_total, 2 * k_total);
        for k in 0..k_total {
            let a = scenario.visit_target(k).growth_rate;
            let (p, between) = previous_visit(scenario, k);
            let exit = leg_exit(scenario, angles, p).ok_or_else(|| CoordinatorError::RecordMismatch(format!("leg {p} has zero length")))?;
            let mut row = leg_rows[p].clone() * a;
            let next = (p + 1) % k_total;
            row[k_total + p] += exit.d_epsilon.0 - a * exit.d_length.0;
            row[next] += exit.d_epsilon.1 - a * exit.d_length.1;
            for &j in &between {
                row += (&drain_rows[j] + &leg_rows[j]) * a;
                c[(k, j)] -= a * record.visits[j].lambda_r;
            }
            d.set_row(k, &row.transpose());
        }
        let sens = c
            .lu()
            .solve(&d)
            .ok_or_else(|| CoordinatorError::RecordMismatch("singular arrival coupling".into()))?;
        for k in 0..k_total {
            grad += sens.row(k).transpose() * record.visits[k].lambda_r;
        }
    }
    Ok(grad.iter().copied().collect())
}

/// Gradient step with the diminishing rule.
pub fn update_angles(angles: &BoundaryAngles, gradient: &[f64], cycle: usize, options: &BilevelOptions) -> BoundaryAngles {
    let alpha = options.step_size(cycle);
    let v: Vec<f64> = angles.to_vector().iter().zip(gradient).map(|(a, g)| a - alpha * g).collect();
    BoundaryAngles::from_vector(&v)
}

fn solve_visits(
    scenario: &Scenario,
    angles: &BoundaryAngles,
    arrivals: &[f64],
    warm: &[DrainingSolution],
    options: &BilevelOptions,
) -> Result<Vec<DrainingSolution>, CoordinatorError> {
    (0..scenario.num_visits())
        .map(|k| {
            let problem = DrainingProblem::from_angles(
                scenario.visit_target(k).clone(),
                angles.phi[k],
                angles.psi[k],
                arrivals[k].max(0.0),
                options.nodes,
            )
            .map_err(|e| draining_error(k, e))?;
            solve_draining(&problem, warm.get(k), &options.draining).map_err(|e| draining_error(k, e))
        })
        .collect()
}

fn period_of(scenario: &Scenario, angles: &BoundaryAngles, solutions: &[DrainingSolution]) -> f64 {
    (0..solutions.len())
        .map(|k| solutions[k].total_time + leg(scenario, angles, k).duration)
        .sum()
}

/// Period with every arrival uncertainty held at `arrivals`.
pub fn frozen_cycle_time(
    scenario: &Scenario,
    angles: &BoundaryAngles,
    arrivals: &[f64],
    warm: &[DrainingSolution],
    options: &BilevelOptions,
) -> Result<f64, CoordinatorError> {
    angles.check(scenario)?;
    let solutions = solve_visits(scenario, angles, arrivals, warm, options)?;
    Ok(period_of(scenario, angles, &solutions))
}

/// Period of the periodic cycle at fixed angles, with arrival uncertainties
/// at the fixed point of [`predicted_arrival_uncertainty`]. Returns the
/// period and the arrivals.
pub fn steady_cycle_time(
    scenario: &Scenario,
    angles: &BoundaryAngles,
    arrivals: &[f64],
    warm: &[DrainingSolution],
    options: &BilevelOptions,
) -> Result<(f64, Vec<f64>), CoordinatorError> {
    angles.check(scenario)?;
    let k_total = scenario.num_visits();
    let mut arrivals = arrivals.to_vec();
    let mut solutions = solve_visits(scenario, angles, &arrivals, warm, options)?;
    for _ in 0..200 {
        let record = CycleRecord {
            cycle: 0,
            angles: angles.clone(),
            visits: (0..k_total)
                .map(|k| VisitRecord {
                    target_id: scenario.visit_target(k).id,
                    arrival_uncertainty: arrivals[k],
                    departure_uncertainty: 0.0,
                    drain_time: solutions[k].total_time,
                    inner_exit_time: solutions[k].inner_exit_time,
                    switch_time: leg(scenario, angles, k).duration,
                    lambda_phi: solutions[k].lambda_phi,
                    lambda_psi: solutions[k].lambda_psi,
                    lambda_r: solutions[k].lambda_r,
                    mode: solutions[k].mode,
                })
                .collect(),
            period: 0.0,
            gradient: Vec::new(),
            grad_norm: 0.0,
            uncertainty_residual: 0.0,
            cpu_seconds: Vec::new(),
        };
        let next: Vec<f64> = (0..k_total)
            .map(|k| predicted_arrival_uncertainty(scenario, &record, k))
            .collect::<Result<_, _>>()?;
        let change = next.iter().zip(&arrivals).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        arrivals = next;
        solutions = solve_visits(scenario, angles, &arrivals, &solutions, options)?;
        if change <= 1e-12 * arrivals.iter().fold(1.0_f64, |m, v| m.max(v.abs())) {
            break;
        }
    }
    Ok((period_of(scenario, angles, &solutions), arrivals))
}

/// Central differences of the period in every angle. Without `coupling`
/// the arrivals of `record` are frozen; with it they follow the steady state.
pub fn fd_cycle_gradient(
    scenario: &Scenario,
    record: &CycleRecord,
    solutions: &[DrainingSolution],
    coupling: bool,
    eta: f64,
    options: &BilevelOptions,
) -> Result<Vec<f64>, CoordinatorError> {
    check_record(scenario, record)?;
    let base = record.angles.to_vector();
    let arrivals: Vec<f64> = record.visits.iter().map(|v| v.arrival_uncertainty).collect();
    let error = RefCell::new(None);
    let mut grad = Vec::with_capacity(base.len());
    for a in 0..base.len() {
        let eval = |p: f64| {
            let mut v = base.clone();
            v[a] = p;
            let angles = BoundaryAngles::from_vector(&v);
            let out = if coupling {
                steady_cycle_time(scenario, &angles, &arrivals, solutions, options).map(|x| x.0)
            } else {
                frozen_cycle_time(scenario, &angles, &arrivals, solutions, options)
            };
            out.map_err(|e| *error.borrow_mut() = Some(e)).ok()
        };
        match fd_sensitivity(eval, base[a], eta) {
            Some(g) => grad.push(g),
            None => {
                let e = error.borrow_mut().take();
                return Err(e.unwrap_or_else(|| CoordinatorError::RecordMismatch("difference failed".into())));
            }
        }
    }
    Ok(grad)
}

/// Outcome of [`run_bilevel`].
#[derive(Debug, Clone)]
pub struct BilevelResult {
    pub angles: BoundaryAngles,
    pub converged: bool,
    pub history: Vec<CycleRecord>,
    /// The last cycle, with its solutions and plan.
    pub last: CycleRun,
}

impl BilevelResult {
    pub fn record(&self) -> &CycleRecord {
        &self.last.record
    }

    pub fn period(&self) -> f64 {
        self.last.record.period
    }

    pub fn cycles(&self) -> usize {
        self.history.len()
    }
}

/// Alternates full cycles and angle steps until the gradient and the change
/// in arrival uncertainties are both within tolerance, or `max_cycles`.
/// Runs out of cycles are reported through `converged`, not as an error.
pub fn run_bilevel(
    scenario: &Scenario,
    options: &BilevelOptions,
    initial_angles: Option<BoundaryAngles>,
) -> Result<BilevelResult, CoordinatorError> {
    options.validate()?;
    let mut angles = match initial_angles {
        Some(a) => a,
        None => initialize_angles(scenario)?,
    };
    angles.check(scenario)?;
    let mut r_start = scenario.initial_uncertainty().to_vec();
    let mut previous: Vec<f64> = scenario.sequence().iter().map(|&i| r_start[i]).collect();
    let mut warm: Option<Vec<DrainingSolution>> = None;
    let mut history: Vec<CycleRecord> = Vec::new();
    let mut cycle = 0;
    loop {
        let mut run = run_cycle(scenario, &angles, &r_start, warm.as_deref(), options, cycle)?;
        let gradient = cycle_gradient(scenario, &run.record, options.include_uncertainty_coupling)?;
        let record = &mut run.record;
        record.grad_norm = gradient.iter().fold(0.0, |m: f64, g| m.max(g.abs()));
        record.gradient = gradient;
        record.uncertainty_residual = record
            .visits
            .iter()
            .zip(&previous)
            .map(|(v, p)| (v.arrival_uncertainty - p).abs())
            .fold(0.0, f64::max);
        log::debug!(
            "cycle {cycle}: T={:.9} |g|={:.3e} dR={:.3e}",
            record.period,
            record.grad_norm,
            record.uncertainty_residual
        );
        if let Some(last) = history.last() {
            if record.period > last.period + 1e-4 {
                log::debug!("cycle {cycle}: period increased by {:.3e}", record.period - last.period);
            }
        }
        history.push(record.clone());
        let converged = record.grad_norm <= options.tol_grad && record.uncertainty_residual <= options.tol_uncertainty;
        cycle += 1;
        if converged || cycle >= options.max_cycles {
            return Ok(BilevelResult {
                angles,
                converged,
                history,
                last: run,
            });
        }
        angles = update_angles(&angles, &record.gradient, cycle - 1, options);
        previous = record.visits.iter().map(|v| v.arrival_uncertainty).collect();
        r_start = run.end_uncertainty;
        warm = Some(run.solutions);
    }
}

/// `count` uniform initial angle vectors from `seed`.
pub fn multistart_initial_angles(visits: usize, count: usize, seed: u64) -> Vec<BoundaryAngles> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| BoundaryAngles::random(visits, &mut rng)).collect()
}

/// Summary of one multistart run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartRun {
    pub index: usize,
    pub initial: BoundaryAngles,
    pub converged: bool,
    pub final_angles: BoundaryAngles,
    /// Period of every cycle.
    pub periods: Vec<f64>,
}

impl MultistartRun {
    pub fn final_period(&self) -> f64 {
        self.periods.last().copied().unwrap_or(f64::NAN)
    }
}

/// Runs [`run_bilevel`] from random initial angles in parallel. Results are
/// in start order; failures carry their error message.
pub fn run_multistart(
    scenario: &Scenario,
    options: &BilevelOptions,
    count: usize,
    seed: u64,
) -> Vec<(usize, Result<MultistartRun, String>)> {
    let starts = multistart_initial_angles(scenario.num_visits(), count, seed);
    starts
        .into_par_iter()
        .enumerate()
        .map(|(index, initial)| {
            let outcome = run_bilevel(scenario, options, Some(initial.clone()))
                .map(|res| MultistartRun {
                    index,
                    initial,
                    converged: res.converged,
                    final_angles: res.angles.clone(),
                    periods: res.history.iter().map(|r| r.period).collect(),
                })
                .map_err(|e| e.to_string());
            (index, outcome)
        })
        .collect()
}

#[cfg(test)]
mod tests;
