//! Local draining problem: enter a target's sensing disk at a given point,
//! drive its uncertainty to zero, and leave toward a given departure point
//! in minimum time.

mod greedy;
pub mod transcription;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_scenario, AgentState, Point, RawScenario, Scenario, TargetSpec};
use crate::nlp::{solve_nlp, NlpError, NlpProblem, SolverOptions, SolverReport, SolverStatus, WarmMultipliers};
use crate::sim::{integrate_hybrid, integrate_relaxed, straight_leg, ControlPiece, Phase, TrajectorySample, UncertaintyTrace};

pub use greedy::{greedy_closed_form, GreedySolution};
pub use transcription::{DrainingNlp, ExitMode, MIN_EXIT_TIME};

/// Relative tolerance for "point lies on a circle" checks.
const ON_CIRCLE_TOLERANCE: f64 = 1e-8;

/// One visit's local problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrainingProblem {
    pub target: TargetSpec,
    /// Entrance point on the sensing circle.
    pub entrance: Point,
    /// Departure point inside or on the sensing circle.
    pub departure: Point,
    /// Uncertainty of the target on arrival.
    pub arrival_uncertainty: f64,
    /// Number of shooting intervals.
    pub nodes: usize,
}

impl DrainingProblem {
    pub fn new(
        target: TargetSpec,
        entrance: Point,
        departure: Point,
        arrival_uncertainty: f64,
        nodes: usize,
    ) -> Result<Self, DrainingError> {
        let p = DrainingProblem {
            target,
            entrance,
            departure,
            arrival_uncertainty,
            nodes,
        };
        p.validate()?;
        Ok(p)
    }

    /// Entrance at polar angle `phi` on the sensing circle and departure at
    /// polar angle `psi` on the inner circle.
    pub fn from_angles(target: TargetSpec, phi: f64, psi: f64, arrival_uncertainty: f64, nodes: usize) -> Result<Self, DrainingError> {
        let entrance = target.point_on_sensing_circle(phi);
        let departure = target.point_on_inner_circle(psi);
        Self::new(target, entrance, departure, arrival_uncertainty, nodes)
    }

    pub fn validate(&self) -> Result<(), DrainingError> {
        let r = self.target.sensing_radius;
        let scale = r.max(1.0);
        let de = (self.entrance - self.target.position).norm();
        if !((de - r).abs() <= 1e-9 * scale) {
            return Err(DrainingError::InvalidProblem(format!(
                "entrance point is at distance {de} from the target, expected {r}"
            )));
        }
        let dd = (self.departure - self.target.position).norm();
        if !(dd <= r + 1e-9 * scale) {
            return Err(DrainingError::InvalidProblem(format!(
                "departure point is at distance {dd}, outside the sensing radius {r}"
            )));
        }
        if !(self.arrival_uncertainty >= 0.0) || !self.arrival_uncertainty.is_finite() {
            return Err(DrainingError::InvalidProblem(format!(
                "arrival uncertainty {} must be finite and nonnegative",
                self.arrival_uncertainty
            )));
        }
        if self.nodes < 2 {
            return Err(DrainingError::InvalidProblem(format!("need at least 2 nodes, got {}", self.nodes)));
        }
        Ok(())
    }

    /// `Pinned` when the departure point lies on the inner circle.
    pub fn exit_mode(&self) -> ExitMode {
        let delta = self.target.inner_radius();
        let d = (self.departure - self.target.position).norm();
        if (d - delta).abs() <= ON_CIRCLE_TOLERANCE * self.target.sensing_radius.max(1.0) {
            ExitMode::Pinned
        } else {
            ExitMode::Free
        }
    }

    /// Scenario holding only this target, starting from the arrival uncertainty.
    pub fn single_target_scenario(&self) -> Scenario {
        validate_scenario(RawScenario {
            targets: vec![self.target.clone()],
            sequence: vec![self.target.id],
            initial_uncertainty: vec![self.arrival_uncertainty],
        })
        .expect("a single valid target forms a valid scenario")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DrainingError {
    #[error("invalid draining problem: {0}")]
    InvalidProblem(String),
    #[error("greedy closed form not applicable: {0}")]
    Precondition(String),
    #[error("draining solve did not converge: status {:?}, kkt residual {:.3e}, violation {:.3e}", .report.status, .report.kkt_residual, .report.constraint_violation)]
    NotConverged {
        report: SolverReport,
        iterate: Box<DrainingSolution>,
    },
    #[error("draining problem reported infeasible (violation {:.3e})", .report.constraint_violation)]
    Infeasible {
        report: SolverReport,
        iterate: Box<DrainingSolution>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrainingOptions {
    pub solver: SolverOptions,
}

impl Default for DrainingOptions {
    fn default() -> Self {
        DrainingOptions {
            solver: SolverOptions::default(),
        }
    }
}

/// Optimal draining trajectory and boundary sensitivities.
///
/// `lambda_phi`, `lambda_psi` and `lambda_r` are derivatives of `total_time`
/// with respect to the entrance point, the departure point and the arrival
/// uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrainingSolution {
    pub node_positions: Vec<Point>,
    /// Relaxed (unclamped) uncertainty at the nodes.
    pub node_uncertainty: Vec<f64>,
    pub node_controls: Vec<Point>,
    pub inner_exit_time: f64,
    pub inner_exit_point: Point,
    pub terminal_leg_time: f64,
    pub total_time: f64,
    pub lambda_phi: Point,
    pub lambda_psi: Point,
    pub lambda_r: f64,
    /// Multiplier of the inner-circle constraint (zero when pinned).
    pub lambda_circle: f64,
    pub mode: ExitMode,
    pub report: SolverReport,
    pub primal: Vec<f64>,
    pub multipliers: WarmMultipliers,
}

impl DrainingSolution {
    pub fn nodes(&self) -> usize {
        self.node_controls.len()
    }

    /// Shooting step `t0 / N`.
    pub fn step(&self) -> f64 {
        self.inner_exit_time / self.nodes() as f64
    }

    /// Node controls (held for one step each, integrated with that step)
    /// followed by the straight terminal leg.
    pub fn control_schedule(&self, departure: Point, phase: Phase) -> Vec<ControlPiece> {
        let h = self.step();
        let mut pieces: Vec<ControlPiece> = self
            .node_controls
            .iter()
            .map(|u| {
                let n = u.norm();
                let u = if n > 1.0 { u / n } else { *u };
                ControlPiece::new(h, u, phase).with_step(h)
            })
            .collect();
        let end = pieces.iter().fold(self.node_positions[0], |s, p| s + p.duration * p.control);
        if let Some(leg) = straight_leg(end, departure, phase) {
            pieces.push(leg);
        }
        pieces
    }

    /// Relaxed node uncertainties on their time grid.
    pub fn relaxed_node_trace(&self) -> UncertaintyTrace {
        let h = self.step();
        UncertaintyTrace {
            times: (0..self.node_uncertainty.len()).map(|j| j as f64 * h).collect(),
            values: self.node_uncertainty.clone(),
        }
    }

    fn from_nlp(problem: &DrainingProblem, nlp: &DrainingNlp, x: Vec<f64>, lambda: Vec<f64>, mu: Vec<f64>, report: SolverReport) -> Self {
        let n = nlp.nodes();
        let pt = |i: usize| Point::new(x[i], x[i + 1]);
        let node_positions: Vec<Point> = (0..=n).map(|j| pt(nlp.pos(j))).collect();
        let node_uncertainty: Vec<f64> = (0..=n).map(|j| x[nlp.unc(j)]).collect();
        let node_controls: Vec<Point> = (0..n).map(|j| pt(nlp.ctrl(j))).collect();
        let t0 = x[nlp.time()];
        let exit = pt(nlp.exit());
        let leg = (problem.departure - exit).norm();
        let rows = nlp.rows();
        let lambda_phi = -Point::new(lambda[rows.entrance], lambda[rows.entrance + 1]);
        let lambda_r = -lambda[rows.arrival];
        let (lambda_psi, lambda_circle) = match nlp.mode() {
            ExitMode::Free => {
                let d = problem.departure - exit;
                let g = if leg > 1e-14 { d / leg } else { Point::zeros() };
                (g, lambda[rows.exit])
            }
            ExitMode::Pinned => (-Point::new(lambda[rows.exit], lambda[rows.exit + 1]), 0.0),
        };
        DrainingSolution {
            node_positions,
            node_uncertainty,
            node_controls,
            inner_exit_time: t0,
            inner_exit_point: exit,
            terminal_leg_time: leg,
            total_time: t0 + leg,
            lambda_phi,
            lambda_psi,
            lambda_r,
            lambda_circle,
            mode: nlp.mode(),
            report,
            primal: x,
            multipliers: WarmMultipliers { lambda, mu },
        }
    }
}

/// Polyline entrance -> center -> inner-circle point traversed at unit
/// speed, with a dwell at the center long enough to drain the estimated
/// remainder. Nodes are equally spaced in time and the uncertainty is rolled
/// out by the same Euler scheme.
fn cold_start(problem: &DrainingProblem, nlp: &DrainingNlp) -> Vec<f64> {
    let n = problem.nodes;
    let t = &problem.target;
    let x_c = t.position;
    let delta = t.inner_radius();
    let goal = match nlp.mode() {
        ExitMode::Pinned => problem.departure,
        ExitMode::Free => {
            let d = problem.departure - x_c;
            let dir = if d.norm() > 1e-12 {
                d.normalize()
            } else {
                (x_c - problem.entrance).normalize()
            };
            x_c + delta * dir
        }
    };
    // turn at `mid` on the way to the center, dwelling there for `dwell`
    let path = |mid: Point, dwell: f64| {
        let l1 = (mid - problem.entrance).norm();
        let l2 = (goal - mid).norm();
        move |tau: f64| {
            if tau <= l1 {
                problem.entrance + (mid - problem.entrance) * (tau / l1.max(f64::MIN_POSITIVE))
            } else if tau <= l1 + dwell || l2 == 0.0 {
                mid
            } else {
                mid + (goal - mid) * ((tau - l1 - dwell) / l2).min(1.0)
            }
        }
    };
    let rate = |s: Point| t.growth_rate - t.sensing_gain + t.sensing_gain * (s - x_c).norm_squared() / t.sensing_radius.powi(2);
    let rollout = |mid: Point, dwell: f64| {
        let total = (mid - problem.entrance).norm() + dwell + (goal - mid).norm();
        let at = path(mid, dwell);
        let h = total / n as f64;
        let mut r = problem.arrival_uncertainty;
        let mut out = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let s = at(j as f64 * h);
            out.push((s, r));
            r += h * rate(s);
        }
        (out, h)
    };
    let (first_pass, _) = rollout(x_c, 0.0);
    let leftover = first_pass[n].1;
    let (states, h) = if leftover > 0.0 {
        rollout(x_c, leftover / (t.sensing_gain - t.growth_rate))
    } else {
        // shallowest turn point that still drains
        let mid = |lam: f64| problem.entrance + (x_c - problem.entrance) * lam;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let m = 0.5 * (lo + hi);
            if rollout(mid(m), 0.0).0[n].1 <= 0.0 {
                hi = m;
            } else {
                lo = m;
            }
        }
        rollout(mid(hi), 0.0)
    };
    let mut x = vec![0.0; nlp.dimension()];
    for (j, &(s, r)) in states.iter().enumerate() {
        x[nlp.pos(j)] = s.x;
        x[nlp.pos(j) + 1] = s.y;
        x[nlp.unc(j)] = r;
        if j < n {
            let u = (states[j + 1].0 - s) / h;
            x[nlp.ctrl(j)] = u.x;
            x[nlp.ctrl(j) + 1] = u.y;
        }
    }
    x[nlp.time()] = (n as f64 * h).max(MIN_EXIT_TIME);
    x[nlp.exit()] = states[n].0.x;
    x[nlp.exit() + 1] = states[n].0.y;
    x
}

/// Node count of the coarse solve used to seed fine grids.
const COARSE_NODES: usize = 20;

/// Linear interpolation of `values` sampled at `(k + offset) * step`, evaluated at `t`.
fn interpolate(values: &[f64], step: f64, offset: f64, t: f64) -> f64 {
    let m = values.len();
    if m == 1 {
        return values[0];
    }
    let pos = (t / step - offset).clamp(0.0, (m - 1) as f64);
    let k = (pos.floor() as usize).min(m - 2);
    let w = pos - k as f64;
    values[k] * (1.0 - w) + values[k + 1] * w
}

/// Transfers a coarse solution onto the fine grid of `nlp`, including
/// multipliers. Interval multipliers are interpolated at interval midpoints;
/// control-bound multipliers scale with the step.
fn refine(coarse: &DrainingSolution, problem: &DrainingProblem, nlp: &DrainingNlp) -> (Vec<f64>, Option<WarmMultipliers>) {
    let nc = coarse.nodes();
    let nf = nlp.nodes();
    let t0 = coarse.inner_exit_time;
    let hc = t0 / nc as f64;
    let hf = t0 / nf as f64;
    let xs: Vec<f64> = coarse.node_positions.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = coarse.node_positions.iter().map(|p| p.y).collect();
    let t = &problem.target;
    let mut x = vec![0.0; nlp.dimension()];
    let mut r = problem.arrival_uncertainty;
    let mut prev: Option<Point> = None;
    for i in 0..=nf {
        let ti = i as f64 * hf;
        let s = Point::new(interpolate(&xs, hc, 0.0, ti), interpolate(&ys, hc, 0.0, ti));
        x[nlp.pos(i)] = s.x;
        x[nlp.pos(i) + 1] = s.y;
        if let Some(p) = prev {
            let u = (s - p) / hf;
            let u = if u.norm() > 1.0 { u.normalize() } else { u };
            x[nlp.ctrl(i - 1)] = u.x;
            x[nlp.ctrl(i - 1) + 1] = u.y;
            let rate = t.growth_rate - t.sensing_gain + t.sensing_gain * (p - t.position).norm_squared() / t.sensing_radius.powi(2);
            r += hf * rate;
        }
        x[nlp.unc(i)] = r;
        prev = Some(s);
    }
    x[nlp.time()] = t0;
    x[nlp.exit()] = coarse.inner_exit_point.x;
    x[nlp.exit() + 1] = coarse.inner_exit_point.y;

    let cm = &coarse.multipliers;
    let coarse_rows = 3 * nc;
    if coarse.mode != nlp.mode() || cm.lambda.len() < coarse_rows || cm.mu.len() != nc + 2 {
        return (x, None);
    }
    let column = |rows: &dyn Fn(usize) -> usize| -> Vec<f64> { (0..nc).map(|j| cm.lambda[rows(j)]).collect() };
    let lx = column(&|j| 2 * j);
    let ly = column(&|j| 2 * j + 1);
    let lr = column(&|j| 2 * nc + j);
    let mu_u: Vec<f64> = cm.mu[..nc].to_vec();
    let mut lambda = vec![0.0; nlp.num_equalities()];
    let mut mu = vec![0.0; nlp.num_inequalities()];
    let ratio = nc as f64 / nf as f64;
    for i in 0..nf {
        let ti = (i as f64 + 0.5) * hf;
        lambda[2 * i] = interpolate(&lx, hc, 0.5, ti);
        lambda[2 * i + 1] = interpolate(&ly, hc, 0.5, ti);
        lambda[2 * nf + i] = interpolate(&lr, hc, 0.5, ti);
        mu[i] = interpolate(&mu_u, hc, 0.5, ti) * ratio;
    }
    lambda[3 * nf..].copy_from_slice(&cm.lambda[coarse_rows..]);
    mu[nf] = cm.mu[nc];
    mu[nf + 1] = cm.mu[nc + 1];
    (x, Some(WarmMultipliers { lambda, mu }))
}

/// Solves one draining problem, warm-starting from `warm` when its shape matches.
pub fn solve_draining(
    problem: &DrainingProblem,
    warm: Option<&DrainingSolution>,
    options: &DrainingOptions,
) -> Result<DrainingSolution, DrainingError> {
    problem.validate()?;
    let nlp = DrainingNlp::new(problem, problem.exit_mode());
    let compatible = warm.filter(|w| w.nodes() == problem.nodes && w.primal.len() == nlp.dimension());
    let (x0, multipliers) = match compatible {
        Some(w) => {
            let mut x = w.primal.clone();
            // move the first node onto the new entrance
            x[nlp.pos(0)] = problem.entrance.x;
            x[nlp.pos(0) + 1] = problem.entrance.y;
            x[nlp.unc(0)] = problem.arrival_uncertainty;
            let m = (w.mode == nlp.mode()).then(|| w.multipliers.clone());
            (x, m)
        }
        None if problem.nodes > 2 * COARSE_NODES => {
            let coarse_problem = DrainingProblem {
                nodes: COARSE_NODES,
                ..problem.clone()
            };
            match solve_draining(&coarse_problem, None, options) {
                Ok(coarse) => refine(&coarse, problem, &nlp),
                Err(_) => (cold_start(problem, &nlp), None),
            }
        }
        None => (cold_start(problem, &nlp), None),
    };
    let mut attempt = solve_nlp(&nlp, &x0, multipliers.as_ref(), &options.solver);
    if matches!(attempt, Err(NlpError::NotConverged(_))) && compatible.is_some() {
        attempt = solve_nlp(&nlp, &cold_start(problem, &nlp), None, &options.solver);
    }
    // a small penalty can let the iterate settle on an undrainable path
    let mut solver = options.solver.clone();
    for _ in 0..2 {
        if !matches!(attempt, Err(NlpError::NotConverged(_))) {
            break;
        }
        solver.initial_penalty = (solver.initial_penalty * 100.0).min(solver.max_penalty);
        attempt = solve_nlp(&nlp, &cold_start(problem, &nlp), None, &solver);
    }
    match attempt {
        Ok(s) => Ok(DrainingSolution::from_nlp(problem, &nlp, s.x, s.lambda, s.mu, s.report)),
        Err(NlpError::NotConverged(s)) => {
            let s = *s;
            let report = s.report.clone();
            let iterate = Box::new(DrainingSolution::from_nlp(problem, &nlp, s.x, s.lambda, s.mu, s.report));
            if report.status == SolverStatus::Infeasible {
                Err(DrainingError::Infeasible { report, iterate })
            } else {
                Err(DrainingError::NotConverged { report, iterate })
            }
        }
        Err(NlpError::DimensionMismatch { expected, found }) => Err(DrainingError::InvalidProblem(format!(
            "initial point dimension {found}, expected {expected}"
        ))),
    }
}

/// Hybrid (clamped) replay of a solution's controls from the entrance point.
pub fn replay_solution(solution: &DrainingSolution, problem: &DrainingProblem, dt: f64) -> Vec<TrajectorySample> {
    let scenario = problem.single_target_scenario();
    let pieces = solution.control_schedule(problem.departure, Phase::Draining(0));
    integrate_hybrid(
        &scenario,
        AgentState::new(problem.entrance, 0.0),
        &[problem.arrival_uncertainty],
        &pieces,
        dt,
    )
    .expect("solution controls are feasible")
}

/// Unclamped replay of a solution's controls, the relaxed uncertainty on the replay grid.
pub fn relaxed_replay(solution: &DrainingSolution, problem: &DrainingProblem, dt: f64) -> Vec<TrajectorySample> {
    let scenario = problem.single_target_scenario();
    let pieces = solution.control_schedule(problem.departure, Phase::Draining(0));
    integrate_relaxed(
        &scenario,
        AgentState::new(problem.entrance, 0.0),
        &[problem.arrival_uncertainty],
        &pieces,
        dt,
    )
    .expect("solution controls are feasible")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Drained threshold for the uncertainty.
    pub tolerance: f64,
    /// Simulation step for the terminal leg of the replay.
    pub dt: f64,
}

impl VerifyOptions {
    /// Tolerance `1e-6 max(R, 1)`.
    pub fn for_problem(problem: &DrainingProblem) -> Self {
        VerifyOptions {
            tolerance: 1e-6 * problem.arrival_uncertainty.max(1.0),
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

pub const CHECK_INNER_EXIT: &str = "inner_exit";
pub const CHECK_NO_REENTRY: &str = "no_reentry";
pub const CHECK_STRAIGHT_ZERO_INTERVAL: &str = "straight_zero_interval";
pub const CHECK_HYBRID_REPLAY: &str = "hybrid_replay";

/// Structural checks on a draining solution.
///
/// * `inner_exit`: the last node sits on the inner circle with the relaxed
///   uncertainty drained, and no earlier outward crossing is drained.
/// * `no_reentry`: the terminal leg does not enter the inner disk.
/// * `straight_zero_interval`: if the relaxed uncertainty stays nonpositive
///   for more than two steps, the nodes are collinear.
/// * `hybrid_replay`: a clamped replay drains the target and ends at the
///   departure point.
pub fn verify_solution(solution: &DrainingSolution, problem: &DrainingProblem, options: &VerifyOptions) -> VerificationReport {
    let tol = options.tolerance;
    let x_c = problem.target.position;
    let delta = problem.target.inner_radius();
    let r = problem.target.sensing_radius;
    let n = solution.node_controls.len();
    let pos = &solution.node_positions;
    let unc = &solution.node_uncertainty;
    let mut checks = Vec::new();

    let exit_offset = ((pos[n] - x_c).norm() - delta).abs();
    let earlier = (0..n.saturating_sub(1)).find(|&j| {
        (pos[j] - x_c).norm() < delta && (pos[j + 1] - x_c).norm() >= delta && unc[j + 1] <= tol
    });
    let on_circle = exit_offset <= 1e-6 * delta.max(1.0);
    checks.push(Check {
        name: CHECK_INNER_EXIT.into(),
        passed: on_circle && unc[n] <= tol && earlier.is_none(),
        detail: format!(
            "R(t0) = {:.3e}, |s0 - x| - delta = {:.3e}, earlier drained crossing: {:?}",
            unc[n], exit_offset, earlier
        ),
    });

    let leg = problem.departure - solution.inner_exit_point;
    let radial = solution.inner_exit_point - x_c;
    let min_dist = segment_min_distance(solution.inner_exit_point, problem.departure, x_c);
    let reentry = leg.norm() > 1e-9 * r.max(1.0) && min_dist < delta - 1e-6 * delta.max(1.0) && leg.dot(&radial) < 0.0;
    checks.push(Check {
        name: CHECK_NO_REENTRY.into(),
        passed: !reentry,
        detail: format!("terminal leg {:.3e}, closest approach {:.6}", leg.norm(), min_dist),
    });

    let first_nonpositive = (0..=n).rev().take_while(|&j| unc[j] <= tol).last();
    let zero_steps = first_nonpositive.map_or(0, |f| n - f);
    let (straight, deviation) = if zero_steps > 2 {
        let dev = max_line_deviation(pos);
        (dev <= 1e-4 * r.max(1.0), dev)
    } else {
        (true, 0.0)
    };
    checks.push(Check {
        name: CHECK_STRAIGHT_ZERO_INTERVAL.into(),
        passed: straight,
        detail: format!("nonpositive over {zero_steps} steps, deviation from a line {deviation:.3e}"),
    });

    let replay = replay_solution(solution, problem, options.dt);
    let min_r = replay.iter().map(|s| s.r[0]).fold(f64::INFINITY, f64::min);
    let end = replay.last().map_or(problem.entrance, |s| s.s);
    let miss = (end - problem.departure).norm();
    checks.push(Check {
        name: CHECK_HYBRID_REPLAY.into(),
        passed: min_r <= tol && miss <= 1e-3 * r,
        detail: format!("min replayed R {min_r:.3e}, endpoint miss {miss:.3e}"),
    });

    VerificationReport { checks }
}

fn segment_min_distance(a: Point, b: Point, p: Point) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&d) / len2).clamp(0.0, 1.0);
    (a + t * d - p).norm()
}

fn max_line_deviation(points: &[Point]) -> f64 {
    let (a, b) = (points[0], points[points.len() - 1]);
    let d = b - a;
    let len = d.norm();
    if len < 1e-12 {
        return points.iter().map(|p| (p - a).norm()).fold(0.0, f64::max);
    }
    let nrm = Point::new(-d.y, d.x) / len;
    points.iter().map(|p| (p - a).dot(&nrm).abs()).fold(0.0, f64::max)
}
