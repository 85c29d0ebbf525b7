//! Closed-form greedy visit: radial in, dwell at the center, radial out.

use serde::{Deserialize, Serialize};

use crate::model::{greedy_threshold, Point};
use crate::nlp::{SolverReport, SolverStatus, WarmMultipliers};
use crate::sim::{ControlPiece, Phase};

use super::{DrainingError, DrainingProblem, DrainingSolution, ExitMode};

/// Greedy visit when entrance and departure both lie on the sensing circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedySolution {
    pub total_time: f64,
    pub dwell_time: f64,
    /// Time at which the uncertainty reaches zero on the way out.
    pub inner_exit_time: f64,
    pub schedule: Vec<ControlPiece>,
}

/// Optimal visit for arrival uncertainty at or above the greedy threshold:
/// `T = (R - R_min) / (B - A) + 2 r`.
pub fn greedy_closed_form(problem: &DrainingProblem) -> Result<GreedySolution, DrainingError> {
    problem.validate()?;
    let t = &problem.target;
    let r = t.sensing_radius;
    let (a, b) = (t.growth_rate, t.sensing_gain);
    let dd = (problem.departure - t.position).norm();
    if (dd - r).abs() > 1e-9 * r.max(1.0) {
        return Err(DrainingError::Precondition(format!(
            "departure point must lie on the sensing circle (distance {dd}, radius {r})"
        )));
    }
    let threshold = greedy_threshold(t);
    let rc = problem.arrival_uncertainty;
    if rc < threshold * (1.0 - 1e-12) {
        return Err(DrainingError::Precondition(format!(
            "arrival uncertainty {rc} is below the greedy threshold {threshold}"
        )));
    }
    let dwell = ((rc - threshold) / (b - a)).max(0.0);
    let total = dwell + 2.0 * r;
    let delta = t.inner_radius();
    let inward = (t.position - problem.entrance) / r;
    let outward = (problem.departure - t.position) / r;
    let phase = Phase::Draining(0);
    let mut schedule = vec![ControlPiece::new(r, inward, phase)];
    if dwell > 0.0 {
        schedule.push(ControlPiece::new(dwell, Point::zeros(), phase));
    }
    schedule.push(ControlPiece::new(r, outward, phase));
    Ok(GreedySolution {
        total_time: total,
        dwell_time: dwell,
        inner_exit_time: total - (r - delta),
        schedule,
    })
}

impl GreedySolution {
    /// Position and exact relaxed uncertainty at time `tau` along the greedy path.
    fn state_at(&self, problem: &DrainingProblem, tau: f64) -> (Point, f64) {
        let t = &problem.target;
        let r = t.sensing_radius;
        let (a, b) = (t.growth_rate, t.sensing_gain);
        let k = b / (3.0 * r * r);
        let rc = problem.arrival_uncertainty;
        let at_center = rc + (a - 2.0 * b / 3.0) * r;
        if tau <= r {
            let s = problem.entrance + (t.position - problem.entrance) * (tau / r);
            (s, rc + (a - b) * tau + k * (r.powi(3) - (r - tau).powi(3)))
        } else if tau <= r + self.dwell_time {
            (t.position, at_center + (a - b) * (tau - r))
        } else {
            let q = (tau - r - self.dwell_time).min(r);
            let s = t.position + (problem.departure - t.position) * (q / r);
            (s, at_center + (a - b) * self.dwell_time + (a - b) * q + k * q.powi(3))
        }
    }

    /// Samples the greedy path up to the inner exit on `nodes` intervals, in
    /// the same layout as an optimized solution. Node uncertainties are exact.
    pub fn to_draining_solution(&self, problem: &DrainingProblem, nodes: usize) -> DrainingSolution {
        let t0 = self.inner_exit_time;
        let h = t0 / nodes as f64;
        let states: Vec<(Point, f64)> = (0..=nodes).map(|j| self.state_at(problem, j as f64 * h)).collect();
        let node_positions: Vec<Point> = states.iter().map(|s| s.0).collect();
        let node_uncertainty: Vec<f64> = states.iter().map(|s| s.1).collect();
        let node_controls: Vec<Point> = node_positions.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        let exit = node_positions[nodes];
        let leg = (problem.departure - exit).norm();
        DrainingSolution {
            node_positions,
            node_uncertainty,
            node_controls,
            inner_exit_time: t0,
            inner_exit_point: exit,
            terminal_leg_time: leg,
            total_time: t0 + leg,
            lambda_phi: Point::zeros(),
            lambda_psi: Point::zeros(),
            lambda_r: 1.0 / (problem.target.sensing_gain - problem.target.growth_rate),
            lambda_circle: 0.0,
            mode: ExitMode::Free,
            report: SolverReport {
                status: SolverStatus::Converged,
                iterations: 0,
                inner_iterations: 0,
                kkt_residual: 0.0,
                constraint_violation: 0.0,
                complementarity: 0.0,
                objective: t0 + leg,
                final_penalty: 0.0,
            },
            primal: Vec::new(),
            multipliers: WarmMultipliers::default(),
        }
    }
}
