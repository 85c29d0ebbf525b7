//! Greedy comparison policy: head for the target center, dwell there if
//! needed until its uncertainty is zero, then head for the next center.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordinator::{BoundaryAngles, CycleRecord, VisitRecord};
use crate::draining::ExitMode;
use crate::model::{sensing_value, Point, Scenario, TargetSpec};
use crate::sim::{Phase, TrajectorySample};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("max_cycles must be positive")]
    NoCycles,
    #[error("scenario needs at least one visit")]
    EmptySequence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineOptions {
    pub dt: f64,
    pub max_cycles: usize,
    pub tol_uncertainty: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            dt: 1e-3,
            max_cycles: 200,
            tol_uncertainty: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    /// Period of the last cycle.
    pub period: f64,
    /// Arrival uncertainties stabilized within tolerance.
    pub converged: bool,
    pub history: Vec<CycleRecord>,
    /// Samples of the last cycle, with time starting at zero.
    pub trajectory: Vec<TrajectorySample>,
}

struct Greedy<'a> {
    scenario: &'a Scenario,
    dt: f64,
    s: Point,
    r: Vec<f64>,
    t: f64,
    samples: Vec<TrajectorySample>,
}

impl Greedy<'_> {
    fn rates(&self) -> Vec<f64> {
        self.scenario
            .targets()
            .iter()
            .map(|t| t.growth_rate - t.sensing_gain * sensing_value(t, &self.s))
            .collect()
    }

    fn record(&mut self, u: Point, phase: Phase) {
        self.samples.push(TrajectorySample {
            t: self.t,
            s: self.s,
            u,
            r: self.r.clone(),
            phase,
        });
    }

    fn step(&mut self, h: f64, u: Point, phase: Phase) {
        self.record(u, phase);
        let rates = self.rates();
        for (ri, rate) in self.r.iter_mut().zip(rates) {
            *ri = (*ri + h * rate).max(0.0);
        }
        self.s += h * u;
        self.t += h;
    }

    /// Moves straight toward `goal` for `length`, in steps of at most `dt`.
    fn travel(&mut self, goal: Point, length: f64, phase: Phase) {
        let d = goal - self.s;
        if length <= 0.0 || d.norm() <= 0.0 {
            return;
        }
        let u = d / d.norm();
        let steps = ((length / self.dt) - 1e-9).ceil().max(1.0) as usize;
        let h = length / steps as f64;
        for _ in 0..steps {
            self.step(h, u, phase);
        }
    }

    /// Heads to the center of `target` (index `i`) until `R_i` hits zero,
    /// dwelling at the center when needed. The final step is shortened so
    /// that it lands exactly on zero.
    fn drain(&mut self, i: usize, target: &TargetSpec, phase: Phase) {
        let center = target.position;
        loop {
            if self.r[i] <= 0.0 {
                return;
            }
            let to_center = center - self.s;
            let dist = to_center.norm();
            let (u, h) = if dist > 1e-12 {
                (to_center / dist, self.dt.min(dist))
            } else {
                self.s = center;
                (Point::zeros(), self.dt)
            };
            let rate = target.growth_rate - target.sensing_gain * sensing_value(target, &self.s);
            if rate < 0.0 && self.r[i] + h * rate <= 0.0 {
                let partial = self.r[i] / -rate;
                self.step(partial, u, phase);
                self.r[i] = 0.0;
                return;
            }
            self.step(h, u, phase);
        }
    }
}

/// Simulates the greedy policy cycle after cycle until the arrival
/// uncertainties change by at most `tol_uncertainty`, or `max_cycles`.
/// The agent starts on the first target's sensing circle, facing it from
/// the last target in the sequence.
pub fn run_greedy_baseline(scenario: &Scenario, options: &BaselineOptions) -> Result<BaselineResult, BaselineError> {
    if !(options.dt > 0.0) || !options.dt.is_finite() {
        return Err(BaselineError::NonPositiveStep(options.dt));
    }
    if options.max_cycles == 0 {
        return Err(BaselineError::NoCycles);
    }
    let k_total = scenario.num_visits();
    if k_total == 0 {
        return Err(BaselineError::EmptySequence);
    }
    let first = scenario.visit_target(0);
    let last = scenario.visit_target(k_total - 1);
    let back = last.position - first.position;
    let start = if back.norm() > 0.0 {
        first.position + first.sensing_radius * back.normalize()
    } else {
        first.point_on_sensing_circle(0.0)
    };
    let mut g = Greedy {
        scenario,
        dt: options.dt,
        s: start,
        r: scenario.initial_uncertainty().to_vec(),
        t: 0.0,
        samples: Vec::new(),
    };
    let mut previous: Vec<f64> = scenario.sequence().iter().map(|&i| g.r[i]).collect();
    let mut history = Vec::new();
    let mut converged = false;
    let mut trajectory = Vec::new();
    for cycle in 0..options.max_cycles {
        g.samples.clear();
        let cycle_start = g.t;
        let mut visits = Vec::with_capacity(k_total);
        let mut phi = Vec::with_capacity(k_total);
        let mut psi = Vec::with_capacity(k_total);
        for k in 0..k_total {
            let i = scenario.sequence()[k];
            let target = scenario.target(i);
            let arrival = g.r[i];
            let entered = g.t;
            phi.push(target.polar_angle(&g.s));
            g.drain(i, target, Phase::Draining(k));
            let drained = g.t;
            let next = scenario.visit_target((k + 1) % k_total);
            let heading = next.position - g.s;
            let away = g.s - target.position;
            psi.push(if away.norm() > 1e-9 { away.y.atan2(away.x) } else { heading.y.atan2(heading.x) });
            // to the next sensing circle
            let dist = heading.norm();
            g.travel(next.position, (dist - next.sensing_radius).max(0.0), Phase::Switching(k));
            visits.push(VisitRecord {
                target_id: target.id,
                arrival_uncertainty: arrival,
                departure_uncertainty: 0.0,
                drain_time: drained - entered,
                inner_exit_time: drained - entered,
                switch_time: g.t - drained,
                lambda_phi: Point::zeros(),
                lambda_psi: Point::zeros(),
                lambda_r: 0.0,
                mode: ExitMode::Free,
            });
        }
        let residual = visits
            .iter()
            .zip(&previous)
            .map(|(v, p)| (v.arrival_uncertainty - p).abs())
            .fold(0.0, f64::max);
        previous = visits.iter().map(|v| v.arrival_uncertainty).collect();
        history.push(CycleRecord {
            cycle,
            angles: BoundaryAngles { phi, psi },
            visits,
            period: g.t - cycle_start,
            gradient: Vec::new(),
            grad_norm: f64::NAN,
            uncertainty_residual: residual,
            cpu_seconds: Vec::new(),
        });
        g.record(Point::zeros(), Phase::Switching(k_total - 1));
        trajectory = g
            .samples
            .iter()
            .map(|s| TrajectorySample {
                t: s.t - cycle_start,
                ..s.clone()
            })
            .collect();
        g.samples.pop();
        if cycle > 0 && residual <= options.tol_uncertainty {
            converged = true;
            break;
        }
    }
    let period = history.last().map_or(0.0, |c: &CycleRecord| c.period);
    Ok(BaselineResult {
        period,
        converged,
        history,
        trajectory,
    })
}
