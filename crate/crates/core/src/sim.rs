//! Forward simulation of the agent and the clamped uncertainty dynamics.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{sensing_value, AgentState, Point, Scenario};

/// Tolerance on `|u| <= 1` for supplied controls.
pub const CONTROL_TOLERANCE: f64 = 1e-9;

/// What the agent is doing during a stretch of the cycle. Visit indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Draining(usize),
    Switching(usize),
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Draining(k) => write!(f, "drain_{}", k + 1),
            Phase::Switching(k) => write!(f, "switch_{}", k + 1),
        }
    }
}

/// Constant control held for `duration`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPiece {
    pub duration: f64,
    pub control: Point,
    pub phase: Phase,
    /// Integration step for this piece; the simulation step when `None`.
    pub step: Option<f64>,
}

impl ControlPiece {
    pub fn new(duration: f64, control: Point, phase: Phase) -> Self {
        ControlPiece {
            duration,
            control,
            phase,
            step: None,
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }
}

/// Piecewise-constant control schedule.
pub type ControlSchedule = Vec<ControlPiece>;

/// Total duration of a schedule.
pub fn schedule_duration(schedule: &[ControlPiece]) -> f64 {
    schedule.iter().map(|p| p.duration).sum()
}

/// Straight move from `from` to `to` at unit speed.
pub fn straight_leg(from: Point, to: Point, phase: Phase) -> Option<ControlPiece> {
    let d = to - from;
    let len = d.norm();
    (len > 0.0).then(|| ControlPiece::new(len, d / len, phase))
}

/// State at time `t`; `u` is the control applied from `t` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub s: Point,
    pub u: Point,
    pub r: Vec<f64>,
    pub phase: Phase,
}

/// Uncertainty samples of one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl UncertaintyTrace {
    /// Extracts target `index` from a trajectory, dropping repeated times.
    pub fn from_samples(samples: &[TrajectorySample], index: usize) -> Self {
        let mut times = Vec::with_capacity(samples.len());
        let mut values = Vec::with_capacity(samples.len());
        for s in samples {
            if times.last().map_or(true, |&t| s.t > t) {
                times.push(s.t);
                values.push(s.r[index]);
            }
        }
        UncertaintyTrace { times, values }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Linear interpolation, clamped to the end values.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 0 {
            return f64::NAN;
        }
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let i = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        self.values[i - 1] * (1.0 - w) + self.values[i] * w
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("control piece {index} has magnitude {norm} > 1")]
    ControlTooLarge { index: usize, norm: f64 },
    #[error("piece {index} has invalid duration {duration}")]
    InvalidDuration { index: usize, duration: f64 },
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("expected {expected} initial uncertainties, got {found}")]
    InitialLength { expected: usize, found: usize },
    #[error("initial uncertainty {value} of target {index} is negative or not finite")]
    NegativeInitial { index: usize, value: f64 },
    #[error("plan covers {found} visits, sequence has {expected}")]
    PlanMismatch { expected: usize, found: usize },
    #[error("time {t} outside trace domain [{start}, {end}]")]
    TimeOutsideTrace { t: f64, start: f64, end: f64 },
}

fn check_initial(scenario: &Scenario, r0: &[f64]) -> Result<(), SimError> {
    if r0.len() != scenario.num_targets() {
        return Err(SimError::InitialLength {
            expected: scenario.num_targets(),
            found: r0.len(),
        });
    }
    if let Some((index, &value)) = r0.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(SimError::NegativeInitial { index, value });
    }
    Ok(())
}

struct Integrator<'a> {
    scenario: &'a Scenario,
    s: Point,
    r: Vec<f64>,
    t: f64,
    clamp: bool,
    record: bool,
    samples: Vec<TrajectorySample>,
}

impl<'a> Integrator<'a> {
    fn new(scenario: &'a Scenario, start: &AgentState, r0: &[f64]) -> Self {
        Integrator {
            scenario,
            s: start.position,
            r: r0.to_vec(),
            t: start.time,
            clamp: true,
            record: true,
            samples: Vec::new(),
        }
    }

    fn push_sample(&mut self, u: Point, phase: Phase) {
        self.samples.push(TrajectorySample {
            t: self.t,
            s: self.s,
            u,
            r: self.r.clone(),
            phase,
        });
    }

    fn run(&mut self, pieces: &[ControlPiece], dt: f64, offset: usize) -> Result<(), SimError> {
        for (i, piece) in pieces.iter().enumerate() {
            let norm = piece.control.norm();
            if !(norm <= 1.0 + CONTROL_TOLERANCE) {
                return Err(SimError::ControlTooLarge { index: offset + i, norm });
            }
            if !(piece.duration >= 0.0) || !piece.duration.is_finite() {
                return Err(SimError::InvalidDuration {
                    index: offset + i,
                    duration: piece.duration,
                });
            }
        }
        for piece in pieces {
            if piece.duration == 0.0 {
                continue;
            }
            let dt = piece.step.filter(|h| *h > 0.0).unwrap_or(dt);
            let steps = ((piece.duration / dt) - 1e-9).ceil().max(1.0) as usize;
            let h = piece.duration / steps as f64;
            let t_start = self.t;
            for j in 0..steps {
                if !self.record {
                } else if self.samples.last().map_or(true, |s| s.t < self.t) {
                    self.push_sample(piece.control, piece.phase);
                } else if let Some(last) = self.samples.last_mut() {
                    last.u = piece.control;
                    last.phase = piece.phase;
                }
                for (ri, target) in self.r.iter_mut().zip(self.scenario.targets()) {
                    let rate = target.growth_rate - target.sensing_gain * sensing_value(target, &self.s);
                    *ri += h * rate;
                    if self.clamp {
                        *ri = ri.max(0.0);
                    }
                }
                self.s += h * piece.control;
                self.t = t_start + (j + 1) as f64 * h;
            }
            self.t = t_start + piece.duration;
        }
        Ok(())
    }

    fn finish(mut self, last: Option<&ControlPiece>) -> Vec<TrajectorySample> {
        let (u, phase) = last.map_or((Point::zeros(), Phase::Switching(0)), |p| (p.control, p.phase));
        if self.samples.last().map_or(true, |s| s.t < self.t) {
            self.push_sample(u, phase);
        }
        self.samples
    }
}

/// Simulates the agent and all uncertainties under a control schedule.
///
/// Each piece is split into `ceil(duration / dt)` equal Euler steps. The
/// uncertainty update is `R <- max(0, R + h (A - B p(s)))`.
pub fn integrate_hybrid(
    scenario: &Scenario,
    start: AgentState,
    r0: &[f64],
    controls: &[ControlPiece],
    dt: f64,
) -> Result<Vec<TrajectorySample>, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::NonPositiveStep(dt));
    }
    check_initial(scenario, r0)?;
    let mut integ = Integrator::new(scenario, &start, r0);
    integ.run(controls, dt, 0)?;
    Ok(integ.finish(controls.last()))
}

/// Same as [`integrate_hybrid`] but without the clamp at zero, so the
/// uncertainties follow the smooth rate `A - B p(s)` and may go negative.
pub fn integrate_relaxed(
    scenario: &Scenario,
    start: AgentState,
    r0: &[f64],
    controls: &[ControlPiece],
    dt: f64,
) -> Result<Vec<TrajectorySample>, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::NonPositiveStep(dt));
    }
    check_initial(scenario, r0)?;
    let mut integ = Integrator::new(scenario, &start, r0);
    integ.clamp = false;
    integ.run(controls, dt, 0)?;
    Ok(integ.finish(controls.last()))
}

/// Agent position and clamped uncertainties, advanced piece by piece
/// without recording samples. Uses the same stepping as [`integrate_hybrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub position: Point,
    pub uncertainty: Vec<f64>,
    pub time: f64,
}

impl HybridState {
    pub fn new(scenario: &Scenario, start: AgentState, r0: &[f64]) -> Result<Self, SimError> {
        check_initial(scenario, r0)?;
        Ok(HybridState {
            position: start.position,
            uncertainty: r0.to_vec(),
            time: start.time,
        })
    }

    pub fn advance(&mut self, scenario: &Scenario, pieces: &[ControlPiece], dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0) {
            return Err(SimError::NonPositiveStep(dt));
        }
        let mut integ = Integrator::new(scenario, &AgentState::new(self.position, self.time), &self.uncertainty);
        integ.record = false;
        integ.run(pieces, dt, 0)?;
        self.position = integ.s;
        self.uncertainty = integ.r;
        self.time = integ.t;
        Ok(())
    }
}

/// One phase of a cycle plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phase: Phase,
    pub pieces: Vec<ControlPiece>,
}

/// Phases of one full cycle, executed back to back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclePlan {
    pub start: Point,
    pub phases: Vec<PhasePlan>,
}

/// Outcome of [`simulate_cycle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleSimulation {
    pub samples: Vec<TrajectorySample>,
    /// Uncertainty of the visited target when each draining phase begins.
    pub arrival_uncertainty: Vec<f64>,
    /// Uncertainty of the visited target when each draining phase ends.
    pub departure_uncertainty: Vec<f64>,
    /// `(phase, start time, duration)` for every phase.
    pub phase_times: Vec<(Phase, f64, f64)>,
    pub period: f64,
    pub final_uncertainty: Vec<f64>,
    pub final_position: Point,
}

/// Executes a cycle plan from time 0 and measures the arrival uncertainties.
pub fn simulate_cycle(scenario: &Scenario, plan: &CyclePlan, r0: &[f64], dt: f64) -> Result<CycleSimulation, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::NonPositiveStep(dt));
    }
    check_initial(scenario, r0)?;
    let k_total = scenario.num_visits();
    let drains: Vec<usize> = plan
        .phases
        .iter()
        .filter_map(|p| match p.phase {
            Phase::Draining(k) => Some(k),
            _ => None,
        })
        .collect();
    if drains.len() != k_total || drains.iter().enumerate().any(|(i, &k)| i != k) {
        return Err(SimError::PlanMismatch {
            expected: k_total,
            found: drains.len(),
        });
    }
    let mut integ = Integrator::new(scenario, &AgentState::new(plan.start, 0.0), r0);
    let mut arrival = vec![0.0; k_total];
    let mut departure = vec![0.0; k_total];
    let mut phase_times = Vec::with_capacity(plan.phases.len());
    let mut offset = 0;
    let mut duration_sum = 0.0;
    for phase in &plan.phases {
        let visited = match phase.phase {
            Phase::Draining(k) => Some((k, scenario.sequence()[k])),
            _ => None,
        };
        if let Some((k, i)) = visited {
            arrival[k] = integ.r[i];
        }
        let dur = schedule_duration(&phase.pieces);
        phase_times.push((phase.phase, integ.t, dur));
        integ.run(&phase.pieces, dt, offset)?;
        offset += phase.pieces.len();
        duration_sum += dur;
        if let Some((k, i)) = visited {
            departure[k] = integ.r[i];
        }
    }
    let final_uncertainty = integ.r.clone();
    let final_position = integ.s;
    let last = plan.phases.iter().rev().find_map(|p| p.pieces.last());
    let samples = integ.finish(last);
    Ok(CycleSimulation {
        samples,
        arrival_uncertainty: arrival,
        departure_uncertainty: departure,
        phase_times,
        period: duration_sum,
        final_uncertainty,
        final_position,
    })
}

/// Result of [`recover_true_uncertainty`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub trace: UncertaintyTrace,
    /// Time where the relaxed trace stops decreasing after going negative.
    pub turn_time: Option<f64>,
    /// The relaxed trace decreases again after the turn (agent re-entered the inner disk).
    pub reentry: bool,
    /// The turn differs from the supplied inner-exit time by more than one sample.
    pub turn_mismatch: bool,
}

/// Maps a relaxed (unclamped) uncertainty trace to the clamped one.
///
/// The negative stretch is projected to zero up to the point where the trace
/// stops decreasing; the rest is shifted up by the relaxed value there.
pub fn recover_true_uncertainty(relaxed: &UncertaintyTrace, t0: f64) -> Result<Recovery, SimError> {
    let n = relaxed.times.len();
    let (start, end) = match (relaxed.times.first(), relaxed.times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => {
            return Err(SimError::TimeOutsideTrace {
                t: t0,
                start: f64::NAN,
                end: f64::NAN,
            })
        }
    };
    let slack = 1e-9 * (end - start).abs().max(1.0);
    if !(t0 >= start - slack && t0 <= end + slack) {
        return Err(SimError::TimeOutsideTrace { t: t0, start, end });
    }
    let v = &relaxed.values;
    let Some(first_negative) = v.iter().position(|&x| x < 0.0) else {
        return Ok(Recovery {
            trace: relaxed.clone(),
            turn_time: None,
            reentry: false,
            turn_mismatch: false,
        });
    };
    let turn = (first_negative..n)
        .find(|&i| i + 1 == n || v[i + 1] >= v[i])
        .unwrap_or(n - 1);
    let shift = v[turn];
    let mut values = v.clone();
    for x in values.iter_mut().take(turn + 1).skip(first_negative) {
        *x = 0.0;
    }
    for x in values.iter_mut().skip(turn + 1) {
        *x -= shift;
    }
    let reentry = (turn + 1..n.saturating_sub(1)).any(|i| v[i + 1] < v[i] - 1e-12 * v[i].abs().max(1.0));
    let turn_time = relaxed.times[turn];
    let t0_index = relaxed.times.partition_point(|&t| t < t0 - slack);
    let turn_mismatch = turn.abs_diff(t0_index.min(n - 1)) > 1;
    Ok(Recovery {
        trace: UncertaintyTrace {
            times: relaxed.times.clone(),
            values,
        },
        turn_time: Some(turn_time),
        reentry,
        turn_mismatch,
    })
}

/// Piecewise-constant control law on `[0, T]` given by its pieces.
fn control_at(schedule: &[ControlPiece], t: f64) -> Point {
    let mut acc = 0.0;
    for p in schedule {
        acc += p.duration;
        if t < acc {
            return p.control;
        }
    }
    schedule.last().map_or(Point::zeros(), |p| p.control)
}

/// Time-warped convex blend of two control laws with the same endpoints.
///
/// With `T_s = (1 - s) T1 + s T2` the blend is
/// `u_s(t) = [(1 - s) T1 u1(t T1 / T_s) + s T2 u2(t T2 / T_s)] / T_s`,
/// which keeps `|u_s| <= 1` and has the same displacement as `u1` and `u2`.
/// The result is sampled as `pieces` constant pieces at their midpoints, so
/// it is exact when the breakpoints line up and otherwise approximates it.
pub fn homotopy_blend(u1: &[ControlPiece], u2: &[ControlPiece], sigma: f64, pieces: usize) -> ControlSchedule {
    let t1 = schedule_duration(u1);
    let t2 = schedule_duration(u2);
    let ts = (1.0 - sigma) * t1 + sigma * t2;
    let phase = u1.first().or(u2.first()).map_or(Phase::Draining(0), |p| p.phase);
    let breaks = blend_breakpoints(u1, u2, t1, t2, ts, pieces);
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let c = ((1.0 - sigma) * t1 * control_at(u1, mid * t1 / ts) + sigma * t2 * control_at(u2, mid * t2 / ts)) / ts;
            ControlPiece::new(w[1] - w[0], c, phase)
        })
        .collect()
}

/// Union of both schedules' breakpoints mapped onto `[0, ts]`, plus a uniform grid.
fn blend_breakpoints(u1: &[ControlPiece], u2: &[ControlPiece], t1: f64, t2: f64, ts: f64, pieces: usize) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=pieces.max(1)).map(|i| ts * i as f64 / pieces.max(1) as f64).collect();
    for (sched, total) in [(u1, t1), (u2, t2)] {
        if total > 0.0 {
            let mut acc = 0.0;
            for p in sched {
                acc += p.duration;
                b.push(acc * ts / total);
            }
        }
    }
    b.retain(|x| *x >= 0.0 && *x <= ts);
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, c| (*a - *c).abs() <= 1e-14 * ts.max(1.0));
    b
}

/// Blend without the duration weights, `(1 - s) u1(.) + s u2(.)`.
/// Kept to demonstrate that it misses the endpoint when `T1 != T2`.
pub fn homotopy_blend_unweighted(u1: &[ControlPiece], u2: &[ControlPiece], sigma: f64, pieces: usize) -> ControlSchedule {
    let t1 = schedule_duration(u1);
    let t2 = schedule_duration(u2);
    let ts = (1.0 - sigma) * t1 + sigma * t2;
    let phase = u1.first().or(u2.first()).map_or(Phase::Draining(0), |p| p.phase);
    blend_breakpoints(u1, u2, t1, t2, ts, pieces)
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let c = (1.0 - sigma) * control_at(u1, mid * t1 / ts) + sigma * control_at(u2, mid * t2 / ts);
            ControlPiece::new(w[1] - w[0], c, phase)
        })
        .collect()
}

/// Endpoint of `ds/dt = u` from `start`.
pub fn displacement_endpoint(start: Point, schedule: &[ControlPiece]) -> Point {
    schedule.iter().fold(start, |s, p| s + p.duration * p.control)
}
