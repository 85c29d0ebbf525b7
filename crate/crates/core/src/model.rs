//! Targets, the sensing model and the hybrid uncertainty dynamics.
//!
//! Each target `i` carries a scalar uncertainty `R_i` that grows at rate `A`
//! while unobserved and is reduced by an agent within sensing radius `r`:
//!
//! ```text
//! p(s)  = max{0, 1 - |s - x|^2 / r^2}
//! dR/dt = A - B p(s)        unless R = 0 and A - B p(s) < 0, then 0
//! ```

use std::fmt;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Planar point or direction.
pub type Point = Vector2<f64>;

/// One monitored, static target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub id: u32,
    pub position: Point,
    /// Uncertainty growth rate `A` while unobserved.
    pub growth_rate: f64,
    /// Sensing gain `B`; must exceed the growth rate.
    pub sensing_gain: f64,
    /// Sensing radius `r`.
    pub sensing_radius: f64,
}

impl TargetSpec {
    /// Builds a target, checking the parameter invariants.
    pub fn new(
        id: u32,
        position: Point,
        growth_rate: f64,
        sensing_gain: f64,
        sensing_radius: f64,
    ) -> Result<Self, ScenarioError> {
        let target = TargetSpec {
            id,
            position,
            growth_rate,
            sensing_gain,
            sensing_radius,
        };
        let violations = target.parameter_violations();
        if violations.is_empty() {
            Ok(target)
        } else {
            Err(ScenarioError { violations })
        }
    }

    fn parameter_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let all_finite = [
            self.position.x,
            self.position.y,
            self.growth_rate,
            self.sensing_gain,
            self.sensing_radius,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            out.push(Violation::NonFinite { target: self.id });
            return out;
        }
        if self.growth_rate <= 0.0 {
            out.push(Violation::NonPositiveGrowth {
                target: self.id,
                growth_rate: self.growth_rate,
            });
        }
        if self.sensing_gain <= self.growth_rate {
            out.push(Violation::GainNotAboveGrowth {
                target: self.id,
                growth_rate: self.growth_rate,
                sensing_gain: self.sensing_gain,
            });
        }
        if self.sensing_radius <= 0.0 {
            out.push(Violation::NonPositiveRadius {
                target: self.id,
                radius: self.sensing_radius,
            });
        }
        out
    }

    pub fn inner_radius(&self) -> f64 {
        inner_radius(self)
    }

    /// Point on the sensing circle at polar angle `angle`.
    pub fn point_on_sensing_circle(&self, angle: f64) -> Point {
        self.position + self.sensing_radius * Point::new(angle.cos(), angle.sin())
    }

    /// Point on the inner (zero-rate) circle at polar angle `angle`.
    pub fn point_on_inner_circle(&self, angle: f64) -> Point {
        self.position + self.inner_radius() * Point::new(angle.cos(), angle.sin())
    }

    /// Polar angle of `p` around the target.
    pub fn polar_angle(&self, p: &Point) -> f64 {
        let d = p - self.position;
        d.y.atan2(d.x)
    }

    /// Smooth (unclamped) uncertainty rate `A - B p(s)`.
    pub fn smooth_rate(&self, s: &Point) -> f64 {
        self.growth_rate - self.sensing_gain * sensing_value(self, s)
    }
}

/// Position and clock of the agent. Dynamics are `ds/dt = u` with `|u| <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Point,
    pub time: f64,
}

impl AgentState {
    pub fn new(position: Point, time: f64) -> Self {
        AgentState { position, time }
    }
}

/// A validated monitoring scenario. Construct through [`validate_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    targets: Vec<TargetSpec>,
    /// Visiting order as indices into `targets`.
    sequence: Vec<usize>,
    initial_uncertainty: Vec<f64>,
}

impl Scenario {
    pub fn targets(&self) -> &[TargetSpec] {
        &self.targets
    }

    pub fn target(&self, index: usize) -> &TargetSpec {
        &self.targets[index]
    }

    /// Visiting sequence as target indices (0-based positions in `targets`).
    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    pub fn initial_uncertainty(&self) -> &[f64] {
        &self.initial_uncertainty
    }

    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn num_visits(&self) -> usize {
        self.sequence.len()
    }

    /// Target visited at visit `k` (0-based, cyclic).
    pub fn visit_target(&self, k: usize) -> &TargetSpec {
        &self.targets[self.sequence[k % self.sequence.len()]]
    }

    pub fn index_of_id(&self, id: u32) -> Option<usize> {
        self.targets.iter().position(|t| t.id == id)
    }

    /// Same scenario with different starting uncertainties.
    pub fn with_initial_uncertainty(&self, values: Vec<f64>) -> Result<Scenario, ScenarioError> {
        validate_scenario(RawScenario {
            targets: self.targets.clone(),
            sequence: self.sequence.iter().map(|&i| self.targets[i].id).collect(),
            initial_uncertainty: values,
        })
    }

    /// Raw form, with the sequence expressed in target ids.
    pub fn to_raw(&self) -> RawScenario {
        RawScenario {
            targets: self.targets.clone(),
            sequence: self.sequence.iter().map(|&i| self.targets[i].id).collect(),
            initial_uncertainty: self.initial_uncertainty.clone(),
        }
    }
}

/// Unvalidated scenario data; the sequence refers to target ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScenario {
    pub targets: Vec<TargetSpec>,
    pub sequence: Vec<u32>,
    pub initial_uncertainty: Vec<f64>,
}

/// One reason a scenario was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite { target: u32 },
    NonPositiveGrowth { target: u32, growth_rate: f64 },
    GainNotAboveGrowth { target: u32, growth_rate: f64, sensing_gain: f64 },
    NonPositiveRadius { target: u32, radius: f64 },
    DuplicateId { target: u32 },
    OverlappingDisks { first: u32, second: u32, distance: f64, radii_sum: f64 },
    NegativeInitialUncertainty { target: u32, value: f64 },
    InitialUncertaintyLength { expected: usize, found: usize },
    UnknownSequenceTarget { id: u32 },
    UnvisitedTarget { target: u32 },
    EmptySequence,
    NoTargets,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { target } => {
                write!(f, "target {target}: parameters must be finite")
            }
            Violation::NonPositiveGrowth {
                target,
                growth_rate,
            } => write!(f, "target {target}: growth rate A must be positive (A = {growth_rate})"),
            Violation::GainNotAboveGrowth {
                target,
                growth_rate,
                sensing_gain,
            } => write!(
                f,
                "target {target}: B must exceed A (A = {growth_rate}, B = {sensing_gain})"
            ),
            Violation::NonPositiveRadius { target, radius } => {
                write!(f, "target {target}: sensing radius r must be positive (r = {radius})")
            }
            Violation::DuplicateId { target } => write!(f, "target id {target} appears more than once"),
            Violation::OverlappingDisks {
                first,
                second,
                distance,
                radii_sum,
            } => write!(
                f,
                "targets {first} and {second}: sensing disks intersect (distance {distance} <= r_i + r_j = {radii_sum})"
            ),
            Violation::NegativeInitialUncertainty { target, value } => {
                write!(f, "target {target}: initial uncertainty must be nonnegative ({value})")
            }
            Violation::InitialUncertaintyLength { expected, found } => write!(
                f,
                "initial_uncertainty has {found} entries, expected one per target ({expected})"
            ),
            Violation::UnknownSequenceTarget { id } => {
                write!(f, "sequence references unknown target id {id}")
            }
            Violation::UnvisitedTarget { target } => {
                write!(f, "target {target} never appears in the sequence")
            }
            Violation::EmptySequence => write!(f, "visiting sequence is empty"),
            Violation::NoTargets => write!(f, "scenario has no targets"),
        }
    }
}

/// All violations found while validating a scenario.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid scenario: {}", join_violations(.violations))]
pub struct ScenarioError {
    pub violations: Vec<Violation>,
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Checks targets, disk disjointness, the sequence and initial uncertainties.
pub fn validate_scenario(raw: RawScenario) -> Result<Scenario, ScenarioError> {
    let mut violations = Vec::new();
    if raw.targets.is_empty() {
        violations.push(Violation::NoTargets);
    }
    for t in &raw.targets {
        violations.extend(t.parameter_violations());
    }
    for (i, t) in raw.targets.iter().enumerate() {
        if raw.targets[..i].iter().any(|o| o.id == t.id) {
            violations.push(Violation::DuplicateId { target: t.id });
        }
    }
    for (i, a) in raw.targets.iter().enumerate() {
        for b in &raw.targets[i + 1..] {
            let distance = (a.position - b.position).norm();
            let radii_sum = a.sensing_radius + b.sensing_radius;
            // strict: touching disks are rejected
            if !(distance > radii_sum) {
                violations.push(Violation::OverlappingDisks {
                    first: a.id,
                    second: b.id,
                    distance,
                    radii_sum,
                });
            }
        }
    }
    if raw.initial_uncertainty.len() != raw.targets.len() {
        violations.push(Violation::InitialUncertaintyLength {
            expected: raw.targets.len(),
            found: raw.initial_uncertainty.len(),
        });
    }
    for (t, &v) in raw.targets.iter().zip(&raw.initial_uncertainty) {
        if !(v >= 0.0) || !v.is_finite() {
            violations.push(Violation::NegativeInitialUncertainty {
                target: t.id,
                value: v,
            });
        }
    }
    if raw.sequence.is_empty() {
        violations.push(Violation::EmptySequence);
    }
    let mut sequence = Vec::with_capacity(raw.sequence.len());
    for &id in &raw.sequence {
        match raw.targets.iter().position(|t| t.id == id) {
            Some(i) => sequence.push(i),
            None => violations.push(Violation::UnknownSequenceTarget { id }),
        }
    }
    for (i, t) in raw.targets.iter().enumerate() {
        if !sequence.contains(&i) && !raw.sequence.is_empty() {
            violations.push(Violation::UnvisitedTarget { target: t.id });
        }
    }
    if violations.is_empty() {
        Ok(Scenario {
            targets: raw.targets,
            sequence,
            initial_uncertainty: raw.initial_uncertainty,
        })
    } else {
        Err(ScenarioError { violations })
    }
}

/// Sensing effectiveness `max{0, 1 - |s - x|^2 / r^2}`.
pub fn sensing_value(target: &TargetSpec, s: &Point) -> f64 {
    let d2 = (s - target.position).norm_squared();
    (1.0 - d2 / (target.sensing_radius * target.sensing_radius)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("negative uncertainty {0} passed to the uncertainty dynamics")]
pub struct NegativeUncertainty(pub f64);

/// Hybrid uncertainty rate: zero when `R = 0` and the sensed rate is negative.
pub fn uncertainty_rate(target: &TargetSpec, r_value: f64, s: &Point) -> Result<f64, NegativeUncertainty> {
    if r_value < 0.0 || r_value.is_nan() {
        return Err(NegativeUncertainty(r_value));
    }
    let rate = target.smooth_rate(s);
    if r_value == 0.0 && rate < 0.0 {
        Ok(0.0)
    } else {
        Ok(rate)
    }
}

/// Radius `delta = r sqrt((B - A) / B)` at which the smooth rate vanishes.
pub fn inner_radius(target: &TargetSpec) -> f64 {
    let (a, b, r) = (target.growth_rate, target.sensing_gain, target.sensing_radius);
    r * ((b - a) / b).sqrt()
}

/// Smallest arrival uncertainty for which the radial in / dwell / out policy
/// is optimal for a diametral visit:
/// `-(A - 2B/3) r - delta (A - B) - B delta^3 / (3 r^2)`.
pub fn greedy_threshold(target: &TargetSpec) -> f64 {
    let (a, b, r) = (target.growth_rate, target.sensing_gain, target.sensing_radius);
    let delta = inner_radius(target);
    -(a - 2.0 * b / 3.0) * r - delta * (a - b) - b * delta.powi(3) / (3.0 * r * r)
}

/// The threshold with an `r^3` denominator in the last term. Only kept
/// so the regression tests can show it disagrees with direct integration.
pub fn greedy_threshold_printed_variant(target: &TargetSpec) -> f64 {
    let (a, b, r) = (target.growth_rate, target.sensing_gain, target.sensing_radius);
    let delta = inner_radius(target);
    -(a - 2.0 * b / 3.0) * r - delta * (a - b) - b * delta.powi(3) / (3.0 * r.powi(3))
}
