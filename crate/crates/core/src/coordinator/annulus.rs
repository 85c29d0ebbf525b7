//! Uncertainty picked up while leaving a sensing disk through the annulus
//! between the inner circle and the sensing circle.

use crate::model::{Point, TargetSpec};

fn cross(a: &Point, b: &Point) -> f64 {
    a.x * b.y - a.y * b.x
}

fn tangent(angle: f64) -> Point {
    Point::new(-angle.sin(), angle.cos())
}

/// Pieces of the clamped integral along the chord from the inner circle
/// (angle `psi0`) to the sensing circle (angle `psi`).
struct Chord {
    length: f64,
    k: f64,
    start: f64,
    a: f64,
    b: f64,
    r2: f64,
    delta2: f64,
}

impl Chord {
    fn new(target: &TargetSpec, psi0: f64, psi: f64) -> Self {
        let r = target.sensing_radius;
        let delta = target.inner_radius();
        let c = (psi - psi0).cos();
        let length = (r * r + delta * delta - 2.0 * r * delta * c).max(0.0).sqrt();
        let k = r * delta * c - delta * delta;
        // the chord dips inside the inner disk until -2k/length
        let start = (-2.0 * k / length).max(0.0);
        Chord {
            length,
            k,
            start,
            a: target.growth_rate,
            b: target.sensing_gain,
            r2: r * r,
            delta2: delta * delta,
        }
    }

    /// Unclamped integral of the rate from the chord start to `t`.
    fn integral(&self, t: f64) -> f64 {
        t * (self.a - self.b) + self.b / self.r2 * (self.delta2 * t + self.k * t * t / self.length + t.powi(3) / 3.0)
    }

    fn value(&self) -> f64 {
        self.integral(self.length) - self.integral(self.start)
    }

    /// Derivative of the value in `psi - psi0`.
    fn derivative(&self, theta: f64, target: &TargetSpec) -> f64 {
        let r = target.sensing_radius;
        let delta = target.inner_radius();
        let d_len = r * delta * theta.sin() / self.length;
        let d_k = -r * delta * theta.sin();
        let part = |t: f64, with_rate: bool| {
            let rate = self.a - self.b + self.b / self.r2 * (self.delta2 + 2.0 * self.k * t / self.length + t * t);
            let d_k_term = self.b / self.r2 * t * t / self.length;
            let d_len_term = -self.b / self.r2 * self.k * t * t / (self.length * self.length);
            let own = if with_rate { rate * d_len } else { 0.0 };
            own + d_k_term * d_k + d_len_term * d_len
        };
        // the lower limit sits where the rate vanishes, so its own motion drops out
        part(self.length, true) - part(self.start, false)
    }
}

/// Uncertainty accumulated on the straight chord from the inner-circle point
/// at angle `psi0` to the sensing-circle point at angle `psi`, with the clamp
/// at zero applied while the chord is inside the inner disk.
pub fn epsilon_annulus(target: &TargetSpec, psi0: f64, psi: f64) -> f64 {
    Chord::new(target, psi0, psi).value()
}

/// Closed form without the constant `B δ² Δ / r²`
/// term. Kept for regression tests; it is negative on radial exits.
pub fn epsilon_annulus_printed_variant(target: &TargetSpec, psi0: f64, psi: f64) -> f64 {
    let r = target.sensing_radius;
    let delta = target.inner_radius();
    let (a, b) = (target.growth_rate, target.sensing_gain);
    let c = (psi - psi0).cos();
    let len = (r * r + delta * delta - 2.0 * r * delta * c).sqrt();
    len * (a - b) + len * b / (r * r) * (r * delta * c - delta * delta) + len * b / (3.0 * r * r) * (r * r + delta * delta - 2.0 * r * delta * c)
}

/// `(dε/dψ⁰, dε/dψ)` of [`epsilon_annulus`].
pub fn epsilon_partials(target: &TargetSpec, psi0: f64, psi: f64) -> (f64, f64) {
    let theta = psi - psi0;
    let d = Chord::new(target, psi0, psi).derivative(theta, target);
    (-d, d)
}

/// Straight leg from the inner-circle departure point of `target` toward
/// `next`, with its crossing of the sensing circle and derivatives in the
/// departure angle `psi` and the angle of the next entrance point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusExit {
    /// Distance from the departure point to the sensing circle crossing.
    pub length: f64,
    /// Polar angle of the crossing.
    pub outer_angle: f64,
    pub epsilon: f64,
    pub d_length: (f64, f64),
    pub d_epsilon: (f64, f64),
}

/// `next` is the next entrance point and `next_tangent` its derivative in
/// its own angle.
pub fn annulus_exit(target: &TargetSpec, psi: f64, next: Point, next_tangent: Point) -> Option<AnnulusExit> {
    let r = target.sensing_radius;
    let delta = target.inner_radius();
    let a = delta * Point::new(psi.cos(), psi.sin());
    let b = next - target.position;
    let chord = b - a;
    let dist = chord.norm();
    if dist <= 0.0 {
        return None;
    }
    let d = chord / dist;
    let ad = a.dot(&d);
    let length = -ad + (ad * ad - a.norm_squared() + r * r).max(0.0).sqrt();
    let q = a + length * d;
    let outer_angle = q.y.atan2(q.x);
    let qd = q.dot(&d);
    // derivatives of the crossing for a perturbation (da, db)
    let diff = |da: Point, db: Point| {
        let dd = ((db - da) - d * d.dot(&(db - da))) / dist;
        let dl = -q.dot(&(da + length * dd)) / qd;
        let dq = da + length * dd + dl * d;
        (dl, cross(&q, &dq) / (r * r))
    };
    let (dl_psi, dang_psi) = diff(delta * tangent(psi), Point::zeros());
    let (dl_next, dang_next) = diff(Point::zeros(), next_tangent);
    let epsilon = epsilon_annulus(target, psi, outer_angle);
    let (e0, e1) = epsilon_partials(target, psi, outer_angle);
    Some(AnnulusExit {
        length,
        outer_angle,
        epsilon,
        d_length: (dl_psi, dl_next),
        d_epsilon: (e0 + e1 * dang_psi, e1 * dang_next),
    })
}
