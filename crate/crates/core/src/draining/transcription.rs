//! Multiple-shooting transcription of the relaxed draining problem.
//!
//! Decision vector, for `N` nodes:
//!
//! ```text
//! [s_0, R_0, s_1, R_1, ..., s_N, R_N | u_0, ..., u_{N-1} | t0 | s0]
//! ```
//!
//! with grid step `h = t0 / N`.

use crate::model::Point;
use crate::nlp::{DenseMatrix, NlpProblem, SparseJacobian};

use super::DrainingProblem;

/// Lower bound on the inner-exit time.
pub const MIN_EXIT_TIME: f64 = 1e-3;

/// How the inner-exit point relates to the departure point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitMode {
    /// `s0` free on the inner circle; objective `t0 + |s_psi - s0|`.
    Free,
    /// `s0 = s_psi` (departure point on the inner circle); objective `t0`.
    Pinned,
}

/// The transcribed NLP for one draining problem.
#[derive(Debug, Clone)]
pub struct DrainingNlp {
    nodes: usize,
    mode: ExitMode,
    center: Point,
    a: f64,
    b: f64,
    r2: f64,
    delta2: f64,
    entrance: Point,
    departure: Point,
    arrival: f64,
}

/// Row offsets of the equality constraints.
#[derive(Debug, Clone, Copy)]
pub struct EqualityRows {
    pub position_defects: usize,
    pub uncertainty_defects: usize,
    pub entrance: usize,
    pub arrival: usize,
    pub terminal: usize,
    /// Circle row (free) or first of two pin rows (pinned).
    pub exit: usize,
}

impl DrainingNlp {
    pub fn new(problem: &DrainingProblem, mode: ExitMode) -> Self {
        let t = &problem.target;
        let r = t.sensing_radius;
        let delta = t.inner_radius();
        DrainingNlp {
            nodes: problem.nodes,
            mode,
            center: t.position,
            a: t.growth_rate,
            b: t.sensing_gain,
            r2: r * r,
            delta2: delta * delta,
            entrance: problem.entrance,
            departure: problem.departure,
            arrival: problem.arrival_uncertainty,
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn mode(&self) -> ExitMode {
        self.mode
    }

    pub fn pos(&self, j: usize) -> usize {
        3 * j
    }

    pub fn unc(&self, j: usize) -> usize {
        3 * j + 2
    }

    pub fn ctrl(&self, j: usize) -> usize {
        3 * (self.nodes + 1) + 2 * j
    }

    pub fn time(&self) -> usize {
        5 * self.nodes + 3
    }

    pub fn exit(&self) -> usize {
        5 * self.nodes + 4
    }

    pub fn rows(&self) -> EqualityRows {
        let n = self.nodes;
        EqualityRows {
            position_defects: 0,
            uncertainty_defects: 2 * n,
            entrance: 3 * n,
            arrival: 3 * n + 2,
            terminal: 3 * n + 3,
            exit: 3 * n + 5,
        }
    }

    fn point(x: &[f64], i: usize) -> Point {
        Point::new(x[i], x[i + 1])
    }

    /// Smooth rate with the interior sensing quadratic.
    fn rate(&self, s: &Point) -> f64 {
        self.a - self.b + self.b * (s - self.center).norm_squared() / self.r2
    }
}

impl NlpProblem for DrainingNlp {
    fn dimension(&self) -> usize {
        5 * self.nodes + 6
    }

    fn num_equalities(&self) -> usize {
        match self.mode {
            ExitMode::Free => 3 * self.nodes + 6,
            ExitMode::Pinned => 3 * self.nodes + 7,
        }
    }

    fn num_inequalities(&self) -> usize {
        self.nodes + 2
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let t = x[self.time()];
        match self.mode {
            ExitMode::Free => t + (self.departure - Self::point(x, self.exit())).norm(),
            ExitMode::Pinned => t,
        }
    }

    fn equalities(&self, x: &[f64], out: &mut [f64]) {
        let n = self.nodes;
        let h = x[self.time()] / n as f64;
        let rows = self.rows();
        for j in 0..n {
            let s = Self::point(x, self.pos(j));
            let s1 = Self::point(x, self.pos(j + 1));
            let u = Self::point(x, self.ctrl(j));
            let d = s1 - s - h * u;
            out[2 * j] = d.x;
            out[2 * j + 1] = d.y;
            out[rows.uncertainty_defects + j] = x[self.unc(j + 1)] - x[self.unc(j)] - h * self.rate(&s);
        }
        let s0 = Self::point(x, self.pos(0));
        out[rows.entrance] = s0.x - self.entrance.x;
        out[rows.entrance + 1] = s0.y - self.entrance.y;
        out[rows.arrival] = x[self.unc(0)] - self.arrival;
        let exit = Self::point(x, self.exit());
        let sn = Self::point(x, self.pos(n));
        out[rows.terminal] = sn.x - exit.x;
        out[rows.terminal + 1] = sn.y - exit.y;
        match self.mode {
            ExitMode::Free => out[rows.exit] = (exit - self.center).norm_squared() - self.delta2,
            ExitMode::Pinned => {
                out[rows.exit] = exit.x - self.departure.x;
                out[rows.exit + 1] = exit.y - self.departure.y;
            }
        }
    }

    fn inequalities(&self, x: &[f64], out: &mut [f64]) {
        let n = self.nodes;
        for j in 0..n {
            out[j] = Self::point(x, self.ctrl(j)).norm_squared() - 1.0;
        }
        out[n] = x[self.unc(n)];
        out[n + 1] = MIN_EXIT_TIME - x[self.time()];
    }

    fn objective_gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[self.time()] = 1.0;
        if self.mode == ExitMode::Free {
            let e = Self::point(x, self.exit()) - self.departure;
            let len = e.norm();
            if len > 1e-14 {
                out[self.exit()] = e.x / len;
                out[self.exit() + 1] = e.y / len;
            }
        }
    }

    fn equality_jacobian(&self, x: &[f64]) -> SparseJacobian {
        let n = self.nodes;
        let nf = n as f64;
        let t = x[self.time()];
        let h = t / nf;
        let rows = self.rows();
        let mut jac = SparseJacobian::with_rows(self.num_equalities());
        for j in 0..n {
            for c in 0..2 {
                let u = x[self.ctrl(j) + c];
                jac.rows[2 * j + c] = vec![
                    (self.pos(j + 1) + c, 1.0),
                    (self.pos(j) + c, -1.0),
                    (self.ctrl(j) + c, -h),
                    (self.time(), -u / nf),
                ];
            }
            let s = Self::point(x, self.pos(j));
            let g = 2.0 * self.b / self.r2 * (s - self.center);
            jac.rows[rows.uncertainty_defects + j] = vec![
                (self.unc(j + 1), 1.0),
                (self.unc(j), -1.0),
                (self.pos(j), -h * g.x),
                (self.pos(j) + 1, -h * g.y),
                (self.time(), -self.rate(&s) / nf),
            ];
        }
        jac.rows[rows.entrance] = vec![(self.pos(0), 1.0)];
        jac.rows[rows.entrance + 1] = vec![(self.pos(0) + 1, 1.0)];
        jac.rows[rows.arrival] = vec![(self.unc(0), 1.0)];
        jac.rows[rows.terminal] = vec![(self.pos(n), 1.0), (self.exit(), -1.0)];
        jac.rows[rows.terminal + 1] = vec![(self.pos(n) + 1, 1.0), (self.exit() + 1, -1.0)];
        match self.mode {
            ExitMode::Free => {
                let e = Self::point(x, self.exit()) - self.center;
                jac.rows[rows.exit] = vec![(self.exit(), 2.0 * e.x), (self.exit() + 1, 2.0 * e.y)];
            }
            ExitMode::Pinned => {
                jac.rows[rows.exit] = vec![(self.exit(), 1.0)];
                jac.rows[rows.exit + 1] = vec![(self.exit() + 1, 1.0)];
            }
        }
        jac
    }

    fn inequality_jacobian(&self, x: &[f64]) -> SparseJacobian {
        let n = self.nodes;
        let mut jac = SparseJacobian::with_rows(n + 2);
        for j in 0..n {
            let k = self.ctrl(j);
            jac.rows[j] = vec![(k, 2.0 * x[k]), (k + 1, 2.0 * x[k + 1])];
        }
        jac.rows[n] = vec![(self.unc(n), 1.0)];
        jac.rows[n + 1] = vec![(self.time(), -1.0)];
        jac
    }

    fn add_lagrangian_hessian(&self, x: &[f64], sigma: f64, lambda: &[f64], mu: &[f64], h: &mut DenseMatrix) -> bool {
        let n = self.nodes;
        let nf = n as f64;
        let t = x[self.time()];
        let it = self.time();
        let rows = self.rows();
        if self.mode == ExitMode::Free && sigma != 0.0 {
            let e = Self::point(x, self.exit()) - self.departure;
            let len = e.norm();
            if len > 1e-14 {
                let d = e / len;
                let k = self.exit();
                h.add(k, k, sigma * (1.0 - d.x * d.x) / len);
                h.add(k + 1, k + 1, sigma * (1.0 - d.y * d.y) / len);
                h.add_sym(k, k + 1, -sigma * d.x * d.y / len);
            }
        }
        let curv = 2.0 * self.b / self.r2;
        for j in 0..n {
            for c in 0..2 {
                h.add_sym(it, self.ctrl(j) + c, -lambda[2 * j + c] / nf);
            }
            let l = lambda[rows.uncertainty_defects + j];
            if l != 0.0 {
                let s = Self::point(x, self.pos(j)) - self.center;
                let p = self.pos(j);
                h.add(p, p, -l * t / nf * curv);
                h.add(p + 1, p + 1, -l * t / nf * curv);
                h.add_sym(it, p, -l / nf * curv * s.x);
                h.add_sym(it, p + 1, -l / nf * curv * s.y);
            }
            let k = self.ctrl(j);
            h.add(k, k, 2.0 * mu[j]);
            h.add(k + 1, k + 1, 2.0 * mu[j]);
        }
        if self.mode == ExitMode::Free {
            let k = self.exit();
            h.add(k, k, 2.0 * lambda[rows.exit]);
            h.add(k + 1, k + 1, 2.0 * lambda[rows.exit]);
        }
        true
    }

    fn factorization_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes;
        let mut order = Vec::with_capacity(self.dimension());
        for j in 0..n {
            order.extend([self.pos(j), self.pos(j) + 1, self.unc(j), self.ctrl(j), self.ctrl(j) + 1]);
        }
        order.extend([self.pos(n), self.pos(n) + 1, self.unc(n), self.exit(), self.exit() + 1, self.time()]);
        Some(order)
    }
}
