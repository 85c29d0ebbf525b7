//! Small dense nonlinear programming backend.
//!
//! Problems have the form
//!
//! ```text
//! minimize f(x)  subject to  c(x) = 0,  g(x) <= 0
//! ```
//!
//! and are solved by an augmented Lagrangian method (PHR form for the
//! inequalities). The inner subproblem is minimized with a modified Newton
//! method when the problem supplies a Lagrangian Hessian and with dense BFGS
//! otherwise. Multipliers are returned with the sign convention
//! `grad f + J_c^T lambda + J_g^T mu = 0`, `mu >= 0`.

mod fd;
pub mod linalg;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fd::{check_gradients, fd_sensitivity, GradientCheck};
pub use linalg::DenseMatrix;
use linalg::ProfileCholesky;

/// One sparse constraint-Jacobian row: `(column, value)` pairs.
pub type SparseRow = Vec<(usize, f64)>;

/// Row-wise sparse Jacobian.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseJacobian {
    pub rows: Vec<SparseRow>,
}

impl SparseJacobian {
    pub fn with_rows(m: usize) -> Self {
        SparseJacobian {
            rows: vec![Vec::new(); m],
        }
    }

    /// `out += J^T w`
    pub fn add_transpose_mul(&self, w: &[f64], out: &mut [f64]) {
        for (row, &wi) in self.rows.iter().zip(w) {
            if wi != 0.0 {
                for &(j, v) in row {
                    out[j] += v * wi;
                }
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut d = vec![0.0; n];
                for &(j, v) in row {
                    d[j] += v;
                }
                d
            })
            .collect()
    }
}

/// A smooth nonlinear program. Inequalities use the `g(x) <= 0` convention.
///
/// Derivatives default to central finite differences; problems that can
/// provide them analytically should override the defaults.
pub trait NlpProblem {
    fn dimension(&self) -> usize;
    fn num_equalities(&self) -> usize;
    fn num_inequalities(&self) -> usize;

    fn objective(&self, x: &[f64]) -> f64;
    fn equalities(&self, x: &[f64], out: &mut [f64]);
    fn inequalities(&self, x: &[f64], out: &mut [f64]);

    fn objective_gradient(&self, x: &[f64], out: &mut [f64]) {
        fd::gradient(|z| self.objective(z), x, out);
    }

    fn equality_jacobian(&self, x: &[f64]) -> SparseJacobian {
        fd::jacobian(|z, o| self.equalities(z, o), self.num_equalities(), x)
    }

    fn inequality_jacobian(&self, x: &[f64]) -> SparseJacobian {
        fd::jacobian(|z, o| self.inequalities(z, o), self.num_inequalities(), x)
    }

    /// Adds `sigma * hess f + sum lambda_i hess c_i + sum mu_j hess g_j` to
    /// `h`. Returns `false` when no Hessian is available, in which case the
    /// solver falls back to quasi-Newton updates.
    fn add_lagrangian_hessian(
        &self,
        _x: &[f64],
        _sigma: f64,
        _lambda: &[f64],
        _mu: &[f64],
        _h: &mut DenseMatrix,
    ) -> bool {
        false
    }

    /// Variable order (`order[new] = old`) that keeps the Hessian's envelope
    /// narrow. Identity when `None`.
    fn factorization_order(&self) -> Option<Vec<usize>> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stationarity and complementarity tolerance.
    pub kkt_tolerance: f64,
    /// Constraint violation tolerance.
    pub feasibility_tolerance: f64,
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    pub initial_penalty: f64,
    pub max_penalty: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kkt_tolerance: 1e-6,
            feasibility_tolerance: 1e-8,
            max_outer_iterations: 500,
            max_inner_iterations: 200,
            initial_penalty: 10.0,
            max_penalty: 1e10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Converged,
    MaxIterations,
    Infeasible,
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    /// Outer (multiplier update) iterations.
    pub iterations: usize,
    pub inner_iterations: usize,
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    pub complementarity: f64,
    pub objective: f64,
    pub final_penalty: f64,
}

/// Primal-dual point returned by [`solve_nlp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpSolution {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub report: SolverReport,
}

impl NlpSolution {
    /// `f + lambda^T c + mu^T g`, a second-order accurate estimate of the
    /// optimal value near a KKT point.
    pub fn lagrangian_value<P: NlpProblem + ?Sized>(&self, problem: &P) -> f64 {
        let mut c = vec![0.0; problem.num_equalities()];
        let mut g = vec![0.0; problem.num_inequalities()];
        problem.equalities(&self.x, &mut c);
        problem.inequalities(&self.x, &mut g);
        problem.objective(&self.x)
            + self.lambda.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>()
            + self.mu.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NlpError {
    #[error("initial point has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("solver stopped with status {:?} (kkt residual {:.3e}, violation {:.3e})", .0.report.status, .0.report.kkt_residual, .0.report.constraint_violation)]
    NotConverged(Box<NlpSolution>),
}

/// Optional warm-start multipliers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WarmMultipliers {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

/// KKT quantities at a primal-dual point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub violation: f64,
    pub complementarity: f64,
    pub dual_infeasibility: f64,
}

/// Evaluates stationarity, primal violation and complementarity.
pub fn kkt_residuals<P: NlpProblem + ?Sized>(problem: &P, x: &[f64], lambda: &[f64], mu: &[f64]) -> KktResiduals {
    let n = problem.dimension();
    let mut grad = vec![0.0; n];
    problem.objective_gradient(x, &mut grad);
    problem.equality_jacobian(x).add_transpose_mul(lambda, &mut grad);
    problem.inequality_jacobian(x).add_transpose_mul(mu, &mut grad);
    let mut c = vec![0.0; problem.num_equalities()];
    let mut g = vec![0.0; problem.num_inequalities()];
    problem.equalities(x, &mut c);
    problem.inequalities(x, &mut g);
    let violation = c
        .iter()
        .map(|v| v.abs())
        .chain(g.iter().map(|v| v.max(0.0)))
        .fold(0.0, f64::max);
    let complementarity = mu.iter().zip(&g).map(|(m, gi)| (m * gi).abs()).fold(0.0, f64::max);
    let dual_infeasibility = mu.iter().map(|m| (-m).max(0.0)).fold(0.0, f64::max);
    KktResiduals {
        stationarity: inf_norm(&grad),
        violation,
        complementarity,
        dual_infeasibility,
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Augmented Lagrangian of the problem for fixed multipliers and penalty.
struct Augmented<'a, P: ?Sized> {
    problem: &'a P,
    lambda: &'a [f64],
    mu: &'a [f64],
    rho: f64,
    has_hessian: bool,
    order: Vec<usize>,
}

struct AugmentedEval {
    value: f64,
    grad: Vec<f64>,
    c: Vec<f64>,
    g: Vec<f64>,
}

impl<'a, P: NlpProblem + ?Sized> Augmented<'a, P> {
    fn value(&self, x: &[f64]) -> f64 {
        let p = self.problem;
        let mut c = vec![0.0; p.num_equalities()];
        let mut g = vec![0.0; p.num_inequalities()];
        p.equalities(x, &mut c);
        p.inequalities(x, &mut g);
        self.value_from(p.objective(x), &c, &g)
    }

    fn value_from(&self, f: f64, c: &[f64], g: &[f64]) -> f64 {
        let rho = self.rho;
        let mut v = f;
        for (ci, li) in c.iter().zip(self.lambda) {
            v += li * ci + 0.5 * rho * ci * ci;
        }
        for (gi, mi) in g.iter().zip(self.mu) {
            let s = (mi + rho * gi).max(0.0);
            v += (s * s - mi * mi) / (2.0 * rho);
        }
        v
    }

    fn shifted_multipliers(&self, c: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let rho = self.rho;
        let lam: Vec<f64> = c.iter().zip(self.lambda).map(|(ci, li)| li + rho * ci).collect();
        let mu: Vec<f64> = g.iter().zip(self.mu).map(|(gi, mi)| (mi + rho * gi).max(0.0)).collect();
        (lam, mu)
    }

    fn eval(&self, x: &[f64]) -> (AugmentedEval, SparseJacobian, SparseJacobian) {
        let p = self.problem;
        let n = p.dimension();
        let mut c = vec![0.0; p.num_equalities()];
        let mut g = vec![0.0; p.num_inequalities()];
        p.equalities(x, &mut c);
        p.inequalities(x, &mut g);
        let value = self.value_from(p.objective(x), &c, &g);
        let (lam, mu) = self.shifted_multipliers(&c, &g);
        let mut grad = vec![0.0; n];
        p.objective_gradient(x, &mut grad);
        let je = p.equality_jacobian(x);
        let ji = p.inequality_jacobian(x);
        je.add_transpose_mul(&lam, &mut grad);
        ji.add_transpose_mul(&mu, &mut grad);
        (AugmentedEval { value, grad, c, g }, je, ji)
    }

    /// Hessian of the augmented Lagrangian (generalized for the PHR terms).
    fn hessian(&self, x: &[f64], ev: &AugmentedEval, je: &SparseJacobian, ji: &SparseJacobian, h: &mut DenseMatrix) {
        h.fill_zero();
        let (lam, mu) = self.shifted_multipliers(&ev.c, &ev.g);
        self.problem.add_lagrangian_hessian(x, 1.0, &lam, &mu, h);
        let rho = self.rho;
        for row in &je.rows {
            add_outer(h, row, rho);
        }
        // rows sitting on their bound count as active so the model sees them
        for ((row, &gi), &mi) in ji.rows.iter().zip(&ev.g).zip(self.mu) {
            if mi + rho * gi >= 0.0 {
                add_outer(h, row, rho);
            }
        }
    }
}

fn add_outer(h: &mut DenseMatrix, row: &SparseRow, scale: f64) {
    for &(i, vi) in row {
        for &(j, vj) in row {
            h.add(i, j, scale * vi * vj);
        }
    }
}

enum InnerOutcome {
    Converged,
    IterationLimit,
    LineSearchFailure,
}

/// Minimizes the augmented Lagrangian from `x` until `|grad| <= tol`.
fn minimize_inner<P: NlpProblem + ?Sized>(
    aug: &Augmented<'_, P>,
    x: &mut Vec<f64>,
    tol: f64,
    max_iter: usize,
    iterations: &mut usize,
    inverse_hessian: &mut Option<DenseMatrix>,
) -> InnerOutcome {
    let n = x.len();
    let mut h = DenseMatrix::zeros(if aug.has_hessian { n } else { 0 });
    let (mut ev, mut je, mut ji) = aug.eval(x);
    // Levenberg damping, raised after short steps and relaxed after full ones
    let mut damping = 0.0_f64;
    for _ in 0..max_iter {
        if inf_norm(&ev.grad) <= tol {
            return InnerOutcome::Converged;
        }
        *iterations += 1;
        let direction = if aug.has_hessian {
            aug.hessian(x, &ev, &je, &ji, &mut h);
            newton_direction(&h, &ev.grad, &aug.order, damping)
        } else {
            let hinv = inverse_hessian.get_or_insert_with(|| DenseMatrix::identity(n));
            let mut d = vec![0.0; n];
            hinv.mul_vec(&ev.grad, &mut d);
            d.iter_mut().for_each(|v| *v = -*v);
            if dot(&d, &ev.grad) >= 0.0 {
                *hinv = DenseMatrix::identity(n);
                d = ev.grad.iter().map(|v| -v).collect();
            }
            d
        };
        let slope = dot(&direction, &ev.grad);
        if !(slope < 0.0) {
            return InnerOutcome::LineSearchFailure;
        }
        // at the roundoff floor values no longer separate; judge by the gradient
        if aug.has_hessian && -slope <= 1e-13 * (1.0 + ev.value.abs()) {
            let trial: Vec<f64> = x.iter().zip(&direction).map(|(a, d)| a + d).collect();
            let (ev_new, je_new, ji_new) = aug.eval(&trial);
            if inf_norm(&ev_new.grad) < inf_norm(&ev.grad) {
                *x = trial;
                ev = ev_new;
                je = je_new;
                ji = ji_new;
                continue;
            }
            return if inf_norm(&ev.grad) <= 100.0 * tol {
                InnerOutcome::Converged
            } else {
                InnerOutcome::LineSearchFailure
            };
        }
        // Armijo backtracking
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&direction).map(|(a, d)| a + step * d).collect();
            let v = aug.value(&trial);
            if v.is_finite() && v <= ev.value + 1e-4 * step * slope {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        log::trace!("  inner: |g| {:.3e} step {step:.3e} damping {damping:.3e}", inf_norm(&ev.grad));
        if aug.has_hessian {
            if step < 0.1 {
                damping = (damping * 10.0).max(1e-4);
            } else if step == 1.0 {
                damping = if damping < 1e-8 { 0.0 } else { damping * 0.1 };
            }
        }
        let Some(trial) = accepted else {
            // no decrease representable in floating point; treat as stationary
            // when the gradient is already close to tolerance
            if inf_norm(&ev.grad) <= 100.0 * tol {
                return InnerOutcome::Converged;
            }
            return InnerOutcome::LineSearchFailure;
        };
        let (ev_new, je_new, ji_new) = aug.eval(&trial);
        if !aug.has_hessian {
            let s: Vec<f64> = trial.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = ev_new.grad.iter().zip(&ev.grad).map(|(a, b)| a - b).collect();
            if let Some(hinv) = inverse_hessian.as_mut() {
                bfgs_update(hinv, &s, &y);
            }
        }
        *x = trial;
        ev = ev_new;
        je = je_new;
        ji = ji_new;
    }
    if inf_norm(&ev.grad) <= tol {
        InnerOutcome::Converged
    } else {
        InnerOutcome::IterationLimit
    }
}

/// Newton direction for `H + shift I`, starting from the damping `damping`
/// and increasing the shift until the factorization succeeds.
fn newton_direction(h: &DenseMatrix, grad: &[f64], order: &[usize], damping: f64) -> Vec<f64> {
    let scale = h.max_abs_diagonal().max(1.0);
    let mut shift = damping;
    for _ in 0..40 {
        if let Ok(f) = ProfileCholesky::factor(h, shift, order) {
            return f.solve(grad).into_iter().map(|v| -v).collect();
        }
        shift = if shift == 0.0 { 1e-8 * scale } else { shift * 10.0 };
    }
    grad.iter().map(|v| -v / scale).collect()
}

fn bfgs_update(hinv: &mut DenseMatrix, s: &[f64], y: &[f64]) {
    let sy = dot(s, y);
    if sy <= 1e-12 * dot(s, s).sqrt() * dot(y, y).sqrt() {
        return;
    }
    let n = s.len();
    let rho = 1.0 / sy;
    let mut hy = vec![0.0; n];
    hinv.mul_vec(y, &mut hy);
    let yhy = dot(y, &hy);
    // H+ = H - rho (s hy^T + hy s^T) + (rho^2 yHy + rho) s s^T
    let c = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            let v = -rho * (s[i] * hy[j] + hy[i] * s[j]) + c * s[i] * s[j];
            hinv.add(i, j, v);
        }
    }
}

/// Solves the NLP from `x0`, optionally warm-starting the multipliers.
pub fn solve_nlp<P: NlpProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    warm: Option<&WarmMultipliers>,
    options: &SolverOptions,
) -> Result<NlpSolution, NlpError> {
    let n = problem.dimension();
    if x0.len() != n {
        return Err(NlpError::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    let me = problem.num_equalities();
    let mi = problem.num_inequalities();
    let mut lambda = vec![0.0; me];
    let mut mu = vec![0.0; mi];
    if let Some(w) = warm {
        if w.lambda.len() == me && w.mu.len() == mi {
            lambda.clone_from(&w.lambda);
            mu = w.mu.iter().map(|m| m.max(0.0)).collect();
        }
    }
    let has_hessian = {
        let mut probe = DenseMatrix::zeros(n);
        problem.add_lagrangian_hessian(x0, 1.0, &lambda, &mu, &mut probe)
    };
    let order = problem
        .factorization_order()
        .filter(|o| o.len() == n)
        .unwrap_or_else(|| (0..n).collect());

    let mut x = x0.to_vec();
    let mut rho = options.initial_penalty;
    let mut inner_tol = (options.kkt_tolerance * 1e4).min(1e-2).max(options.kkt_tolerance);
    let mut previous_measure = f64::INFINITY;
    let mut inner_iterations = 0;
    let mut stalls = 0;
    let mut inverse_hessian: Option<DenseMatrix> = None;
    let mut status = SolverStatus::MaxIterations;
    let mut outer = 0;
    let mut c = vec![0.0; me];
    let mut g = vec![0.0; mi];

    while outer < options.max_outer_iterations {
        outer += 1;
        let aug = Augmented {
            problem,
            lambda: &lambda,
            mu: &mu,
            rho,
            has_hessian,
            order: order.clone(),
        };
        let outcome = minimize_inner(
            &aug,
            &mut x,
            inner_tol,
            options.max_inner_iterations,
            &mut inner_iterations,
            &mut inverse_hessian,
        );
        log::trace!("outer {outer}: rho {rho:.1e}, inner total {inner_iterations}, tol {inner_tol:.1e}");
        problem.equalities(&x, &mut c);
        problem.inequalities(&x, &mut g);
        // violation/complementarity measure of the current iterate
        let measure = c
            .iter()
            .map(|v| v.abs())
            .chain(g.iter().zip(&mu).map(|(gi, mi)| gi.max(-mi / rho).abs()))
            .fold(0.0, f64::max);
        for (l, ci) in lambda.iter_mut().zip(&c) {
            *l += rho * ci;
        }
        for (m, gi) in mu.iter_mut().zip(&g) {
            *m = (*m + rho * gi).max(0.0);
        }
        let kkt = kkt_residuals(problem, &x, &lambda, &mu);
        let done = kkt.stationarity <= options.kkt_tolerance
            && kkt.violation <= options.feasibility_tolerance
            && kkt.complementarity <= options.kkt_tolerance;
        if done {
            status = SolverStatus::Converged;
            break;
        }
        if matches!(outcome, InnerOutcome::LineSearchFailure) && rho >= options.max_penalty {
            status = SolverStatus::LineSearchFailure;
            break;
        }
        if measure > 0.25 * previous_measure && measure > 0.1 * options.feasibility_tolerance {
            if rho >= options.max_penalty {
                stalls += 1;
                if stalls >= 5 && kkt.violation > options.feasibility_tolerance {
                    status = SolverStatus::Infeasible;
                    break;
                }
            }
            rho = (rho * 10.0).min(options.max_penalty);
        }
        previous_measure = measure;
        inner_tol = (inner_tol * 0.1).max(0.5 * options.kkt_tolerance);
        if matches!(outcome, InnerOutcome::IterationLimit | InnerOutcome::LineSearchFailure) {
            inverse_hessian = None;
        }
    }

    let kkt = kkt_residuals(problem, &x, &lambda, &mu);
    let report = SolverReport {
        status,
        iterations: outer,
        inner_iterations,
        kkt_residual: kkt.stationarity.max(kkt.complementarity),
        constraint_violation: kkt.violation,
        complementarity: kkt.complementarity,
        objective: problem.objective(&x),
        final_penalty: rho,
    };
    let solution = NlpSolution { x, lambda, mu, report };
    if status == SolverStatus::Converged {
        Ok(solution)
    } else {
        Err(NlpError::NotConverged(Box::new(solution)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closure-backed problem for small tests (finite-difference derivatives).
    struct Small<F, C, G> {
        n: usize,
        me: usize,
        mi: usize,
        f: F,
        c: C,
        g: G,
    }

    impl<F, C, G> NlpProblem for Small<F, C, G>
    where
        F: Fn(&[f64]) -> f64,
        C: Fn(&[f64], &mut [f64]),
        G: Fn(&[f64], &mut [f64]),
    {
        fn dimension(&self) -> usize {
            self.n
        }
        fn num_equalities(&self) -> usize {
            self.me
        }
        fn num_inequalities(&self) -> usize {
            self.mi
        }
        fn objective(&self, x: &[f64]) -> f64 {
            (self.f)(x)
        }
        fn equalities(&self, x: &[f64], out: &mut [f64]) {
            (self.c)(x, out)
        }
        fn inequalities(&self, x: &[f64], out: &mut [f64]) {
            (self.g)(x, out)
        }
    }

    #[test]
    fn bound_constrained_quadratic() {
        // min x^2 s.t. x >= 1
        let p = Small {
            n: 1,
            me: 0,
            mi: 1,
            f: |x: &[f64]| x[0] * x[0],
            c: |_: &[f64], _: &mut [f64]| {},
            g: |x: &[f64], o: &mut [f64]| o[0] = 1.0 - x[0],
        };
        let s = solve_nlp(&p, &[5.0], None, &SolverOptions::default()).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-6, "{:?}", s.x);
        assert!((s.mu[0] - 2.0).abs() < 1e-4, "{:?}", s.mu);
    }

    #[test]
    fn circle_constrained_linear() {
        // min x + y s.t. x^2 + y^2 = 1
        let p = Small {
            n: 2,
            me: 1,
            mi: 0,
            f: |x: &[f64]| x[0] + x[1],
            c: |x: &[f64], o: &mut [f64]| o[0] = x[0] * x[0] + x[1] * x[1] - 1.0,
            g: |_: &[f64], _: &mut [f64]| {},
        };
        let s = solve_nlp(&p, &[1.0, 0.0], None, &SolverOptions::default()).unwrap();
        let h = -std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.x[0] - h).abs() < 1e-6 && (s.x[1] - h).abs() < 1e-6, "{:?}", s.x);
        assert!((s.lambda[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-5, "{:?}", s.lambda);
    }

    #[test]
    fn rosenbrock_unconstrained() {
        let p = Small {
            n: 2,
            me: 0,
            mi: 0,
            f: |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            c: |_: &[f64], _: &mut [f64]| {},
            g: |_: &[f64], _: &mut [f64]| {},
        };
        let opts = SolverOptions {
            kkt_tolerance: 1e-9,
            ..SolverOptions::default()
        };
        let s = solve_nlp(&p, &[-1.2, 1.0], None, &opts).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-6 && (s.x[1] - 1.0).abs() < 1e-6, "{:?}", s.x);
    }

    #[test]
    fn wrong_dimension_is_reported() {
        let p = Small {
            n: 2,
            me: 0,
            mi: 0,
            f: |x: &[f64]| x[0] * x[0] + x[1] * x[1],
            c: |_: &[f64], _: &mut [f64]| {},
            g: |_: &[f64], _: &mut [f64]| {},
        };
        assert!(matches!(
            solve_nlp(&p, &[1.0], None, &SolverOptions::default()),
            Err(NlpError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn iteration_limit_is_reported_not_silent() {
        let p = Small {
            n: 2,
            me: 1,
            mi: 0,
            f: |x: &[f64]| x[0] + x[1],
            c: |x: &[f64], o: &mut [f64]| o[0] = x[0] * x[0] + x[1] * x[1] - 1.0,
            g: |_: &[f64], _: &mut [f64]| {},
        };
        let opts = SolverOptions {
            max_outer_iterations: 1,
            max_inner_iterations: 2,
            ..SolverOptions::default()
        };
        match solve_nlp(&p, &[3.0, 0.5], None, &opts) {
            Err(NlpError::NotConverged(s)) => assert_eq!(s.report.status, SolverStatus::MaxIterations),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_iterates() {
        let p = Small {
            n: 2,
            me: 1,
            mi: 1,
            f: |x: &[f64]| (x[0] - 2.0).powi(2) + x[0] * x[1] + x[1].powi(4),
            c: |x: &[f64], o: &mut [f64]| o[0] = x[0] + 2.0 * x[1] - 1.0,
            g: |x: &[f64], o: &mut [f64]| o[0] = x[1] - 0.1,
        };
        let a = solve_nlp(&p, &[0.3, 0.3], None, &SolverOptions::default()).unwrap();
        let b = solve_nlp(&p, &[0.3, 0.3], None, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
