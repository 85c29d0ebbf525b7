//! Central finite differences.

use super::{NlpProblem, SparseJacobian};

fn step_for(x: f64) -> f64 {
    6e-6 * x.abs().max(1.0)
}

pub(crate) fn gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], out: &mut [f64]) {
    let mut z = x.to_vec();
    for i in 0..x.len() {
        let h = step_for(x[i]);
        z[i] = x[i] + h;
        let fp = f(&z);
        z[i] = x[i] - h;
        let fm = f(&z);
        z[i] = x[i];
        out[i] = (fp - fm) / (2.0 * h);
    }
}

pub(crate) fn jacobian<F: Fn(&[f64], &mut [f64])>(f: F, m: usize, x: &[f64]) -> SparseJacobian {
    let mut jac = SparseJacobian::with_rows(m);
    let mut z = x.to_vec();
    let mut fp = vec![0.0; m];
    let mut fm = vec![0.0; m];
    for i in 0..x.len() {
        let h = step_for(x[i]);
        z[i] = x[i] + h;
        f(&z, &mut fp);
        z[i] = x[i] - h;
        f(&z, &mut fm);
        z[i] = x[i];
        for r in 0..m {
            let d = (fp[r] - fm[r]) / (2.0 * h);
            if d != 0.0 {
                jac.rows[r].push((i, d));
            }
        }
    }
    jac
}

/// Central-difference derivative of a scalar map `p -> value(p)`.
///
/// Returns `None` if either evaluation fails.
pub fn fd_sensitivity<F>(value: F, p: f64, h: f64) -> Option<f64>
where
    F: Fn(f64) -> Option<f64>,
{
    let fp = value(p + h)?;
    let fm = value(p - h)?;
    Some((fp - fm) / (2.0 * h))
}

/// Largest discrepancy between analytic and finite-difference derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub objective: f64,
    pub equalities: f64,
    pub inequalities: f64,
}

impl GradientCheck {
    pub fn max(&self) -> f64 {
        self.objective.max(self.equalities).max(self.inequalities)
    }
}

/// Compares a problem's analytic derivatives with central differences at `x`.
/// Errors are relative to `max(1, |entry|)`.
pub fn check_gradients<P: NlpProblem + ?Sized>(problem: &P, x: &[f64]) -> GradientCheck {
    let n = problem.dimension();
    let mut ga = vec![0.0; n];
    let mut gf = vec![0.0; n];
    problem.objective_gradient(x, &mut ga);
    gradient(|z| problem.objective(z), x, &mut gf);
    let objective = ga
        .iter()
        .zip(&gf)
        .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max);
    let compare = |analytic: SparseJacobian, numeric: SparseJacobian| {
        let a = analytic.to_dense(n);
        let b = numeric.to_dense(n);
        a.iter()
            .zip(&b)
            .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(u, v)| (u - v).abs() / u.abs().max(1.0)))
            .fold(0.0, f64::max)
    };
    let equalities = compare(
        problem.equality_jacobian(x),
        jacobian(|z, o| problem.equalities(z, o), problem.num_equalities(), x),
    );
    let inequalities = compare(
        problem.inequality_jacobian(x),
        jacobian(|z, o| problem.inequalities(z, o), problem.num_inequalities(), x),
    );
    GradientCheck {
        objective,
        equalities,
        inequalities,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sensitivity_of_square() {
        let d = fd_sensitivity(|p| Some(p * p), 3.0, 1e-4).unwrap();
        assert!((d - 6.0).abs() < 1e-8);
    }

    #[test]
    fn sensitivity_propagates_failure() {
        assert!(fd_sensitivity(|p| (p < 3.0).then_some(p), 3.0, 1e-4).is_none());
    }
}
