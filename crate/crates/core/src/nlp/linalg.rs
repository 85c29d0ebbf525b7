//! Dense symmetric storage and a profile (skyline) Cholesky factorization.
//!
//! Matrices are stored densely, but the factorization only touches entries
//! inside each row's envelope, so a banded matrix with a few dense border
//! rows factors in `O(n b^2)` once it is permuted into a good order.

/// Square matrix, row-major. Callers keep it symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    /// Adds `v` at `(i, j)` and `(j, i)` (once on the diagonal).
    #[inline]
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Lower Cholesky factor restricted to the envelope of a permuted matrix.
#[derive(Debug, Clone)]
pub struct ProfileCholesky {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    first: Vec<usize>,
    /// Start of each row's envelope in `l`.
    offset: Vec<usize>,
    l: Vec<f64>,
}

/// The shifted matrix was not numerically positive definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite;

impl ProfileCholesky {
    /// Factors `P (A + shift I) P^T` where `perm[new] = old`.
    pub fn factor(a: &DenseMatrix, shift: f64, perm: &[usize]) -> Result<Self, NotPositiveDefinite> {
        let n = a.dim();
        debug_assert_eq!(perm.len(), n);
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut first = vec![0; n];
        let mut offset = vec![0; n + 1];
        for (i, &pi) in perm.iter().enumerate() {
            let row = &a.data[pi * n..(pi + 1) * n];
            let mut f = i;
            for (col, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    f = f.min(inverse[col]);
                }
            }
            first[i] = f;
            offset[i + 1] = offset[i] + (i - f + 1);
        }
        let mut l = vec![0.0; offset[n]];
        for (i, &pi) in perm.iter().enumerate() {
            let base = offset[i] - first[i];
            for j in first[i]..=i {
                l[base + j] = a.get(pi, perm[j]);
            }
            l[base + i] += shift;
        }
        let scale = (0..n).map(|i| l[offset[i] - first[i] + i].abs()).fold(0.0, f64::max).max(1.0);
        let tiny = 1e-14 * scale;
        for i in 0..n {
            let fi = first[i];
            let bi = offset[i] - fi;
            for j in fi..=i {
                let fj = first[j];
                let bj = offset[j] - fj;
                let k0 = fi.max(fj);
                let mut s = l[bi + j];
                for k in k0..j {
                    s -= l[bi + k] * l[bj + k];
                }
                if j < i {
                    l[bi + j] = s / l[bj + j];
                } else {
                    if !(s > tiny) {
                        return Err(NotPositiveDefinite);
                    }
                    l[bi + i] = s.sqrt();
                }
            }
        }
        offset.truncate(n);
        Ok(ProfileCholesky {
            n,
            perm: perm.to_vec(),
            first,
            offset,
            l,
        })
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[self.offset[i] - self.first[i] + j]
    }

    /// Solves `(A + shift I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in self.first[i]..i {
                s -= self.at(i, k) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            let yi = y[i] / self.at(i, i);
            y[i] = yi;
            for k in self.first[i]..i {
                y[k] -= self.at(i, k) * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}

/// Solves a small dense system `A x = b` by partial-pivot Gaussian elimination.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                for k in col..n {
                    m[row][k] -= factor * m[col][k];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (rhs[i] - s) / m[i][i];
    }
    Some(x)
}
