//! Dense symmetric positive-definite solves for the GP posterior.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    lower: Matrix<T>,
    jitter: T,
}

impl<T: Scalar> Cholesky<T> {
    /// Plain factorization; `None` if a pivot is not strictly positive.
    pub fn factor(a: &Matrix<T>) -> Option<Self> {
        let n = a.dim();
        let mut l = Matrix::zeros(n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                let v = l.get(j, k);
                d = d - v * v;
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let d = d.sqrt();
            l.set(j, j, d);
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s = s - l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / d);
            }
        }
        Some(Self { lower: l, jitter: T::zero() })
    }

    /// Factorization with escalating diagonal jitter: `1e-10·trace/n`,
    /// growing ×10 up to `1e-4·trace/n`.
    pub fn factor_with_jitter(a: &Matrix<T>) -> Result<Self> {
        if let Some(c) = Self::factor(a) {
            return Ok(c);
        }
        let n = a.dim();
        let base = if n == 0 { T::one() } else { a.trace() / T::lit(n as f64) };
        let base = if base > T::zero() && base.is_finite() { base } else { T::one() };
        let mut attempted = Vec::new();
        for exp in -10..=-4 {
            let jitter = base * T::lit(10f64.powi(exp));
            attempted.push(jitter.as_f64());
            let mut shifted = a.clone();
            for i in 0..n {
                shifted.set(i, i, shifted.get(i, i) + jitter);
            }
            if let Some(mut c) = Self::factor(&shifted) {
                c.jitter = jitter;
                return Ok(c);
            }
        }
        Err(Error::Factorization { attempted })
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    /// Diagonal jitter that was added before factorizing (zero if none).
    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// Solves `L z = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.lower.dim();
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s = s - self.lower.get(i, k) * z[k];
            }
            z[i] = s / self.lower.get(i, i);
        }
        z
    }

    /// Solves `Lᵀ x = z`.
    pub fn solve_upper(&self, z: &[T]) -> Vec<T> {
        let n = self.lower.dim();
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s = s - self.lower.get(k, i) * x[k];
            }
            x[i] = s / self.lower.get(i, i);
        }
        x
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `ln det(L Lᵀ)`.
    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.lower.dim()).map(|i| two * self.lower.get(i, i).ln()).sum()
    }
}
