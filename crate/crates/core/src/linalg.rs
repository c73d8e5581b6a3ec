//! Minimal dense linear algebra: square matrices, pivoted LU solves, and the
//! matrix exponential. Sized for the truncations this crate works with
//! (hundreds of states), not for general-purpose use.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DMat<T> {
    n: usize,
    a: Vec<T>,
}

impl<T: Scalar> DMat<T> {
    pub fn zeros(n: usize) -> Self {
        DMat {
            n,
            a: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix rows must be square");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.a[i * self.n + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        self.a[i * self.n + j] += v;
    }

    pub fn matvec(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let row = &self.a[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(x).map(|(&m, &v)| m * v).sum();
        }
    }

    pub fn matmul(&self, other: &DMat<T>) -> DMat<T> {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = DMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * other.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.a {
            *v *= s;
        }
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> T {
        (0..self.n)
            .map(|i| {
                self.a[i * self.n..(i + 1) * self.n]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<T>()
            })
            .fold(T::zero(), T::max)
    }

    /// Solves `(self - shift·I) x = b` by pivoted LU, in a scratch copy.
    pub fn solve_shifted(&self, shift: T, b: &[T]) -> Result<Vec<T>> {
        let n = self.n;
        let mut lu = self.clone();
        for i in 0..n {
            lu.a[i * n + i] -= shift;
        }
        let mut piv: Vec<usize> = (0..n).collect();
        for col in 0..n {
            // partial pivoting
            let mut best = col;
            let mut best_val = lu.a[piv[col] * n + col].abs();
            for row in col + 1..n {
                let v = lu.a[piv[row] * n + col].abs();
                if v > best_val {
                    best = row;
                    best_val = v;
                }
            }
            if best_val < T::of(1e-300) {
                return Err(Error::Invalid("singular matrix in LU solve".into()));
            }
            piv.swap(col, best);
            let p = piv[col];
            let diag = lu.a[p * n + col];
            for row in col + 1..n {
                let r = piv[row];
                let factor = lu.a[r * n + col] / diag;
                lu.a[r * n + col] = factor;
                for j in col + 1..n {
                    let v = lu.a[p * n + j];
                    lu.a[r * n + j] -= factor * v;
                }
            }
        }
        // forward substitution
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut s = b[piv[i]];
            for j in 0..i {
                s -= lu.a[piv[i] * n + j] * y[j];
            }
            y[i] = s;
        }
        // back substitution
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= lu.a[piv[i] * n + j] * x[j];
            }
            x[i] = s / lu.a[piv[i] * n + i];
        }
        Ok(x)
    }

    /// `exp(t·self)` by scaling and squaring with a Taylor series.
    pub fn expm(&self, t: T) -> DMat<T> {
        let n = self.n;
        let mut b = self.clone();
        b.scale(t);
        let norm = b.inf_norm();
        let mut squarings = 0u32;
        let mut scale_div = T::one();
        if norm > T::of(0.5) {
            let s = (norm.as_f64() / 0.5).log2().ceil() as u32;
            squarings = s;
            scale_div = T::of((2.0f64).powi(s as i32));
        }
        let inv = T::one() / scale_div;
        b.scale(inv);

        let mut result: DMat<T> = DMat::identity(n);
        let mut term: DMat<T> = DMat::identity(n);
        for k in 1..=60usize {
            term = term.matmul(&b);
            term.scale(T::one() / T::of(k as f64));
            let tn = term.inf_norm();
            for (r, &v) in result.a.iter_mut().zip(&term.a) {
                *r += v;
            }
            if tn < T::epsilon() * result.inf_norm().max(T::one()) {
                break;
            }
        }
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }
}
