//! Thomas algorithm for tridiagonal systems with a reusable factorization.
//!
//! The systems solved here (`I - iτ/2·A` and `-A` for the radial Laplacian)
//! are diagonally dominant, so no pivoting is performed; a vanishing pivot is
//! reported as a numeric failure.

use num_complex::Complex64;
use std::ops::{Div, Mul, Sub};

use crate::error::{LabError, Result};

pub trait Scalar:
    Copy + Mul<Output = Self> + Sub<Output = Self> + Div<Output = Self> + Default
{
    fn magnitude(self) -> f64;
}

impl Scalar for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// LU factors of a tridiagonal matrix (`lower[0]` and `upper[n-1]` unused).
#[derive(Debug, Clone)]
pub struct Tridiagonal<T> {
    lower: Vec<T>,
    /// modified super-diagonal `c'_i`
    c_prime: Vec<T>,
    /// pivots `b_i - a_i c'_{i-1}`
    pivots: Vec<T>,
}

impl<T: Scalar> Tridiagonal<T> {
    pub fn factor(lower: &[T], diag: &[T], upper: &[T]) -> Result<Self> {
        let n = diag.len();
        assert!(lower.len() == n && upper.len() == n && n >= 1);
        let mut c_prime = vec![T::default(); n];
        let mut pivots = vec![T::default(); n];
        let scale = diag.iter().map(|d| d.magnitude()).fold(0.0, f64::max);
        for i in 0..n {
            let p = if i == 0 {
                diag[0]
            } else {
                diag[i] - lower[i] * c_prime[i - 1]
            };
            if !(p.magnitude() > 1e-300 * scale.max(1.0)) {
                return Err(LabError::NumericFailure(format!(
                    "zero pivot at row {i} of tridiagonal solve"
                )));
            }
            pivots[i] = p;
            if i + 1 < n {
                c_prime[i] = upper[i] / p;
            }
        }
        Ok(Self {
            lower: lower.to_vec(),
            c_prime,
            pivots,
        })
    }

    /// Solves in place; `rhs` is overwritten by the solution.
    pub fn solve_in_place<U>(&self, rhs: &mut [U])
    where
        U: Copy + Sub<Output = U> + Div<T, Output = U> + Mul<T, Output = U>,
    {
        let n = self.pivots.len();
        assert_eq!(rhs.len(), n);
        rhs[0] = rhs[0] / self.pivots[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - rhs[i - 1] * self.lower[i]) / self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] = rhs[i] - rhs[i + 1] * self.c_prime[i];
        }
    }

    pub fn len(&self) -> usize {
        self.pivots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivots.is_empty()
    }
}
