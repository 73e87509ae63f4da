//! Uniform radial grids on `[0, r_max]` carrying the 4D measure, complex
//! radial fields, quadrature, and the radial differential operators.
//!
//! All integrals are over `R^4` for radial integrands,
//! `∫ f(|x|) dx = 2π² ∫ r³ f(r) dr`. The nodal quadrature weights are the
//! composite trapezoid weights `h r_i³` (halved at `r_max`) plus the volume
//! of the origin cell, `h⁴/64`. That origin weight is exactly the one that
//! makes the flux-form Laplacian symmetric, which in turn makes the
//! Crank–Nicolson propagator unitary.
//!
//! The node at `r_max` is a Dirichlet node: the Laplacian treats `u = 0`
//! beyond it and the time integrator pins it to zero.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{invalid, LabError, Result};

/// Area of the unit sphere `S³`.
pub const SPHERE_AREA: f64 = 2.0 * PI * PI;

/// Uniform mesh `r_i = i·h`, `i = 0..=n`, `h = r_max/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
    h: f64,
}

impl RadialGrid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return invalid(format!("r_max must be positive and finite, got {r_max}"));
        }
        if n < 16 {
            return invalid(format!("need at least 16 cells, got {n}"));
        }
        Ok(Self {
            r_max,
            n,
            h: r_max / n as f64,
        })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Number of cells.
    pub fn cells(&self) -> usize {
        self.n
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        if i == self.n {
            self.r_max
        } else {
            i as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.r(i)).collect()
    }

    /// Radial quadrature weight of node `i` (without the `2π²` factor).
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.h;
        if i == 0 {
            h * h * h * h / 64.0
        } else {
            let r = self.r(i);
            let w = h * r * r * r;
            if i == self.n {
                0.5 * w
            } else {
                w
            }
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Grids are compatible iff `(r_max, n)` match exactly.
    pub fn compatible(&self, other: &RadialGrid) -> bool {
        self.r_max == other.r_max && self.n == other.n
    }

    pub fn check_compatible(&self, other: &RadialGrid) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(LabError::IncompatibleGrid(format!(
                "(r_max={}, n={}) vs (r_max={}, n={})",
                self.r_max, self.n, other.r_max, other.n
            )))
        }
    }

    /// Index of the last node with `r_i <= r`.
    pub fn index_floor(&self, r: f64) -> usize {
        ((r / self.h).floor().max(0.0) as usize).min(self.n)
    }
}

/// Complex radial profile sampled at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: RadialGrid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::IncompatibleGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return invalid(format!("non-finite value at node {i}"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.r(i))).collect();
        Self { grid, values }
    }

    pub fn from_real_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |r| Complex64::new(f(r), 0.0))
    }

    pub(crate) fn from_values_unchecked(grid: RadialGrid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub(crate) fn from_real_values(grid: RadialGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        let values = values.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|z| z.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `|u(r_max)|`, monitored to detect mass reaching the Dirichlet wall.
    pub fn boundary_magnitude(&self) -> f64 {
        self.values[self.grid.n].norm()
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|z| z * c)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.grid.check_compatible(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn axpy(&self, a: f64, other: &Field) -> Result<Field> {
        self.grid.check_compatible(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + y * a)
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.grid.check_compatible(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn modulus_sq(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// `2π² Σ ω_i f_i`, the quadrature of `∫_{R^4} f(|x|) dx` over the ball.
pub fn integrate_radial(grid: &RadialGrid, f: &[f64]) -> Result<f64> {
    if f.len() != grid.len() {
        return Err(LabError::IncompatibleGrid(format!(
            "integrand has {} samples, grid has {} nodes",
            f.len(),
            grid.len()
        )));
    }
    Ok(integrate_unchecked(grid, f.iter().copied()))
}

#[inline]
pub(crate) fn integrate_unchecked(grid: &RadialGrid, f: impl Iterator<Item = f64>) -> f64 {
    SPHERE_AREA * f.enumerate().map(|(i, v)| grid.weight(i) * v).sum::<f64>()
}

/// `∫|u|^p` over `R^4`.
pub fn lp_integral(u: &Field, p: f64) -> f64 {
    let grid = u.grid();
    let half = 0.5 * p;
    integrate_unchecked(
        grid,
        u.values().iter().map(|z| {
            let m2 = z.norm_sqr();
            if p == 2.0 {
                m2
            } else if p == 4.0 {
                m2 * m2
            } else if m2 == 0.0 {
                0.0
            } else {
                m2.powf(half)
            }
        }),
    )
}

/// `‖u‖_{L^p(R^4)}` for `p >= 2`.
pub fn norm_lp(u: &Field, p: f64) -> Result<f64> {
    if !(p >= 2.0 && p.is_finite()) {
        return invalid(format!("norm_lp needs finite p >= 2, got {p}"));
    }
    Ok(lp_integral(u, p).powf(1.0 / p))
}

/// Radial derivative `u_r` by central differences. The origin value uses the
/// even ghost `u(-h) = u(h)` and is therefore zero; `r_max` uses the
/// one-sided second-order stencil.
pub fn radial_derivative(u: &Field) -> Field {
    let grid = *u.grid();
    let n = grid.cells();
    let h = grid.h();
    let v = u.values();
    let mut d = vec![Complex64::new(0.0, 0.0); grid.len()];
    for i in 1..n {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
    }
    d[n] = (v[n] * 3.0 - v[n - 1] * 4.0 + v[n - 2]) / (2.0 * h);
    Field::from_values_unchecked(grid, d)
}

/// `‖∇u‖²_{L²}` in the face-difference form
/// `2π²/h Σ_{i<n} r_{i+1/2}³ |u_{i+1} - u_i|²`.
///
/// For fields vanishing at the Dirichlet node this is exactly
/// `-⟨laplacian4(u), u⟩`, so the linear propagator conserves it.
pub fn grad_sq(u: &Field) -> f64 {
    let grid = u.grid();
    let h = grid.h();
    let v = u.values();
    let mut acc = 0.0;
    for i in 0..grid.cells() {
        let rf = (i as f64 + 0.5) * h;
        acc += rf * rf * rf * (v[i + 1] - v[i]).norm_sqr();
    }
    SPHERE_AREA * acc / h
}

/// `‖∇u‖_{L²(R^4)}`.
pub fn norm_h1dot(u: &Field) -> f64 {
    grad_sq(u).sqrt()
}

/// Tridiagonal coefficients of the discrete radial Laplacian on nodes
/// `0..n` (the Dirichlet node `n` has a zero row).
#[derive(Debug, Clone)]
pub struct LaplacianStencil {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LaplacianStencil {
    pub fn new(grid: &RadialGrid) -> Self {
        let n = grid.cells();
        let h = grid.h();
        let h2 = h * h;
        let len = grid.len();
        let mut lower = vec![0.0; len];
        let mut diag = vec![0.0; len];
        let mut upper = vec![0.0; len];
        diag[0] = -8.0 / h2;
        upper[0] = 8.0 / h2;
        for i in 1..n {
            let fi = i as f64;
            let rm = (fi - 0.5).powi(3);
            let rp = (fi + 0.5).powi(3);
            let ri = fi.powi(3);
            lower[i] = rm / (ri * h2);
            upper[i] = rp / (ri * h2);
            diag[i] = -(lower[i] + upper[i]);
        }
        Self { lower, diag, upper }
    }

    /// `y = A x` with the Dirichlet row zeroed.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let len = x.len();
        let n = len - 1;
        y[0] = x[0] * self.diag[0] + x[1] * self.upper[0];
        for i in 1..n {
            y[i] = x[i - 1] * self.lower[i] + x[i] * self.diag[i] + x[i + 1] * self.upper[i];
        }
        y[n] = Complex64::new(0.0, 0.0);
    }
}

/// Conservative flux-form radial Laplacian `u_rr + (3/r) u_r`.
///
/// Interior: `(1/(r_i³h²))[r_{i+1/2}³(u_{i+1}-u_i) - r_{i-1/2}³(u_i-u_{i-1})]`;
/// origin: `8(u_1-u_0)/h²`; the Dirichlet node returns 0.
pub fn laplacian4(u: &Field) -> Field {
    let grid = *u.grid();
    let stencil = LaplacianStencil::new(&grid);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    stencil.apply(u.values(), &mut out);
    Field::from_values_unchecked(grid, out)
}

/// Weighted inner product `2π² Σ ω_i u_i conj(v_i)`.
pub fn inner(u: &Field, v: &Field) -> Result<Complex64> {
    u.grid().check_compatible(v.grid())?;
    let grid = u.grid();
    let s: Complex64 = u
        .values()
        .iter()
        .zip(v.values())
        .enumerate()
        .map(|(i, (a, b))| a * b.conj() * grid.weight(i))
        .sum();
    Ok(s * SPHERE_AREA)
}
