//! Minimization of the Sobolev quotient `J(u) = ¼(‖∇u‖/‖u‖_{L⁴})⁴`.
//!
//! The infimum over nonzero radial fields is the threshold `m`; the
//! minimizer is `W` up to dilation and amplitude.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::radial::{
    grad_sq, integrate_unchecked, lp_integral, Field, LaplacianStencil, RadialGrid,
};
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeConfig {
    pub max_iters: usize,
    pub step0: f64,
    pub tol_grad: f64,
    pub tol_value: f64,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            step0: 1e-2,
            tol_grad: 1e-6,
            tol_value: 1e-10,
        }
    }
}

impl MinimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return invalid("max_iters must be at least 1");
        }
        for (name, v) in [
            ("step0", self.step0),
            ("tol_grad", self.tol_grad),
            ("tol_value", self.tol_value),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Why the descent stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Gradient,
    ValueChange,
    MaxIters,
    /// Backtracking could not find a decrease.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub minimizer: Field,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    /// Row 0 is the (normalized) seed.
    pub history: Vec<IterRecord>,
}

fn quotient_parts(u: &Field) -> Result<(f64, f64)> {
    if u.is_zero() {
        return invalid("the Sobolev quotient is undefined for the zero field");
    }
    let g = grad_sq(u);
    let q = lp_integral(u, 4.0);
    if !(q > 0.0) {
        return invalid("field has vanishing L4 norm on the grid");
    }
    Ok((g, q))
}

/// `¼ ‖∇u‖⁴ / ‖u‖⁴_{L⁴}`.
pub fn sobolev_quotient(u: &Field) -> Result<f64> {
    let (g, q) = quotient_parts(u)?;
    Ok(0.25 * g * g / q)
}

/// Weighted gradient of `‖∇u‖²/2` including the boundary node, so that
/// `⟨δJ, v⟩` is the exact discrete directional derivative.
fn neg_laplacian_full(u: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let n = grid.cells();
    let h = grid.h();
    let st = LaplacianStencil::new(grid);
    let mut out = vec![0.0; n + 1];
    out[0] = -(st.diag[0] * u[0] + st.upper[0] * u[1]);
    for i in 1..n {
        out[i] = -(st.lower[i] * u[i - 1] + st.diag[i] * u[i] + st.upper[i] * u[i + 1]);
    }
    let rm = (n as f64 - 0.5) * h;
    out[n] = rm.powi(3) * (u[n] - u[n - 1]) / (h * grid.weight(n));
    out
}

fn real_parts(u: &Field) -> Result<Vec<f64>> {
    if !u.is_real() {
        return invalid("the quotient gradient is defined for real fields only");
    }
    Ok(u.values().iter().map(|z| z.re).collect())
}

fn gradient_values(u: &[f64], grid: &RadialGrid, g: f64, q: f64) -> Vec<f64> {
    let a = g / q;
    let b = g * g / (q * q);
    neg_laplacian_full(u, grid)
        .into_iter()
        .zip(u)
        .map(|(l, &x)| a * l - b * x * x * x)
        .collect()
}

/// `δJ(u) = (‖∇u‖²/‖u‖⁴_{L⁴})(-Δu) - (‖∇u‖⁴/‖u‖⁸_{L⁴}) u³`.
pub fn quotient_gradient(u: &Field) -> Result<Field> {
    let (g, q) = quotient_parts(u)?;
    let x = real_parts(u)?;
    Ok(Field::from_real_values(
        *u.grid(),
        gradient_values(&x, u.grid(), g, q),
    ))
}

/// Factorization of `-Δ_h` on the nodes below the Dirichlet node, used as
/// a Sobolev preconditioner.
fn preconditioner(grid: &RadialGrid) -> Result<Tridiagonal<f64>> {
    let st = LaplacianStencil::new(grid);
    let n = grid.cells();
    let lower: Vec<f64> = st.lower[..n].iter().map(|x| -x).collect();
    let diag: Vec<f64> = st.diag[..n].iter().map(|x| -x).collect();
    let upper: Vec<f64> = st.upper[..n].iter().map(|x| -x).collect();
    Tridiagonal::factor(&lower, &diag, &upper)
}

fn normalize(u: &mut [f64], grid: &RadialGrid) -> Result<()> {
    let f = Field::from_real_values(*grid, u.to_vec());
    let g = grad_sq(&f);
    if !(g > 0.0 && g.is_finite()) {
        return invalid("descent collapsed to the zero field");
    }
    let s = g.sqrt().recip();
    u.iter_mut().for_each(|x| *x *= s);
    Ok(())
}

fn value_of(u: &[f64], grid: &RadialGrid) -> Option<f64> {
    let f = Field::from_real_values(*grid, u.to_vec());
    let g = grad_sq(&f);
    let q = lp_integral(&f, 4.0);
    (q > 0.0 && g.is_finite()).then(|| 0.25 * g * g / q)
}

/// Preconditioned gradient descent on `J` over nonnegative real fields.
///
/// The search direction is `(-Δ_h)^{-1} δJ` with the Dirichlet node pinned;
/// each iteration backtracks from `step0` until `J` decreases, projects
/// onto `u >= 0` and renormalizes to `‖∇u‖ = 1`.
pub fn minimize_quotient(seed: &Field, cfg: &MinimizeConfig) -> Result<MinimizeResult> {
    cfg.validate()?;
    if seed.is_zero() {
        return invalid("seed must be nonzero");
    }
    let grid = *seed.grid();
    let n = grid.cells();
    let mut u = real_parts(seed)?;
    u[n] = 0.0;
    u.iter_mut().for_each(|x| *x = x.max(0.0));
    normalize(&mut u, &grid)?;
    let pre = preconditioner(&grid)?;

    let mut value = value_of(&u, &grid).ok_or_else(|| {
        crate::LabError::InvalidArgument("seed has no L4 mass on the grid".into())
    })?;
    let mut history = vec![IterRecord {
        iter: 0,
        value,
        grad_norm: f64::NAN,
        step: 0.0,
    }];
    let mut stop = StopReason::MaxIters;
    let mut iterations = 0;

    for it in 1..=cfg.max_iters {
        let f = Field::from_real_values(grid, u.clone());
        let (g, q) = (grad_sq(&f), lp_integral(&f, 4.0));
        let d = gradient_values(&u, &grid, g, q);
        let mut dir = d[..n].to_vec();
        pre.solve_in_place(&mut dir);
        dir.push(0.0);
        // dual (H^{-1}) norm of the gradient
        let gnorm = integrate_unchecked(&grid, dir.iter().zip(&d).map(|(a, b)| a * b))
            .max(0.0)
            .sqrt();
        if let Some(last) = history.last_mut() {
            last.grad_norm = gnorm;
        }
        if gnorm < cfg.tol_grad {
            stop = StopReason::Gradient;
            break;
        }

        let mut step = cfg.step0;
        let mut accepted = None;
        while step > 1e-14 * cfg.step0 {
            let mut trial: Vec<f64> = u
                .iter()
                .zip(&dir)
                .map(|(x, p)| (x - step * p).max(0.0))
                .collect();
            trial[n] = 0.0;
            if normalize(&mut trial, &grid).is_ok() {
                if let Some(v) = value_of(&trial, &grid) {
                    if v < value {
                        accepted = Some((trial, v));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some((trial, v)) = accepted else {
            stop = StopReason::Stalled;
            break;
        };
        let change = (value - v) / value;
        u = trial;
        value = v;
        iterations = it;
        history.push(IterRecord {
            iter: it,
            value,
            grad_norm: f64::NAN,
            step,
        });
        if change < cfg.tol_value {
            stop = StopReason::ValueChange;
            break;
        }
    }

    Ok(MinimizeResult {
        minimizer: Field::from_real_values(grid, u),
        value,
        iterations,
        converged: matches!(stop, StopReason::Gradient | StopReason::ValueChange),
        stop,
        history,
    })
}
