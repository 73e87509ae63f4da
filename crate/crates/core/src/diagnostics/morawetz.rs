use std::f64::consts::PI;

use rayon::prelude::*;

use super::quadrature::{gauss_legendre, mapped};
use crate::cutoff::{bump, bump_deriv};
use crate::error::{invalid, Result};
use crate::radial::{radial_derivative, Field, RadialGrid, SPHERE_AREA};

const PHI_SUPPORT: f64 = 4.0;
const PHI_CELLS: usize = 4000;

/// `φ(ρ) = ∫_{R⁴} ψ²(z) ψ²(z - w) dz`, `|w| = ρ`, tabulated with its
/// derivative on `[0, 4]` and evaluated by cubic Hermite interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiTable {
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

/// `(φ(ρ), φ'(ρ))` by tensor Gauss–Legendre in the radius `a` of `z` and the
/// angle between `z` and `w`, split where `ψ` changes regime.
fn phi_direct(rho: f64, rule: &(Vec<f64>, Vec<f64>)) -> (f64, f64) {
    let psi2 = |d: f64| bump(d).powi(2);
    if rho == 0.0 {
        let mut s = 0.0;
        for (lo, hi) in [(0.0, 1.0), (1.0, 2.0)] {
            for (a, w) in mapped(rule, lo, hi) {
                s += w * a * a * a * psi2(a).powi(2);
            }
        }
        return (SPHERE_AREA * s, 0.0);
    }
    let mut cuts = vec![0.0, 1.0, 2.0];
    for c in [
        rho - 2.0,
        rho - 1.0,
        rho + 1.0,
        rho + 2.0,
        1.0 - rho,
        2.0 - rho,
    ] {
        if c > 0.0 && c < 2.0 {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let mut val = 0.0;
    let mut der = 0.0;
    for pair in cuts.windows(2) {
        for (a, wa) in mapped(rule, pair[0], pair[1]) {
            let pa = psi2(a);
            if pa == 0.0 {
                continue;
            }
            let mut th = vec![0.0, PI];
            for c in [1.0, 2.0] {
                let cos = (a * a + rho * rho - c * c) / (2.0 * a * rho);
                if cos > -1.0 && cos < 1.0 {
                    th.push(cos.acos());
                }
            }
            th.sort_by(f64::total_cmp);
            let mut iv = 0.0;
            let mut id = 0.0;
            for seg in th.windows(2) {
                for (t, wt) in mapped(rule, seg[0], seg[1]) {
                    let (s, c) = t.sin_cos();
                    let d = (a * a + rho * rho - 2.0 * a * rho * c).max(0.0).sqrt();
                    if d >= 2.0 {
                        continue;
                    }
                    let b = bump(d);
                    let m = 4.0 * PI * s * s * wt;
                    iv += m * b * b;
                    if d > 0.0 {
                        id += m * 2.0 * b * bump_deriv(d) * (rho - a * c) / d;
                    }
                }
            }
            val += wa * a * a * a * pa * iv;
            der += wa * a * a * a * pa * id;
        }
    }
    (val, der)
}

impl PhiTable {
    pub fn build() -> Self {
        let rule = gauss_legendre(24);
        let step = PHI_SUPPORT / PHI_CELLS as f64;
        let (values, slopes): (Vec<f64>, Vec<f64>) = (0..=PHI_CELLS)
            .into_par_iter()
            .map(|k| {
                if k == PHI_CELLS {
                    (0.0, 0.0)
                } else {
                    phi_direct(k as f64 * step, &rule)
                }
            })
            .unzip();
        Self {
            step,
            values,
            slopes,
        }
    }

    /// Shared instance.
    pub fn get() -> &'static PhiTable {
        static TABLE: std::sync::OnceLock<PhiTable> = std::sync::OnceLock::new();
        TABLE.get_or_init(PhiTable::build)
    }

    pub fn support(&self) -> f64 {
        PHI_SUPPORT
    }

    pub fn eval(&self, rho: f64) -> f64 {
        if rho >= PHI_SUPPORT {
            return 0.0;
        }
        let rho = rho.abs();
        let x = rho / self.step;
        let k = (x.floor() as usize).min(PHI_CELLS - 1);
        let t = x - k as f64;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * self.step, self.slopes[k + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    pub fn at_zero(&self) -> f64 {
        self.values[0]
    }
}

/// `K_R(r_x, r_y) = 4π ∫₀^π φ(ρ/R)(r_x - r_y cos θ) sin²θ dθ` on the nodes
/// of a (possibly coarsened) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MorawetzKernel {
    pub radius: f64,
    /// Grid the table lives on; node `i` is node `i·stride` of `source`.
    pub grid: RadialGrid,
    pub source: RadialGrid,
    pub stride: usize,
    pub n_theta: usize,
    /// Row-major, `table[x·len + y]`.
    pub table: Vec<f64>,
    pub phi0: f64,
}

impl MorawetzKernel {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.grid.len() + y]
    }
}

/// Smallest divisor of `n` that keeps at most `max_cells` cells and at
/// least 16.
pub fn auto_stride(n: usize, max_cells: usize) -> usize {
    let lo = n.div_ceil(max_cells).max(1);
    (lo..=n / 16).find(|s| n % s == 0).unwrap_or(1)
}

pub fn build_morawetz_kernel(
    grid: RadialGrid,
    radius: f64,
    n_theta: usize,
) -> Result<MorawetzKernel> {
    build_morawetz_kernel_strided(grid, radius, n_theta, auto_stride(grid.cells(), 1024))
}

fn kernel_entry(rx: f64, ry: f64, radius: f64, rule: &(Vec<f64>, Vec<f64>), phi: &PhiTable) -> f64 {
    let reach = phi.support() * radius;
    if (rx - ry).abs() >= reach {
        return 0.0;
    }
    let theta_max = if rx + ry <= reach || rx == 0.0 || ry == 0.0 {
        PI
    } else {
        ((rx * rx + ry * ry - reach * reach) / (2.0 * rx * ry))
            .clamp(-1.0, 1.0)
            .acos()
    };
    let mut s = 0.0;
    for (t, w) in mapped(rule, 0.0, theta_max) {
        let (sn, c) = t.sin_cos();
        let rho = (rx * rx + ry * ry - 2.0 * rx * ry * c).max(0.0).sqrt();
        s += w * phi.eval(rho / radius) * (rx - ry * c) * sn * sn;
    }
    4.0 * PI * s
}

/// Kernel on every `stride`-th node; `stride` must divide the cell count.
pub fn build_morawetz_kernel_strided(
    grid: RadialGrid,
    radius: f64,
    n_theta: usize,
    stride: usize,
) -> Result<MorawetzKernel> {
    if n_theta < 64 {
        return invalid(format!("n_theta must be at least 64, got {n_theta}"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return invalid(format!("radius must be positive, got {radius}"));
    }
    if stride == 0 || grid.cells() % stride != 0 {
        return invalid(format!(
            "stride {stride} does not divide {} cells",
            grid.cells()
        ));
    }
    let coarse = RadialGrid::new(grid.r_max(), grid.cells() / stride)?;
    let phi = PhiTable::get();
    let rule = gauss_legendre(n_theta);
    let len = coarse.len();
    let mut table = vec![0.0; len * len];
    table.par_chunks_mut(len).enumerate().for_each(|(x, row)| {
        let rx = coarse.r(x);
        for (y, out) in row.iter_mut().enumerate() {
            *out = kernel_entry(rx, coarse.r(y), radius, &rule, phi);
        }
    });
    Ok(MorawetzKernel {
        radius,
        grid: coarse,
        source: grid,
        stride,
        n_theta,
        table,
        phi0: phi.at_zero(),
    })
}

/// `M_R = 2π² Σ_x Σ_y ω_x ω_y |u(r_y)|² p(r_x) K_R(r_x, r_y)`, `p = Im(ū u_r)`.
pub fn morawetz_mr(u: &Field, k: &MorawetzKernel) -> Result<f64> {
    k.source.check_compatible(u.grid())?;
    if u.is_real() {
        return Ok(0.0);
    }
    let du = radial_derivative(u);
    let len = k.grid.len();
    let s = k.stride;
    let dens: Vec<f64> = (0..len)
        .map(|y| k.grid.weight(y) * u.values()[y * s].norm_sqr())
        .collect();
    let total: f64 = (0..len)
        .into_par_iter()
        .map(|x| {
            let z = u.values()[x * s];
            let p = (z.conj() * du.values()[x * s]).im;
            if p == 0.0 {
                return 0.0;
            }
            let row = &k.table[x * len..(x + 1) * len];
            let inner: f64 = row.iter().zip(&dens).map(|(a, b)| a * b).sum();
            k.grid.weight(x) * p * inner
        })
        .sum();
    Ok(SPHERE_AREA * total)
}

/// `count` log-spaced radii from 1 to `r0`.
pub fn r_ladder(r0: f64, count: usize) -> Vec<f64> {
    if count < 2 || r0 <= 1.0 {
        return vec![1.0];
    }
    let l = r0.ln();
    (0..count)
        .map(|i| (l * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// `M = ∫_1^{R0} M_R dR/R`, trapezoid in `log R` over the kernels' radii.
pub fn morawetz_m(u: &Field, r0: f64, kernels: &[MorawetzKernel]) -> Result<f64> {
    if !(r0 >= 1.0) {
        return invalid(format!("R0 must be at least 1, got {r0}"));
    }
    if r0 == 1.0 {
        return Ok(0.0);
    }
    if kernels.len() < 2 {
        return invalid("at least two kernels are needed for the R integral");
    }
    let first = kernels[0].radius;
    let last = kernels[kernels.len() - 1].radius;
    if (first - 1.0).abs() > 1e-12 || (last - r0).abs() > 1e-12 * r0 {
        return invalid(format!("kernels span [{first}, {last}], need [1, {r0}]"));
    }
    if kernels.windows(2).any(|w| !(w[1].radius > w[0].radius)) {
        return invalid("kernel radii must increase");
    }
    let vals = kernels
        .iter()
        .map(|k| morawetz_mr(u, k))
        .collect::<Result<Vec<_>>>()?;
    let radii: Vec<f64> = kernels.iter().map(|k| k.radius).collect();
    Ok(log_trapezoid(&radii, &vals))
}

/// `∫ f dR/R` by the trapezoid rule in `log R`.
pub fn log_trapezoid(radii: &[f64], vals: &[f64]) -> f64 {
    radii
        .windows(2)
        .zip(vals.windows(2))
        .map(|(r, v)| 0.5 * (v[0] + v[1]) * (r[1] / r[0]).ln())
        .sum()
}

/// `4 φ(0) ‖u‖³_{L²} ‖∇u‖`: bounds `|M_R|/R` since `φ ≤ φ(0)` and
/// `|x - y| ≤ 4R` on the support.
pub fn morawetz_bound(mass: f64, grad_l2: f64, phi0: f64) -> f64 {
    4.0 * phi0 * mass.powf(1.5) * grad_l2
}
