//! Mass, energy, the scaling derivatives `K_{α,β}`, the auxiliary
//! functionals `H_{α,β}`, the two-parameter dilation, and the sub-threshold
//! region classifier.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{invalid, LabError, Result};
use crate::radial::{grad_sq, lp_integral, Field};

/// Dilation parameters `(α, β)` of `φ ↦ e^{αλ} φ(e^{-βλ} x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPair {
    pub alpha: f64,
    pub beta: f64,
}

impl ScalingPair {
    /// The pair used by the classifier.
    pub const CANONICAL: ScalingPair = ScalingPair {
        alpha: 2.0,
        beta: -1.0,
    };

    pub const fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    /// Admissible region: `α >= 0`, `5α + 6β >= 0`, `(α, β) != 0`.
    pub fn in_omega(&self) -> bool {
        self.alpha >= 0.0
            && 5.0 * self.alpha + 6.0 * self.beta >= 0.0
            && !(self.alpha == 0.0 && self.beta == 0.0)
    }

    pub fn require_omega(&self) -> Result<()> {
        if self.in_omega() {
            Ok(())
        } else {
            invalid(format!(
                "({}, {}) is outside the admissible region",
                self.alpha, self.beta
            ))
        }
    }

    /// `2α + 3β`; its sign selects the branch of `μ̄` and `H`.
    pub fn branch_selector(&self) -> f64 {
        2.0 * self.alpha + 3.0 * self.beta
    }
}

/// `μ̄ = max{2(α+β), (10/3)α + 4β}`.
pub fn mu_bar(p: ScalingPair) -> f64 {
    let (low, high) = mu_bar_branches(p);
    if p.branch_selector() <= 0.0 {
        low
    } else {
        high
    }
}

/// Both branch formulas of `μ̄`, `(2(α+β), (10/3)α + 4β)`.
pub fn mu_bar_branches(p: ScalingPair) -> (f64, f64) {
    (
        2.0 * (p.alpha + p.beta),
        10.0 / 3.0 * p.alpha + 4.0 * p.beta,
    )
}

/// The four integrals every functional is built from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Norms {
    /// `∫|u|²`
    pub mass: f64,
    /// `∫|∇u|²`
    pub grad_sq: f64,
    /// `∫|u|⁴`
    pub l4_4: f64,
    /// `∫|u|^{10/3}`
    pub l10_3: f64,
}

impl Norms {
    pub fn of(u: &Field) -> Self {
        Self {
            mass: lp_integral(u, 2.0),
            grad_sq: grad_sq(u),
            l4_4: lp_integral(u, 4.0),
            l10_3: lp_integral(u, 10.0 / 3.0),
        }
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.grad_sq - 0.25 * self.l4_4 + 0.3 * self.l10_3
    }

    pub fn energy_c(&self) -> f64 {
        0.5 * self.grad_sq - 0.25 * self.l4_4
    }

    /// Sum of the magnitudes of the three energy terms; a scale for relative drift.
    pub fn energy_scale(&self) -> f64 {
        0.5 * self.grad_sq + 0.25 * self.l4_4 + 0.3 * self.l10_3
    }

    pub fn k(&self, p: ScalingPair) -> f64 {
        (p.alpha + p.beta) * (self.grad_sq - self.l4_4) + (p.alpha + 1.2 * p.beta) * self.l10_3
    }

    pub fn k_c(&self, p: ScalingPair) -> f64 {
        (p.alpha + p.beta) * (self.grad_sq - self.l4_4)
    }

    /// `H_{α,β}` on each branch, `(2α <= -3β, 2α >= -3β)`.
    pub fn h_branches(&self, p: ScalingPair) -> (f64, f64) {
        let (a, b) = (p.alpha, p.beta);
        let s = p.branch_selector();
        let low = 0.25 * self.l4_4 - s / (10.0 * (a + b)) * self.l10_3;
        (low, self.h_upper(p))
    }

    /// `H^c_{α,β}` on each branch.
    pub fn h_c_branches(&self, p: ScalingPair) -> (f64, f64) {
        (0.25 * self.l4_4, self.h_upper(p))
    }

    fn h_upper(&self, p: ScalingPair) -> f64 {
        let (a, b) = (p.alpha, p.beta);
        let s = p.branch_selector();
        s / (10.0 * a + 12.0 * b) * self.grad_sq + a / (20.0 * a + 24.0 * b) * self.l4_4
    }

    pub fn h(&self, p: ScalingPair) -> f64 {
        pick(p, self.h_branches(p))
    }

    pub fn h_c(&self, p: ScalingPair) -> f64 {
        pick(p, self.h_c_branches(p))
    }

    /// `(μ̄ - L_{α,β}) E` in closed form.
    pub fn mu_minus_l_energy(&self, p: ScalingPair) -> f64 {
        let (a, b) = (p.alpha, p.beta);
        let s = p.branch_selector();
        let low = 0.5 * (a + b) * self.l4_4 - s / 5.0 * self.l10_3;
        let high = (2.0 / 3.0 * a + b) * self.grad_sq + a / 6.0 * self.l4_4;
        pick(p, (low, high))
    }

    /// `L_{α,β}(μ̄ - L_{α,β}) E` in closed form.
    pub fn l_mu_minus_l_energy(&self, p: ScalingPair) -> f64 {
        pick(p, self.l_mu_minus_l_energy_branches(p))
    }

    pub fn l_mu_minus_l_energy_branches(&self, p: ScalingPair) -> (f64, f64) {
        let (a, b) = (p.alpha, p.beta);
        let s = p.branch_selector();
        let low =
            2.0 * (a + b) * (a + b) * self.l4_4 - 2.0 / 15.0 * s * (5.0 * a + 6.0 * b) * self.l10_3;
        let high = (2.0 / 3.0 * a + b) * (2.0 * a + 2.0 * b) * self.grad_sq
            + 2.0 / 3.0 * a * (a + b) * self.l4_4;
        (low, high)
    }

    /// `d²/dλ² E(φ^λ)` at `λ = 0`, i.e. `μ̄ K - L(μ̄ - L)E`.
    pub fn second_scaling_derivative(&self, p: ScalingPair) -> f64 {
        mu_bar(p) * self.k(p) - self.l_mu_minus_l_energy(p)
    }
}

fn pick(p: ScalingPair, (low, high): (f64, f64)) -> f64 {
    if p.branch_selector() <= 0.0 {
        low
    } else {
        high
    }
}

pub fn mass(u: &Field) -> f64 {
    lp_integral(u, 2.0)
}

pub fn energy(u: &Field) -> f64 {
    Norms::of(u).energy()
}

pub fn energy_c(u: &Field) -> f64 {
    Norms::of(u).energy_c()
}

pub fn k_functional(u: &Field, p: ScalingPair) -> f64 {
    Norms::of(u).k(p)
}

pub fn k_c_functional(u: &Field, p: ScalingPair) -> f64 {
    Norms::of(u).k_c(p)
}

pub fn h_functional(u: &Field, p: ScalingPair) -> Result<f64> {
    p.require_omega()?;
    Ok(Norms::of(u).h(p))
}

pub fn h_c_functional(u: &Field, p: ScalingPair) -> Result<f64> {
    p.require_omega()?;
    Ok(Norms::of(u).h_c(p))
}

/// Energy threshold separating the two sub-threshold regions.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(m: f64) -> Result<Self> {
        if m.is_finite() && m > 0.0 {
            Ok(Self(m))
        } else {
            invalid(format!("threshold must be positive, got {m}"))
        }
    }

    /// `8π²/3`, a quarter of `‖∇W‖²`.
    pub fn analytic() -> Self {
        Self(crate::ground_state::M_EXACT)
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegionLabel {
    KPlus,
    KMinus,
    AboveThreshold,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::KPlus => "K_PLUS",
            RegionLabel::KMinus => "K_MINUS",
            RegionLabel::AboveThreshold => "ABOVE_THRESHOLD",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "K_PLUS" => Ok(Self::KPlus),
            "K_MINUS" => Ok(Self::KMinus),
            "ABOVE_THRESHOLD" => Ok(Self::AboveThreshold),
            _ => Err(LabError::Parse(format!("unknown region label {s}"))),
        }
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Region label from precomputed norms with an arbitrary pair.
pub fn classify_norms(norms: &Norms, m: Threshold, p: ScalingPair) -> RegionLabel {
    if norms.energy() < m.value() {
        if norms.k(p) >= 0.0 {
            RegionLabel::KPlus
        } else {
            RegionLabel::KMinus
        }
    } else {
        RegionLabel::AboveThreshold
    }
}

/// Sub-threshold classification with the canonical pair `(2, -1)`.
pub fn classify(u: &Field, m: Threshold) -> RegionLabel {
    classify_norms(&Norms::of(u), m, ScalingPair::CANONICAL)
}

/// Every scalar functional of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub mass: f64,
    pub energy: f64,
    pub energy_c: f64,
    pub grad_sq: f64,
    pub l4_4: f64,
    pub l10_3: f64,
    pub k: f64,
    pub k_c: f64,
    pub h: f64,
    pub h_c: f64,
    pub label: RegionLabel,
}

impl FunctionalReport {
    /// Report for pair `p` (must lie in the admissible region); the label
    /// always uses the canonical pair.
    pub fn compute(u: &Field, p: ScalingPair, m: Threshold) -> Result<Self> {
        p.require_omega()?;
        Ok(Self::from_norms(&Norms::of(u), p, m))
    }

    pub fn from_norms(n: &Norms, p: ScalingPair, m: Threshold) -> Self {
        Self {
            mass: n.mass,
            energy: n.energy(),
            energy_c: n.energy_c(),
            grad_sq: n.grad_sq,
            l4_4: n.l4_4,
            l10_3: n.l10_3,
            k: n.k(p),
            k_c: n.k_c(p),
            h: n.h(p),
            h_c: n.h_c(p),
            label: classify_norms(n, m, ScalingPair::CANONICAL),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Interpolation used when resampling a dilated field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Piecewise linear, monotone, second order.
    Linear,
    /// Four-point Lagrange, fourth order; smooth enough in `λ` for
    /// finite differences of the scaling curve.
    Cubic,
}

/// Points whose source radius fell outside the grid (read as zero).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Truncation {
    pub out_of_range: usize,
    /// `e^{αλ}|u(r_max)|`, the jump introduced by the zero extension.
    pub boundary_jump: f64,
}

impl Truncation {
    pub fn is_clean(&self) -> bool {
        self.out_of_range == 0 || self.boundary_jump == 0.0
    }
}

#[derive(Debug, Clone)]
pub struct ScaledField {
    pub field: Field,
    pub truncation: Truncation,
}

/// `v(r) = e^{αλ} u(e^{-βλ} r)` with linear interpolation.
pub fn scale_field(u: &Field, p: ScalingPair, lambda: f64) -> ScaledField {
    scale_field_with(u, p, lambda, Interpolation::Linear)
}

#[allow(clippy::needless_range_loop)]
pub fn scale_field_with(
    u: &Field,
    p: ScalingPair,
    lambda: f64,
    interp: Interpolation,
) -> ScaledField {
    let grid = *u.grid();
    let n = grid.cells();
    let h = grid.h();
    let amp = (p.alpha * lambda).exp();
    let s = (-p.beta * lambda).exp();
    let v = u.values();
    let zero = Complex64::new(0.0, 0.0);
    // even reflection through the origin, zero beyond r_max
    let at = |j: isize| -> Complex64 {
        let k = j.unsigned_abs();
        if k > n {
            zero
        } else {
            v[k]
        }
    };
    let mut out = Vec::with_capacity(grid.len());
    let mut outside = 0usize;
    for i in 0..grid.len() {
        if lambda == 0.0 {
            out.push(v[i] * amp);
            continue;
        }
        let x = s * grid.r(i) / h;
        if x > n as f64 {
            outside += 1;
            out.push(zero);
            continue;
        }
        let j = x.floor() as isize;
        let t = x - j as f64;
        let val = match interp {
            Interpolation::Linear => at(j) * (1.0 - t) + at(j + 1) * t,
            Interpolation::Cubic => {
                let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
                let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
                let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
                let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
                at(j - 1) * w0 + at(j) * w1 + at(j + 1) * w2 + at(j + 2) * w3
            }
        };
        out.push(val * amp);
    }
    ScaledField {
        field: Field::from_values_unchecked(grid, out),
        truncation: Truncation {
            out_of_range: outside,
            boundary_jump: if outside > 0 { amp * v[n].norm() } else { 0.0 },
        },
    }
}

fn check_h_fd(h_fd: f64) -> Result<()> {
    if (1e-6..=1e-2).contains(&h_fd) {
        Ok(())
    } else {
        invalid(format!(
            "finite-difference step must lie in [1e-6, 1e-2], got {h_fd}"
        ))
    }
}

fn scaled_energy(u: &Field, p: ScalingPair, lambda: f64) -> f64 {
    energy(&scale_field_with(u, p, lambda, Interpolation::Cubic).field)
}

/// `|[E(φ^h) - E(φ^{-h})]/(2h) - K_{α,β}(φ)| / max(1, |K_{α,β}(φ)|)`.
pub fn lambda_derivative_residual(u: &Field, p: ScalingPair, h_fd: f64) -> Result<f64> {
    check_h_fd(h_fd)?;
    let k = k_functional(u, p);
    let fd = (scaled_energy(u, p, h_fd) - scaled_energy(u, p, -h_fd)) / (2.0 * h_fd);
    Ok((fd - k).abs() / k.abs().max(1.0))
}

/// Residual of the second scaling identity: the central second difference
/// of `λ ↦ E(φ^λ)` against `μ̄ K - L(μ̄ - L)E`.
pub fn lambda_second_derivative_residual(u: &Field, p: ScalingPair, h_fd: f64) -> Result<f64> {
    check_h_fd(h_fd)?;
    let target = Norms::of(u).second_scaling_derivative(p);
    let e0 = energy(u);
    let fd = (scaled_energy(u, p, h_fd) - 2.0 * e0 + scaled_energy(u, p, -h_fd)) / (h_fd * h_fd);
    Ok((fd - target).abs() / target.abs().max(1.0))
}
