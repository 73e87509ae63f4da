//! The Aubin–Talenti ground state `W(x) = (1 + |x|²/8)^{-1}`, the threshold
//! `m = ¼‖∇W‖²`, the sharp Sobolev constant, and initial data built from `W`.
//!
//! Closed forms (substitute `s = r²/8` and use Beta integrals):
//! `‖∇W‖² = (π²/8)·256·B(3,1) = 32π²/3`, `‖W‖⁴_{L⁴} = 64π² B(2,2) = 32π²/3`,
//! `∫W^{10/3} = 64π² B(2, 4/3) = 144π²/7`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::cutoff::bump;
use crate::error::{invalid, Result};
use crate::radial::{grad_sq, lp_integral, Field, RadialGrid};

pub const GRAD_W_SQ_EXACT: f64 = 32.0 * PI * PI / 3.0;
pub const M_EXACT: f64 = 8.0 * PI * PI / 3.0;
pub const W_L10_3_EXACT: f64 = 144.0 * PI * PI / 7.0;

/// `(32π²/3)^{-1/4}`.
pub fn c4_exact() -> f64 {
    GRAD_W_SQ_EXACT.powf(-0.25)
}

pub const REFERENCE_R_MAX: f64 = 200.0;
pub const REFERENCE_CELLS: usize = 20_000;

#[inline]
pub fn w(r: f64) -> f64 {
    1.0 / (1.0 + r * r / 8.0)
}

pub fn sample_w(grid: RadialGrid) -> Field {
    Field::from_real_fn(grid, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateRefs {
    pub grad_w_sq: f64,
    pub w_l4_4: f64,
    pub m: f64,
    pub c4: f64,
    pub grad_w_sq_exact: f64,
    pub m_exact: f64,
}

impl GroundStateRefs {
    pub fn grad_w(&self) -> f64 {
        self.grad_w_sq.sqrt()
    }
}

pub fn compute_refs(grid: RadialGrid) -> GroundStateRefs {
    let wf = sample_w(grid);
    let g = grad_sq(&wf);
    let q = lp_integral(&wf, 4.0);
    GroundStateRefs {
        grad_w_sq: g,
        w_l4_4: q,
        m: 0.25 * g,
        c4: q.powf(0.25) / g.sqrt(),
        grad_w_sq_exact: GRAD_W_SQ_EXACT,
        m_exact: M_EXACT,
    }
}

/// References on the default `(200, 20000)` grid, computed once.
pub fn reference_refs() -> &'static GroundStateRefs {
    static REFS: OnceLock<GroundStateRefs> = OnceLock::new();
    REFS.get_or_init(|| {
        compute_refs(
            RadialGrid::new(REFERENCE_R_MAX, REFERENCE_CELLS).expect("valid reference grid"),
        )
    })
}

/// `|‖∇W‖² - ‖W‖⁴_{L⁴}| / ‖∇W‖²` on the given grid.
pub fn pohozaev_residual(grid: RadialGrid) -> f64 {
    let r = compute_refs(grid);
    (r.grad_w_sq - r.w_l4_4).abs() / r.grad_w_sq
}

/// `W ∉ L²(R⁴)`: the quadrature only returns the mass inside the ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedMass {
    pub value: f64,
    pub warning: &'static str,
}

pub fn w_mass_truncated(grid: RadialGrid) -> TruncatedMass {
    TruncatedMass {
        value: lp_integral(&sample_w(grid), 2.0),
        warning: "W is not square integrable in four dimensions; value grows like log(r_max)",
    }
}

/// `a·λ·W(λr)·χ(r/r_cut)` with the C⁴ cutoff `χ` (1 on `[0,1]`, 0 beyond 2).
pub fn preset_rescaled_w(grid: RadialGrid, a: f64, lam: f64, r_cut: f64) -> Result<Field> {
    if !(a > 0.0 && a.is_finite()) {
        return invalid(format!("amplitude must be positive, got {a}"));
    }
    if !(lam >= 1.0 && lam.is_finite()) {
        return invalid(format!("concentration must be >= 1, got {lam}"));
    }
    if !(r_cut > 0.0) {
        return invalid(format!("cutoff radius must be positive, got {r_cut}"));
    }
    if grid.h() > 0.05 / lam {
        warn!(
            "grid spacing {} under-resolves concentration {lam} (want h <= {})",
            grid.h(),
            0.05 / lam
        );
    }
    Ok(Field::from_real_fn(grid, |r| {
        a * lam * w(lam * r) * bump(r / r_cut)
    }))
}
