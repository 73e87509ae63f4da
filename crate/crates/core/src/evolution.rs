//! Strang-split Crank–Nicolson integrator for
//! `i u_t + Δu = -|u|²u + |u|^{4/3}u` with adaptive steps and blow-up
//! detection.

use std::collections::{HashMap, VecDeque};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::TimeSeries;
use crate::error::{invalid, LabError, Result};
use crate::functionals::{FunctionalReport, Norms, ScalingPair, Threshold};
use crate::ground_state::reference_refs;
use crate::radial::{grad_sq, lp_integral, Field, LaplacianStencil, RadialGrid};
use crate::tridiag::Tridiagonal;

/// Factored Crank–Nicolson propagator for one step size.
#[derive(Debug, Clone)]
pub struct CrankNicolson {
    grid: RadialGrid,
    tau: f64,
    stencil: LaplacianStencil,
    lhs: Tridiagonal<Complex64>,
}

impl CrankNicolson {
    pub fn new(grid: RadialGrid, tau: f64) -> Result<Self> {
        if !tau.is_finite() {
            return invalid(format!("step must be finite, got {tau}"));
        }
        let stencil = LaplacianStencil::new(&grid);
        let c = Complex64::new(0.0, -0.5 * tau);
        let one = Complex64::new(1.0, 0.0);
        let n = grid.cells();
        let mut lower: Vec<Complex64> = stencil.lower.iter().map(|&x| c * x).collect();
        let mut diag: Vec<Complex64> = stencil.diag.iter().map(|&x| one + c * x).collect();
        let upper: Vec<Complex64> = stencil.upper.iter().map(|&x| c * x).collect();
        lower[n] = Complex64::new(0.0, 0.0);
        diag[n] = one;
        let lhs = Tridiagonal::factor(&lower, &diag, &upper)?;
        Ok(Self {
            grid,
            tau,
            stencil,
            lhs,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    /// One step in place: `(I - iτA/2) u⁺ = (I + iτA/2) u`, `u⁺_n = 0`.
    pub fn apply(&self, u: &mut [Complex64]) {
        let n = u.len() - 1;
        let mut au = vec![Complex64::new(0.0, 0.0); u.len()];
        self.stencil.apply(u, &mut au);
        let c = Complex64::new(0.0, 0.5 * self.tau);
        for (x, a) in u.iter_mut().zip(&au) {
            *x += c * a;
        }
        u[n] = Complex64::new(0.0, 0.0);
        self.lhs.solve_in_place(u);
    }

    pub fn step(&self, u: &Field) -> Result<Field> {
        self.grid.check_compatible(u.grid())?;
        let mut v = u.values().to_vec();
        self.apply(&mut v);
        Ok(Field::from_values_unchecked(self.grid, v))
    }
}

/// Crank–Nicolson approximation of `e^{iτΔ} u`; `tau` may be negative.
pub fn linear_step(u: &Field, tau: f64) -> Result<Field> {
    CrankNicolson::new(*u.grid(), tau)?.step(u)
}

#[inline]
fn rotate(z: Complex64, tau: f64) -> Complex64 {
    let a2 = z.norm_sqr();
    if a2 == 0.0 {
        return z;
    }
    let phase = tau * (a2 - a2.powf(2.0 / 3.0));
    z * Complex64::from_polar(1.0, phase)
}

/// Exact flow of `i u_t = -|u|²u + |u|^{4/3}u`: `u·exp(iτ(|u|² - |u|^{4/3}))`.
pub fn nonlinear_step(u: &Field, tau: f64) -> Field {
    u.map(|z| rotate(z, tau))
}

fn nonlinear_in_place(u: &mut [Complex64], tau: f64) {
    u.iter_mut().for_each(|z| *z = rotate(*z, tau));
}

/// `L(τ/2) ∘ N(τ) ∘ L(τ/2)`.
pub fn strang_step(u: &Field, tau: f64) -> Result<Field> {
    let half = CrankNicolson::new(*u.grid(), 0.5 * tau)?;
    let mut v = u.values().to_vec();
    half.apply(&mut v);
    nonlinear_in_place(&mut v, tau);
    half.apply(&mut v);
    Ok(Field::from_values_unchecked(*u.grid(), v))
}

/// Cache of half-step propagators keyed by step size.
#[derive(Debug, Default)]
pub struct Propagators {
    grid: Option<RadialGrid>,
    cache: HashMap<u64, CrankNicolson>,
}

impl Propagators {
    pub fn new(grid: RadialGrid) -> Self {
        Self {
            grid: Some(grid),
            cache: HashMap::new(),
        }
    }

    pub fn get(&mut self, tau: f64) -> Result<&CrankNicolson> {
        let grid = self
            .grid
            .ok_or_else(|| LabError::InvalidArgument("propagator cache has no grid".into()))?;
        let key = tau.to_bits();
        if !self.cache.contains_key(&key) {
            if self.cache.len() > 64 {
                self.cache.clear();
            }
            self.cache.insert(key, CrankNicolson::new(grid, tau)?);
        }
        Ok(&self.cache[&key])
    }

    pub fn strang(&mut self, u: &mut [Complex64], tau: f64) -> Result<()> {
        let half = self.get(0.5 * tau)?;
        half.apply(u);
        nonlinear_in_place(u, tau);
        half.apply(u);
        Ok(())
    }

    /// Free flow over `t` in `ceil(|t|/tau_max)` equal steps.
    pub fn free_flow(&mut self, u: &mut [Complex64], t: f64, tau_max: f64) -> Result<()> {
        if t == 0.0 {
            return Ok(());
        }
        let steps = (t.abs() / tau_max * (1.0 - 1e-9)).ceil().max(1.0) as usize;
        let cn = self.get(t / steps as f64)?;
        for _ in 0..steps {
            cn.apply(u);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt0: f64,
    pub dt_min: f64,
    pub t_end: f64,
    pub tol_drift: f64,
    pub blowup_factor: f64,
    pub record_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt0: 1e-3,
            dt_min: 1e-8,
            t_end: 1.0,
            tol_drift: 1e-8,
            blowup_factor: 20.0,
            record_stride: 100,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt0 && self.dt0.is_finite()) {
            return invalid(format!(
                "need 0 < dt_min <= dt0, got dt_min={} dt0={}",
                self.dt_min, self.dt0
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return invalid(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.tol_drift > 0.0) {
            return invalid(format!(
                "tol_drift must be positive, got {}",
                self.tol_drift
            ));
        }
        if !(self.blowup_factor > 1.0) {
            return invalid(format!(
                "blowup_factor must exceed 1, got {}",
                self.blowup_factor
            ));
        }
        if self.record_stride == 0 {
            return invalid("record_stride must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: f64,
    pub u: Field,
    pub dt: f64,
    pub e0: f64,
    pub m0: f64,
    pub grad0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    Completed,
    BlowUp { t_detect: f64 },
    StepUnderflow { t: f64 },
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Completed => "COMPLETED",
            Outcome::BlowUp { .. } => "BLOW_UP",
            Outcome::StepUnderflow { .. } => "STEP_UNDERFLOW",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("outcome serializes")
    }

    pub fn t_detect(&self) -> Option<f64> {
        match *self {
            Outcome::BlowUp { t_detect } => Some(t_detect),
            _ => None,
        }
    }
}

/// One row of the evolution time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub report: FunctionalReport,
    pub grad_l2: f64,
    pub l4: f64,
    /// `‖u‖_{L^{10/3}}`
    pub l10_3: f64,
    pub dt: f64,
    pub boundary_mag: f64,
    pub steps: usize,
}

impl Record {
    pub const COLUMNS: [&'static str; 11] = [
        "t",
        "mass",
        "energy",
        "energy_c",
        "grad_l2",
        "l4",
        "l10_3",
        "k_2m1",
        "label",
        "dt",
        "boundary_mag",
    ];

    fn new(t: f64, u: &Field, norms: &Norms, dt: f64, steps: usize, m: Threshold) -> Self {
        let report = FunctionalReport::from_norms(norms, ScalingPair::CANONICAL, m);
        Self {
            t,
            report,
            grad_l2: norms.grad_sq.sqrt(),
            l4: norms.l4_4.powf(0.25),
            l10_3: norms.l10_3.powf(0.3),
            dt,
            boundary_mag: u.boundary_magnitude(),
            steps,
        }
    }
}

/// Evolves `u0` to `cfg.t_end` or until blow-up / step underflow.
///
/// The energy reference for the drift test is the energy after the last
/// accepted step; drift is measured relative to `max(|E|, ½‖∇u‖²+¼‖u‖⁴+0.3‖u‖^{10/3}_{10/3})`.
/// `recorder` sees the initial state, every `record_stride`-th accepted
/// step and the final state.
pub fn evolve(
    u0: &Field,
    cfg: &SolverConfig,
    mut recorder: impl FnMut(&Record, &Field),
) -> Result<(Outcome, TimeSeries<Record>)> {
    cfg.validate()?;
    if !u0.is_finite() {
        return invalid("initial data must be finite");
    }
    let grid = *u0.grid();
    let m = Threshold::analytic();
    let grad_w = reference_refs().grad_w();
    let mut props = Propagators::new(grid);

    let norms0 = Norms::of(u0);
    let mut state = SolverState {
        t: 0.0,
        u: u0.clone(),
        dt: cfg.dt0,
        e0: norms0.energy(),
        m0: norms0.mass,
        grad0: norms0.grad_sq.sqrt(),
    };
    let blowup_level = cfg.blowup_factor * state.grad0.max(grad_w);
    let mut series = TimeSeries::new();
    let rec = Record::new(0.0, u0, &norms0, state.dt, 0, m);
    recorder(&rec, u0);
    series.push(0.0, rec)?;

    if u0.is_zero() {
        // the zero solution is stationary; sample it on the usual cadence
        let mut t = 0.0;
        let mut k = 0usize;
        while t < cfg.t_end {
            let tau = cfg.dt0.min(cfg.t_end - t);
            t += tau;
            k += 1;
            if k % cfg.record_stride == 0 || t >= cfg.t_end {
                let rec = Record::new(t, u0, &norms0, tau, k, m);
                recorder(&rec, u0);
                series.push(t, rec)?;
            }
        }
        return Ok((Outcome::Completed, series));
    }

    let mut e_prev = norms0.energy();
    let mut norms = norms0;
    let mut steps = 0usize;
    let mut calm = 0usize;
    let mut recent_grad: VecDeque<f64> = VecDeque::with_capacity(17);
    recent_grad.push_back(state.grad0);
    let mut buf = state.u.values().to_vec();
    let mut last_recorded = 0usize;

    let outcome = loop {
        if state.t >= cfg.t_end {
            break Outcome::Completed;
        }
        let tau = state.dt.min(cfg.t_end - state.t);
        buf.copy_from_slice(state.u.values());
        props.strang(&mut buf, tau)?;
        let cand = Field::from_values_unchecked(grid, buf.clone());
        let cn = Norms::of(&cand);
        let e = cn.energy();
        let scale = e_prev.abs().max(cn.energy_scale());
        let drift = if scale > 0.0 {
            (e - e_prev).abs() / scale
        } else {
            0.0
        };
        let ok = cand.is_finite() && drift.is_finite() && drift <= cfg.tol_drift;
        if !ok {
            let next = 0.5 * state.dt;
            if next < cfg.dt_min {
                let g = norms.grad_sq.sqrt();
                let growing =
                    recent_grad.front().is_some_and(|&g_old| g > g_old) && g > state.grad0;
                break if growing {
                    Outcome::BlowUp { t_detect: state.t }
                } else {
                    Outcome::StepUnderflow { t: state.t }
                };
            }
            state.dt = next;
            calm = 0;
            continue;
        }

        state.u = cand;
        state.t += tau;
        steps += 1;
        norms = cn;
        e_prev = e;
        let g = norms.grad_sq.sqrt();
        if recent_grad.len() == 16 {
            recent_grad.pop_front();
        }
        recent_grad.push_back(g);

        if drift < cfg.tol_drift / 16.0 {
            calm += 1;
            if calm >= 8 && state.dt < cfg.dt0 {
                state.dt = (2.0 * state.dt).min(cfg.dt0);
                calm = 0;
            }
        } else {
            calm = 0;
        }

        if g >= blowup_level {
            break Outcome::BlowUp { t_detect: state.t };
        }
        if steps % cfg.record_stride == 0 {
            let rec = Record::new(state.t, &state.u, &norms, tau, steps, m);
            recorder(&rec, &state.u);
            series.push(state.t, rec)?;
            last_recorded = steps;
        }
    };

    if steps != last_recorded {
        let rec = Record::new(state.t, &state.u, &norms, state.dt, steps, m);
        recorder(&rec, &state.u);
        series.push(state.t, rec)?;
    }
    Ok((outcome, series))
}

/// `‖u‖²_{H¹} = ‖u‖²_{L²} + ‖∇u‖²`.
pub fn h1_norm(u: &Field) -> f64 {
    (lp_integral(u, 2.0) + grad_sq(u)).sqrt()
}

/// Cauchy increments of the free-flow pull-back `v_k = e^{-it_kΔ} u(t_k)`:
/// `d_k = ‖v_{k+1} - v_k‖_{H¹}`.
///
/// The discrete free flow is unitary and preserves `‖∇u‖²`, so the
/// increment is evaluated as `‖u(t_{k+1}) - S(t_{k+1}-t_k) u(t_k)‖_{H¹}`;
/// `S` is composed from Crank–Nicolson steps of size at most `tau_max`.
pub fn scattering_monitor(history: &[(f64, Field)], tau_max: f64) -> Result<Vec<f64>> {
    if history.len() < 2 {
        return invalid("scattering monitor needs at least two snapshots");
    }
    if !(tau_max > 0.0) {
        return invalid(format!("tau_max must be positive, got {tau_max}"));
    }
    let grid = *history[0].1.grid();
    for (_, u) in history {
        grid.check_compatible(u.grid())?;
    }
    let mut props = Propagators::new(grid);
    let mut out = Vec::with_capacity(history.len() - 1);
    for pair in history.windows(2) {
        let (t0, u0) = (&pair[0].0, &pair[0].1);
        let (t1, u1) = (&pair[1].0, &pair[1].1);
        if !(t1 > t0) {
            return invalid("snapshot times must increase");
        }
        let mut v = u0.values().to_vec();
        props.free_flow(&mut v, t1 - t0, tau_max)?;
        let diff = u1.sub(&Field::from_values_unchecked(grid, v))?;
        out.push(h1_norm(&diff));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{energy, mass};
    use proptest::prelude::*;

    fn gauss(g: RadialGrid, a: f64) -> Field {
        Field::from_real_fn(g, |r| a * (-0.5 * r * r).exp())
    }

    fn free_gaussian(r: f64, t: f64) -> Complex64 {
        let z = Complex64::new(1.0, 2.0 * t);
        z.powi(-2) * (-(r * r) / (2.0 * z)).exp()
    }

    #[test]
    fn zero_is_fixed() {
        let g = RadialGrid::new(10.0, 100).unwrap();
        let z = Field::zeros(g);
        assert!(linear_step(&z, 0.1).unwrap().is_zero());
        assert!(nonlinear_step(&z, 0.1).is_zero());
        assert!(strang_step(&z, 0.1).unwrap().is_zero());
    }

    #[test]
    fn free_gaussian_oracle() {
        let g = RadialGrid::new(30.0, 3000).unwrap();
        let cn = CrankNicolson::new(g, 1e-3).unwrap();
        let mut v = gauss(g, 1.0).values().to_vec();
        for _ in 0..1000 {
            cn.apply(&mut v);
        }
        let err = v
            .iter()
            .enumerate()
            .map(|(i, z)| (z - free_gaussian(g.r(i), 1.0)).norm())
            .fold(0.0, f64::max);
        assert!(err < 5e-4, "{err}");
    }

    #[test]
    fn forward_backward_round_trip() {
        let g = RadialGrid::new(20.0, 2000).unwrap();
        let u = Field::from_fn(g, |r| Complex64::new(1.0, 0.5 * r) * (-0.3 * r * r).exp());
        let v = linear_step(&linear_step(&u, 0.01).unwrap(), -0.01).unwrap();
        assert!(v.max_abs_diff(&u).unwrap() < 1e-12);
    }

    #[test]
    fn nonlinear_step_preserves_modulus() {
        let g = RadialGrid::new(5.0, 50).unwrap();
        let u = Field::from_fn(g, |r| Complex64::new(2.0 - r * 0.3, 0.7) * 0.8);
        let v = nonlinear_step(&u, 0.3);
        for (a, b) in u.values().iter().zip(v.values()) {
            assert!((a.norm() - b.norm()).abs() < 1e-14);
        }
        let unit = Field::from_fn(g, |r| Complex64::from_polar(1.0, r));
        assert!(nonlinear_step(&unit, 5.0).max_abs_diff(&unit).unwrap() < 1e-14);
    }

    #[test]
    fn strang_energy_drift_and_order() {
        let g = RadialGrid::new(20.0, 2000).unwrap();
        let u = gauss(g, 0.5);
        let e0 = energy(&u);
        let e1 = energy(&strang_step(&u, 1e-3).unwrap());
        assert!(((e1 - e0) / e0).abs() < 1e-8);

        let u = gauss(g, 1.5);
        let run = |tau: f64| {
            let mut v = u.clone();
            for _ in 0..(0.2 / tau).round() as usize {
                v = strang_step(&v, tau).unwrap();
            }
            v
        };
        let (a, b, c) = (run(0.02), run(0.01), run(0.005));
        let ea = a.max_abs_diff(&c).unwrap();
        let eb = b.max_abs_diff(&c).unwrap();
        // errors against the τ/4 reference: (1 - 1/16)/(1/4 - 1/16) = 5
        assert!(ea / eb > 4.0 && ea / eb < 6.0, "{ea} {eb}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn linear_step_is_unitary(
            coef in proptest::collection::vec(-1.0f64..1.0, 6),
            tau in -0.5f64..0.5,
        ) {
            let g = RadialGrid::new(10.0, 200).unwrap();
            let mut u = Field::from_fn(g, |r| {
                let p = (-0.5 * r * r).exp();
                Complex64::new(coef[0] + coef[1] * r + coef[2] * r * r, coef[3] + coef[4] * r) * p
                    + coef[5]
            });
            u.values_mut()[g.cells()] = Complex64::new(0.0, 0.0);
            let v = linear_step(&u, tau).unwrap();
            let (m0, m1) = (mass(&u), mass(&v));
            prop_assert!((m1 - m0).abs() <= 1e-12 * m0.max(1e-300));
            let (g0, g1) = (grad_sq(&u), grad_sq(&v));
            prop_assert!((g1 - g0).abs() <= 1e-11 * g0.max(1e-300));
        }
    }

    #[test]
    fn evolve_zero_data() {
        let g = RadialGrid::new(10.0, 100).unwrap();
        let cfg = SolverConfig {
            t_end: 0.05,
            record_stride: 10,
            ..Default::default()
        };
        let (out, ts) = evolve(&Field::zeros(g), &cfg, |_, _| {}).unwrap();
        assert_eq!(out, Outcome::Completed);
        assert!(ts.len() >= 5);
        assert!(ts
            .iter()
            .all(|(_, r)| r.report.mass == 0.0 && r.report.energy == 0.0));
    }

    #[test]
    fn evolve_small_gaussian_conserves() {
        let g = RadialGrid::new(20.0, 1000).unwrap();
        let u = gauss(g, 0.5);
        let cfg = SolverConfig {
            t_end: 0.5,
            record_stride: 50,
            ..Default::default()
        };
        let mut calls = 0;
        let (out, ts) = evolve(&u, &cfg, |_, _| calls += 1).unwrap();
        assert_eq!(out, Outcome::Completed);
        assert_eq!(calls, ts.len());
        let first = ts.first().unwrap().1;
        let last = ts.last().unwrap().1;
        assert!((last.t - 0.5).abs() < 1e-12);
        assert!(((last.report.mass - first.report.mass) / first.report.mass).abs() < 1e-12);
        assert!(((last.report.energy - first.report.energy) / first.report.energy).abs() < 1e-6);
    }

    #[test]
    fn monitor_vanishes_on_free_flow() {
        let g = RadialGrid::new(20.0, 1000).unwrap();
        let cn = CrankNicolson::new(g, 1e-3).unwrap();
        let mut v = gauss(g, 1.0).values().to_vec();
        let mut hist = vec![(0.0, gauss(g, 1.0))];
        for k in 1..=5 {
            for _ in 0..50 {
                cn.apply(&mut v);
            }
            hist.push((0.05 * k as f64, Field::from_values(g, v.clone()).unwrap()));
        }
        let d = scattering_monitor(&hist, 1e-3).unwrap();
        assert!(d.iter().all(|&x| x < 1e-11), "{d:?}");
        assert!(scattering_monitor(&hist[..1], 1e-3).is_err());
        let z: Vec<_> = (0..3).map(|k| (k as f64, Field::zeros(g))).collect();
        assert!(scattering_monitor(&z, 1e-3)
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            dt_min: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            blowup_factor: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
