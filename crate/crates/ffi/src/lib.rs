//! C ABI for `cnls-lab`.
//!
//! Grids and fields cross the boundary as opaque heap handles owned by the
//! caller (`cnls_*_free`). Every fallible call returns a [`CnlsStatus`];
//! on failure the message is kept per thread and read back with
//! [`cnls_last_error_message`]. Panics are caught at the boundary and
//! reported as `CNLS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;

use cnls_lab::evolution::{self, Outcome, SolverConfig};
use cnls_lab::functionals::{classify_norms, Norms};
use cnls_lab::ground_state::{preset_rescaled_w, sample_w};
use cnls_lab::variational::sobolev_quotient;
use cnls_lab::{Field, LabError, RadialGrid, RegionLabel, ScalingPair, Threshold};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnlsStatus {
    Ok = 0,
    InvalidArgument = 1,
    IncompatibleGrid = 2,
    DomainTooSmall = 3,
    NumericFailure = 4,
    Parse = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

/// Sub-threshold region of a field.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnlsLabel {
    KPlus = 0,
    KMinus = 1,
    AboveThreshold = 2,
}

/// How an evolution ended.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CnlsOutcome {
    Completed = 0,
    BlowUp = 1,
    StepUnderflow = 2,
}

/// Time-stepping parameters; see [`cnls_solver_defaults`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnlsSolverConfig {
    pub dt0: f64,
    pub dt_min: f64,
    pub t_end: f64,
    pub tol_drift: f64,
    pub blowup_factor: f64,
    pub record_stride: usize,
}

/// Opaque uniform radial grid.
pub struct CnlsGrid(RadialGrid);

/// Opaque complex field on a grid.
pub struct CnlsField(Field);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &LabError) -> CnlsStatus {
    match e {
        LabError::InvalidArgument(_) => CnlsStatus::InvalidArgument,
        LabError::IncompatibleGrid(_) => CnlsStatus::IncompatibleGrid,
        LabError::DomainTooSmall(_) => CnlsStatus::DomainTooSmall,
        LabError::NumericFailure(_) => CnlsStatus::NumericFailure,
        LabError::Parse(_) => CnlsStatus::Parse,
        LabError::Io(_) => CnlsStatus::Io,
    }
}

enum Fail {
    Lab(LabError),
    Null(&'static str),
}

impl From<LabError> for Fail {
    fn from(e: LabError) -> Self {
        Fail::Lab(e)
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CnlsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CnlsStatus::Ok,
        Ok(Err(Fail::Lab(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            CnlsStatus::NullPointer
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CnlsStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    unsafe { out.write(v) };
    Ok(())
}

fn boxed_field(f: Field) -> *mut CnlsField {
    Box::into_raw(Box::new(CnlsField(f)))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cnls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cnls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------- grids

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn cnls_grid_new(
    r_max: f64,
    n: usize,
    out: *mut *mut CnlsGrid,
) -> CnlsStatus {
    guard(|| {
        let g = RadialGrid::new(r_max, n)?;
        unsafe { put(out, Box::into_raw(Box::new(CnlsGrid(g))), "out") }
    })
}

/// # Safety
/// `grid` must come from [`cnls_grid_new`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cnls_grid_free(grid: *mut CnlsGrid) {
    if !grid.is_null() {
        drop(unsafe { Box::from_raw(grid) });
    }
}

/// Number of nodes (`n + 1`), or 0 for NULL.
///
/// # Safety
/// `grid` must be NULL or a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn cnls_grid_len(grid: *const CnlsGrid) -> usize {
    unsafe { grid.as_ref() }.map_or(0, |g| g.0.len())
}

/// Node spacing, or NaN for NULL.
///
/// # Safety
/// `grid` must be NULL or a live grid handle.
#[no_mangle]
pub unsafe extern "C" fn cnls_grid_spacing(grid: *const CnlsGrid) -> f64 {
    unsafe { grid.as_ref() }.map_or(f64::NAN, |g| g.0.h())
}

// ---------------------------------------------------------------- fields

/// Field from `len` node values (`re[i] + i·im[i]`); `im` may be NULL for a real field.
///
/// # Safety
/// `re` (and `im` if non-NULL) must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn cnls_field_from_values(
    grid: *const CnlsGrid,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut CnlsField,
) -> CnlsStatus {
    guard(|| {
        let g = unsafe { get(grid, "grid") }?.0;
        if re.is_null() {
            return Err(Fail::Null("re"));
        }
        let re = unsafe { std::slice::from_raw_parts(re, len) };
        let im = (!im.is_null()).then(|| unsafe { std::slice::from_raw_parts(im, len) });
        let vals = (0..len)
            .map(|i| Complex64::new(re[i], im.map_or(0.0, |s| s[i])))
            .collect();
        let f = Field::from_values(g, vals)?;
        unsafe { put(out, boxed_field(f), "out") }
    })
}

/// `a·exp(-r²/(2 width²))`.
///
/// # Safety
/// `grid` must be a live grid handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cnls_field_gaussian(
    grid: *const CnlsGrid,
    a: f64,
    width: f64,
    out: *mut *mut CnlsField,
) -> CnlsStatus {
    guard(|| {
        let g = unsafe { get(grid, "grid") }?.0;
        if !(width > 0.0 && width.is_finite() && a.is_finite()) {
            return Err(
                LabError::InvalidArgument(format!("bad gaussian a={a} width={width}")).into(),
            );
        }
        let f = Field::from_real_fn(g, |r| a * (-r * r / (2.0 * width * width)).exp());
        unsafe { put(out, boxed_field(f), "out") }
    })
}

/// The ground state `W(r) = (1 + r²/8)^{-1}` sampled on `grid`.
///
/// # Safety
/// `grid` must be a live grid handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cnls_field_ground_state(
    grid: *const CnlsGrid,
    out: *mut *mut CnlsField,
) -> CnlsStatus {
    guard(|| {
        let g = unsafe { get(grid, "grid") }?.0;
        unsafe { put(out, boxed_field(sample_w(g)), "out") }
    })
}

/// Rescaled, smoothly truncated ground state `a·λ W(λ r)·χ(r / r_cut)`.
///
/// # Safety
/// `grid` must be a live grid handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cnls_field_rescaled_w(
    grid: *const CnlsGrid,
    a: f64,
    lam: f64,
    r_cut: f64,
    out: *mut *mut CnlsField,
) -> CnlsStatus {
    guard(|| {
        let g = unsafe { get(grid, "grid") }?.0;
        let f = preset_rescaled_w(g, a, lam, r_cut)?;
        unsafe { put(out, boxed_field(f), "out") }
    })
}

/// # Safety
/// `field` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn cnls_field_free(field: *mut CnlsField) {
    if !field.is_null() {
        drop(unsafe { Box::from_raw(field) });
    }
}

/// Number of nodes, or 0 for NULL.
///
/// # Safety
/// `field` must be NULL or a live field handle.
#[no_mangle]
pub unsafe extern "C" fn cnls_field_len(field: *const CnlsField) -> usize {
    unsafe { field.as_ref() }.map_or(0, |f| f.0.values().len())
}

/// Copies node values out; `len` must equal [`cnls_field_len`]. `im` may be NULL.
///
/// # Safety
/// `re` (and `im` if non-NULL) must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cnls_field_values(
    field: *const CnlsField,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> CnlsStatus {
    guard(|| {
        let f = unsafe { get(field, "field") }?;
        let v = f.0.values();
        if len != v.len() {
            return Err(LabError::IncompatibleGrid(format!(
                "expected {} values, got {len}",
                v.len()
            ))
            .into());
        }
        if re.is_null() {
            return Err(Fail::Null("re"));
        }
        let re = unsafe { std::slice::from_raw_parts_mut(re, len) };
        for (d, z) in re.iter_mut().zip(v) {
            *d = z.re;
        }
        if !im.is_null() {
            let im = unsafe { std::slice::from_raw_parts_mut(im, len) };
            for (d, z) in im.iter_mut().zip(v) {
                *d = z.im;
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- functionals

/// The four integrals behind every functional.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CnlsNorms {
    pub mass: f64,
    pub grad_sq: f64,
    pub l4_4: f64,
    pub l10_3: f64,
    pub energy: f64,
    pub energy_c: f64,
}

/// # Safety
/// `field` must be a live field handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cnls_norms(field: *const CnlsField, out: *mut CnlsNorms) -> CnlsStatus {
    guard(|| {
        let n = Norms::of(&unsafe { get(field, "field") }?.0);
        let v = CnlsNorms {
            mass: n.mass,
            grad_sq: n.grad_sq,
            l4_4: n.l4_4,
            l10_3: n.l10_3,
            energy: n.energy(),
            energy_c: n.energy_c(),
        };
        unsafe { put(out, v, "out") }
    })
}

/// `K_{α,β}`; the pair must lie in the admissible cone.
///
/// # Safety
/// `field` must be a live field handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cnls_k(
    field: *const CnlsField,
    alpha: f64,
    beta: f64,
    out: *mut f64,
) -> CnlsStatus {
    guard(|| {
        let p = ScalingPair::new(alpha, beta);
        p.require_omega()?;
        let k = Norms::of(&unsafe { get(field, "field") }?.0).k(p);
        unsafe { put(out, k, "out") }
    })
}

/// `¼ (‖∇u‖ / ‖u‖_{L⁴})⁴`.
///
/// # Safety
/// `field` must be a live field handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cnls_sobolev_quotient(
    field: *const CnlsField,
    out: *mut f64,
) -> CnlsStatus {
    guard(|| {
        let q = sobolev_quotient(&unsafe { get(field, "field") }?.0)?;
        unsafe { put(out, q, "out") }
    })
}

/// Region label with the canonical pair against threshold `m` (`m <= 0` selects `8π²/3`).
///
/// # Safety
/// `field` must be a live field handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cnls_classify(
    field: *const CnlsField,
    m: f64,
    out: *mut CnlsLabel,
) -> CnlsStatus {
    guard(|| {
        let m = if m > 0.0 {
            Threshold::new(m)?
        } else {
            Threshold::analytic()
        };
        let n = Norms::of(&unsafe { get(field, "field") }?.0);
        let label = match classify_norms(&n, m, ScalingPair::CANONICAL) {
            RegionLabel::KPlus => CnlsLabel::KPlus,
            RegionLabel::KMinus => CnlsLabel::KMinus,
            RegionLabel::AboveThreshold => CnlsLabel::AboveThreshold,
        };
        unsafe { put(out, label, "out") }
    })
}

// ---------------------------------------------------------------- time stepping

/// Free Crank–Nicolson step `e^{iτΔ}` (τ may be negative); writes a new field.
///
/// # Safety
/// `field` must be a live field handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cnls_linear_step(
    field: *const CnlsField,
    tau: f64,
    out: *mut *mut CnlsField,
) -> CnlsStatus {
    guard(|| {
        let f = evolution::linear_step(&unsafe { get(field, "field") }?.0, tau)?;
        unsafe { put(out, boxed_field(f), "out") }
    })
}

/// One Strang step of the full equation; writes a new field.
///
/// # Safety
/// `field` must be a live field handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cnls_strang_step(
    field: *const CnlsField,
    tau: f64,
    out: *mut *mut CnlsField,
) -> CnlsStatus {
    guard(|| {
        let f = evolution::strang_step(&unsafe { get(field, "field") }?.0, tau)?;
        unsafe { put(out, boxed_field(f), "out") }
    })
}

#[no_mangle]
pub extern "C" fn cnls_solver_defaults() -> CnlsSolverConfig {
    let d = SolverConfig::default();
    CnlsSolverConfig {
        dt0: d.dt0,
        dt_min: d.dt_min,
        t_end: d.t_end,
        tol_drift: d.tol_drift,
        blowup_factor: d.blowup_factor,
        record_stride: d.record_stride,
    }
}

/// Adaptive evolution to `cfg.t_end` or breakdown. Writes the outcome, the
/// final (or detection) time and the last recorded field.
///
/// # Safety
/// `field` must be a live field handle; `cfg`, `outcome`, `t` and
/// `final_field` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cnls_evolve(
    field: *const CnlsField,
    cfg: *const CnlsSolverConfig,
    outcome: *mut CnlsOutcome,
    t: *mut f64,
    final_field: *mut *mut CnlsField,
) -> CnlsStatus {
    guard(|| {
        let u0 = &unsafe { get(field, "field") }?.0;
        let c = unsafe { get(cfg, "cfg") }?;
        let solver = SolverConfig {
            dt0: c.dt0,
            dt_min: c.dt_min,
            t_end: c.t_end,
            tol_drift: c.tol_drift,
            blowup_factor: c.blowup_factor,
            record_stride: c.record_stride,
        };
        if outcome.is_null() || t.is_null() || final_field.is_null() {
            return Err(Fail::Null("outputs"));
        }
        let mut last = None;
        let (o, series) = evolution::evolve(u0, &solver, |_, u| last = Some(u.clone()))?;
        let (kind, time) = match o {
            Outcome::Completed => (CnlsOutcome::Completed, series.last().map_or(0.0, |r| r.0)),
            Outcome::BlowUp { t_detect } => (CnlsOutcome::BlowUp, t_detect),
            Outcome::StepUnderflow { t } => (CnlsOutcome::StepUnderflow, t),
        };
        let f = last.expect("evolve records the final state");
        unsafe {
            put(outcome, kind, "outcome")?;
            put(t, time, "t")?;
            put(final_field, boxed_field(f), "final_field")
        }
    })
}
