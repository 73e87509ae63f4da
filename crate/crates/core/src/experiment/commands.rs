use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{hash_text, RunConfig};
use super::output::{ensure_dir, render_row, write_text, AppendLog, Cell, CsvMeta, CsvWriter};
use super::suite::{self, SmoothField};
use crate::diagnostics::{
    auto_stride, build_morawetz_kernel_strided, build_virial_weight, log_trapezoid, morawetz_bound,
    morawetz_mr, r_ladder, strichartz_update, virial, virial_dt, virial_dtt, MorawetzKernel,
    StrichartzAccumulator, StrichartzNorms, TimeSeries, VirialWeight,
};
use crate::error::{LabError, Result};
use crate::evolution::{evolve, scattering_monitor, Outcome, Record, SolverConfig};
use crate::functionals::{mu_bar_branches, Norms, RegionLabel, ScalingPair, Threshold};
use crate::ground_state::{
    c4_exact, compute_refs, pohozaev_residual, reference_refs, sample_w, GroundStateRefs,
};
use crate::radial::{Field, RadialGrid};
use crate::snapshot::{fmt_f64, load_snapshot, save_snapshot};
use crate::variational::{minimize_quotient, sobolev_quotient, StopReason};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK: i32 = 2;
pub const EXIT_USAGE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Numeric breakdowns map to 4; everything else (bad input, I/O) to 3.
pub fn exit_code_for(e: &LabError) -> i32 {
    match e {
        LabError::NumericFailure(_) => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            limit,
            pass: value < limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub r_max: f64,
    pub n: usize,
    pub refs: GroundStateRefs,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_CHECK
        }
    }
}

/// Ground-state references on `grid`, then grid-independent identity checks.
pub fn run_verify(grid: RadialGrid) -> Result<VerifyReport> {
    let refs = compute_refs(grid);
    let mut checks = vec![
        Check::below(
            "grad_w_sq_rel",
            rel(refs.grad_w_sq, refs.grad_w_sq_exact),
            1e-3,
        ),
        Check::below("m_rel", rel(refs.m, refs.m_exact), 1e-3),
        Check::below("c4_rel", rel(refs.c4, c4_exact()), 1e-3),
        Check::below("pohozaev", pohozaev_residual(grid), 1e-3),
        Check::below(
            "quotient_w_rel",
            rel(sobolev_quotient(&sample_w(grid))?, refs.m),
            1e-3,
        ),
    ];

    let lam = suite::lambda_suite(suite::SUITE_SEED, 20, 5)?;
    checks.push(Check::below("lambda_first", lam.worst_first, 1e-5));
    checks.push(Check::below("lambda_second", lam.worst_second, 1e-4));

    let u =
        SmoothField::random(&mut suite::rng(suite::SUITE_SEED), true).sample(suite::suite_grid());
    let n = Norms::of(&u);
    let mut worst: f64 = 0.0;
    for alpha in [0.3, 1.0, 2.5] {
        let p = ScalingPair::new(alpha, -2.0 * alpha / 3.0);
        for (lo, hi) in [mu_bar_branches(p), n.h_branches(p), n.h_c_branches(p)] {
            worst = worst.max((lo - hi).abs() / lo.abs().max(1e-300));
        }
    }
    checks.push(Check {
        name: "branch_consistency".into(),
        value: worst,
        limit: 1e-12,
        pass: worst <= 1e-12,
    });

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        r_max: grid.r_max(),
        n: grid.cells(),
        refs,
        checks,
        pass,
    })
}

// -------------------------------------------------------------- minimize

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeReport {
    pub value: f64,
    pub m_numeric: f64,
    pub m_exact: f64,
    /// `|value - m_numeric| / m_numeric`
    pub rel_to_m: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub within_2pct: bool,
    pub config_sha256: String,
}

impl MinimizeReport {
    pub fn exit_code(&self) -> i32 {
        if self.converged {
            EXIT_PASS
        } else {
            EXIT_NUMERIC
        }
    }
}

pub fn cmd_minimize(cfg: &RunConfig, out: &Path) -> Result<MinimizeReport> {
    let seed = cfg.initial.build(cfg.grid)?;
    let res = minimize_quotient(&seed, &cfg.minimize)?;
    let m = reference_refs().m;
    let rel_to_m = rel(res.value, m);
    let report = MinimizeReport {
        value: res.value,
        m_numeric: m,
        m_exact: reference_refs().m_exact,
        rel_to_m,
        iterations: res.iterations,
        converged: res.converged,
        stop: res.stop,
        within_2pct: rel_to_m <= 0.02,
        config_sha256: cfg.hash(),
    };

    ensure_dir(out)?;
    write_text(&out.join("config.ini"), &cfg.canonical())?;
    let meta = CsvMeta {
        config_hash: report.config_sha256.clone(),
        grid: cfg.grid,
    };
    let mut w = CsvWriter::create(
        &out.join("minimize.csv"),
        &meta,
        &["iter", "value", "grad_norm", "step"],
    )?;
    for r in &res.history {
        w.row(&[
            Cell::I(r.iter),
            Cell::F(r.value),
            Cell::F(r.grad_norm),
            Cell::F(r.step),
        ])?;
    }
    w.finish()?;
    save_snapshot(out.join("minimizer.txt"), &res.minimizer)?;
    write_text(&out.join("report.json"), &to_json(&report))?;
    Ok(report)
}

// ---------------------------------------------------------------- evolve

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VirialRow {
    pub t: f64,
    pub radius: f64,
    pub v: f64,
    pub v_t: f64,
    pub v_tt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorawetzRow {
    pub t: f64,
    /// `M_R` on the ladder radii
    pub m_r: Vec<f64>,
    pub m: f64,
    /// `4φ(0)‖u‖³_{L²}‖∇u‖`, an upper bound for `|M_R|/R`
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveSummary {
    pub outcome: Outcome,
    pub t_final: f64,
    pub records: usize,
    pub steps: usize,
    pub initial_label: RegionLabel,
    pub final_label: RegionLabel,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub l4_ratio: f64,
    pub monitor_first: Option<f64>,
    pub monitor_last: Option<f64>,
    pub strichartz: Option<StrichartzNorms>,
    pub config_sha256: String,
}

impl EvolveSummary {
    pub fn exit_code(&self) -> i32 {
        match self.outcome {
            Outcome::StepUnderflow { .. } => EXIT_NUMERIC,
            _ => EXIT_PASS,
        }
    }
}

/// Everything an evolve run produces, before anything is written.
#[derive(Debug, Clone)]
pub struct EvolveRun {
    pub summary: EvolveSummary,
    pub series: TimeSeries<Record>,
    pub virial: Vec<VirialRow>,
    pub morawetz_radii: Vec<f64>,
    pub morawetz: Vec<MorawetzRow>,
    /// `(t_{k+1}, d_k)`
    pub monitor: Vec<(f64, f64)>,
    /// Snapshots selected by `snapshot_every`, plus the final state.
    pub snapshots: Vec<(f64, Field)>,
}

/// Kernels on the `count`-point ladder `[1, r0]`, on a sub-grid of at most
/// `max_cells` cells.
pub fn morawetz_kernels(
    grid: RadialGrid,
    r0: f64,
    count: usize,
    n_theta: usize,
    max_cells: usize,
) -> Result<Vec<MorawetzKernel>> {
    let stride = auto_stride(grid.cells(), max_cells);
    r_ladder(r0, count)
        .into_iter()
        .map(|r| build_morawetz_kernel_strided(grid, r, n_theta, stride))
        .collect()
}

fn morawetz_row(
    t: f64,
    u: &Field,
    kernels: &[MorawetzKernel],
    norms: &Norms,
) -> Result<MorawetzRow> {
    let m_r = kernels
        .iter()
        .map(|k| morawetz_mr(u, k))
        .collect::<Result<Vec<_>>>()?;
    let radii: Vec<f64> = kernels.iter().map(|k| k.radius).collect();
    let m = if m_r.len() > 1 {
        log_trapezoid(&radii, &m_r)
    } else {
        0.0
    };
    let phi0 = kernels.first().map_or(0.0, |k| k.phi0);
    Ok(MorawetzRow {
        t,
        m_r,
        m,
        bound: morawetz_bound(norms.mass, norms.grad_sq.sqrt(), phi0),
    })
}

/// Initial data from `cfg`, evolved with every configured diagnostic.
pub fn run_evolve(cfg: &RunConfig) -> Result<EvolveRun> {
    cfg.validate()?;
    let u0 = cfg.initial.build(cfg.grid)?;
    run_evolve_from(cfg, &u0)
}

pub fn run_evolve_from(cfg: &RunConfig, u0: &Field) -> Result<EvolveRun> {
    let d = &cfg.diagnostics;
    let weights: Vec<VirialWeight> = d
        .virial_radii
        .iter()
        .map(|&r| build_virial_weight(cfg.grid, r))
        .collect::<Result<_>>()?;
    let kernels = match d.morawetz_r0 {
        Some(r0) => morawetz_kernels(cfg.grid, r0, d.morawetz_count, d.n_theta, d.morawetz_cells)?,
        None => Vec::new(),
    };

    let mut vrows = Vec::new();
    let mut mrows = Vec::new();
    let mut history: Vec<(f64, Field)> = Vec::new();
    let mut snaps: Vec<(f64, Field)> = Vec::new();
    let mut acc = StrichartzAccumulator::starting_at(0.0);
    let mut prev: Option<(f64, Field)> = None;
    let mut k = 0usize;
    let mut failure: Option<LabError> = None;
    let mut last_field: Option<Field> = None;

    let (outcome, series) = evolve(u0, &cfg.solver, |rec, u| {
        if failure.is_some() {
            return;
        }
        let mut step = || -> Result<()> {
            for w in &weights {
                vrows.push(VirialRow {
                    t: rec.t,
                    radius: w.radius,
                    v: virial(u, w)?,
                    v_t: virial_dt(u, w)?,
                    v_tt: virial_dtt(u, w)?,
                });
            }
            if !kernels.is_empty() {
                mrows.push(morawetz_row(rec.t, u, &kernels, &Norms::of(u))?);
            }
            Ok(())
        };
        if let Err(e) = step() {
            failure = Some(e);
            return;
        }
        if d.strichartz {
            if let Some((t0, u_prev)) = &prev {
                match strichartz_update(acc, u_prev, rec.t - t0) {
                    Ok(a) => acc = a,
                    Err(e) => failure = Some(e),
                }
            }
            prev = Some((rec.t, u.clone()));
        }
        if d.monitor {
            history.push((rec.t, u.clone()));
        }
        if d.snapshot_every > 0 && k % d.snapshot_every == 0 {
            snaps.push((rec.t, u.clone()));
        }
        k += 1;
        last_field = Some(u.clone());
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let (t_last, last) = *series.last().expect("evolve records the initial state");
    let first = series[0].1;
    let final_field = last_field.expect("evolve records the final state");
    if snaps.last().map(|(t, _)| *t) != Some(t_last) {
        snaps.push((t_last, final_field));
    }

    let monitor: Vec<(f64, f64)> = if d.monitor && history.len() >= 2 {
        let dist = scattering_monitor(&history, cfg.solver.dt0)?;
        history.iter().skip(1).map(|(t, _)| *t).zip(dist).collect()
    } else {
        Vec::new()
    };

    let drift = |a: f64, b: f64| if b != 0.0 { (a - b) / b.abs() } else { a - b };
    let summary = EvolveSummary {
        outcome,
        t_final: t_last,
        records: series.len(),
        steps: last.steps,
        initial_label: first.report.label,
        final_label: last.report.label,
        mass_drift: drift(last.report.mass, first.report.mass),
        energy_drift: drift(last.report.energy, first.report.energy),
        l4_ratio: if first.l4 > 0.0 {
            last.l4 / first.l4
        } else {
            0.0
        },
        monitor_first: monitor.first().map(|m| m.1),
        monitor_last: monitor.last().map(|m| m.1),
        strichartz: d.strichartz.then(|| acc.finish()),
        config_sha256: cfg.hash(),
    };
    Ok(EvolveRun {
        summary,
        series,
        virial: vrows,
        morawetz_radii: kernels.iter().map(|k| k.radius).collect(),
        morawetz: mrows,
        monitor,
        snapshots: snaps,
    })
}

pub fn write_evolve(cfg: &RunConfig, run: &EvolveRun, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    write_text(&out.join("config.ini"), &cfg.canonical())?;
    let meta = CsvMeta {
        config_hash: run.summary.config_sha256.clone(),
        grid: cfg.grid,
    };

    let mut w = CsvWriter::create(&out.join("series.csv"), &meta, &Record::COLUMNS)?;
    for (_, r) in run.series.iter() {
        w.row(&[
            Cell::F(r.t),
            Cell::F(r.report.mass),
            Cell::F(r.report.energy),
            Cell::F(r.report.energy_c),
            Cell::F(r.grad_l2),
            Cell::F(r.l4),
            Cell::F(r.l10_3),
            Cell::F(r.report.k),
            Cell::S(r.report.label.as_str().into()),
            Cell::F(r.dt),
            Cell::F(r.boundary_mag),
        ])?;
    }
    w.comment(&run.summary.outcome.to_json())?;
    w.finish()?;

    if !run.virial.is_empty() {
        let mut w = CsvWriter::create(
            &out.join("virial.csv"),
            &meta,
            &["t", "R", "V", "V_t", "V_tt"],
        )?;
        for v in &run.virial {
            w.row(&[
                Cell::F(v.t),
                Cell::F(v.radius),
                Cell::F(v.v),
                Cell::F(v.v_t),
                Cell::F(v.v_tt),
            ])?;
        }
        w.finish()?;
    }
    if !run.morawetz.is_empty() {
        write_morawetz(out, &meta, &run.morawetz_radii, &run.morawetz)?;
    }
    if !run.monitor.is_empty() {
        let mut w = CsvWriter::create(&out.join("monitor.csv"), &meta, &["t", "distance"])?;
        for (t, d) in &run.monitor {
            w.row(&[Cell::F(*t), Cell::F(*d)])?;
        }
        w.finish()?;
    }

    let snap_dir = out.join("snapshots");
    ensure_dir(&snap_dir)?;
    let mut w = CsvWriter::create(&out.join("snapshots.csv"), &meta, &["file", "t"])?;
    for (i, (t, u)) in run.snapshots.iter().enumerate() {
        let name = format!("snapshots/snap_{i:05}.txt");
        save_snapshot(out.join(&name), u)?;
        w.row(&[Cell::S(name), Cell::F(*t)])?;
    }
    w.finish()?;
    if let Some((_, u)) = run.snapshots.last() {
        save_snapshot(out.join("final.txt"), u)?;
    }
    write_text(&out.join("outcome.json"), &to_json(&run.summary))?;
    Ok(())
}

pub fn cmd_evolve(cfg: &RunConfig, out: &Path) -> Result<EvolveSummary> {
    let run = run_evolve(cfg)?;
    write_evolve(cfg, &run, out)?;
    Ok(run.summary)
}

fn write_morawetz(out: &Path, meta: &CsvMeta, radii: &[f64], rows: &[MorawetzRow]) -> Result<()> {
    let mut w = CsvWriter::create(&out.join("morawetz_r.csv"), meta, &["t", "R", "M_R"])?;
    for row in rows {
        for (r, m) in radii.iter().zip(&row.m_r) {
            w.row(&[Cell::F(row.t), Cell::F(*r), Cell::F(*m)])?;
        }
    }
    w.finish()?;
    let mut w = CsvWriter::create(&out.join("morawetz_m.csv"), meta, &["t", "M"])?;
    for row in rows {
        w.row(&[Cell::F(row.t), Cell::F(row.m)])?;
    }
    w.finish()
}

// -------------------------------------------------------------- morawetz

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorawetzReport {
    pub snapshots: usize,
    pub radii: Vec<f64>,
    /// `sup_t |M_R(t)| / R⁴` per radius
    pub sup_scaled: Vec<f64>,
    /// `sup_t 4φ(0)‖u‖³‖∇u‖`
    pub run_constant: f64,
    pub bounded: bool,
}

/// Snapshots `(t, field)` from a snapshot file (t = 0) or an evolve run
/// directory (its `snapshots.csv` index).
pub fn load_snapshots(input: &Path) -> Result<Vec<(f64, Field)>> {
    if input.is_file() {
        return Ok(vec![(0.0, load_snapshot(input)?)]);
    }
    let index = input.join("snapshots.csv");
    let text = fs::read_to_string(&index).map_err(|e| {
        LabError::InvalidArgument(format!(
            "{}: not a snapshot or run directory ({e})",
            input.display()
        ))
    })?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let (file, t) = line
            .split_once(',')
            .ok_or_else(|| LabError::Parse(format!("bad index line `{line}`")))?;
        let t: f64 = t
            .parse()
            .map_err(|_| LabError::Parse(format!("bad time `{t}`")))?;
        out.push((t, load_snapshot(input.join(file))?));
    }
    if out.is_empty() {
        return Err(LabError::InvalidArgument(format!(
            "{} lists no snapshots",
            index.display()
        )));
    }
    Ok(out)
}

pub fn run_morawetz(
    snaps: &[(f64, Field)],
    r0: f64,
    count: usize,
    n_theta: usize,
    max_cells: usize,
) -> Result<(Vec<f64>, Vec<MorawetzRow>)> {
    let grid = *snaps[0].1.grid();
    let kernels = morawetz_kernels(grid, r0, count.max(2), n_theta, max_cells)?;
    let rows = snaps
        .iter()
        .map(|(t, u)| morawetz_row(*t, u, &kernels, &Norms::of(u)))
        .collect::<Result<Vec<_>>>()?;
    Ok((kernels.iter().map(|k| k.radius).collect(), rows))
}

/// `sup_t |M_R|/R⁴` per radius against the run constant `sup_t 4φ(0)‖u‖³‖∇u‖`.
pub fn morawetz_scaling(radii: &[f64], rows: &[MorawetzRow]) -> (Vec<f64>, f64) {
    let sup = radii
        .iter()
        .enumerate()
        .map(|(j, r)| {
            rows.iter()
                .map(|row| row.m_r[j].abs() / r.powi(4))
                .fold(0.0, f64::max)
        })
        .collect();
    let c = rows.iter().map(|row| row.bound).fold(0.0, f64::max);
    (sup, c)
}

pub fn cmd_morawetz(
    input: &Path,
    r0: f64,
    count: usize,
    n_theta: usize,
    max_cells: usize,
    out: &Path,
) -> Result<MorawetzReport> {
    let snaps = load_snapshots(input)?;
    let (radii, rows) = run_morawetz(&snaps, r0, count, n_theta, max_cells)?;
    let (sup_scaled, run_constant) = morawetz_scaling(&radii, &rows);
    let report = MorawetzReport {
        snapshots: snaps.len(),
        bounded: sup_scaled.iter().all(|s| *s <= run_constant),
        radii,
        sup_scaled,
        run_constant,
    };
    ensure_dir(out)?;
    let meta = CsvMeta {
        config_hash: hash_text(&format!(
            "morawetz r0={} count={count} n_theta={n_theta} cells={max_cells}",
            fmt_f64(r0)
        )),
        grid: *snaps[0].1.grid(),
    };
    write_morawetz(out, &meta, &report.radii, &rows)?;
    write_text(&out.join("report.json"), &to_json(&report))?;
    Ok(report)
}

// ------------------------------------------------------------------ scan

pub const SCAN_COLUMNS: [&str; 8] = [
    "a", "lam", "label", "outcome", "t_detect", "E", "K_2m1", "note",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub a: f64,
    pub lam: f64,
    pub label: Option<RegionLabel>,
    pub outcome: Option<Outcome>,
    pub energy: Option<f64>,
    pub k: Option<f64>,
    pub note: String,
}

impl ScanRow {
    pub fn cells(&self) -> Vec<Cell> {
        let opt = |x: Option<f64>| x.map_or(Cell::Empty, Cell::F);
        vec![
            Cell::F(self.a),
            Cell::F(self.lam),
            self.label
                .map_or(Cell::Empty, |l| Cell::S(l.as_str().into())),
            self.outcome
                .map_or(Cell::Empty, |o| Cell::S(o.name().into())),
            opt(self.outcome.and_then(|o| o.t_detect())),
            opt(self.energy),
            opt(self.k),
            Cell::S(self.note.clone()),
        ]
    }
}

/// Classifies (and optionally short-evolves) one scan point. Failures
/// become a note on the row instead of an error.
pub fn scan_point(cfg: &RunConfig, a: f64, lam: f64) -> ScanRow {
    let mut row = ScanRow {
        a,
        lam,
        label: None,
        outcome: None,
        energy: None,
        k: None,
        note: String::new(),
    };
    let u = match cfg.scan.seed(a, lam).build(cfg.grid) {
        Ok(u) => u,
        Err(e) => {
            row.note = e.to_string();
            return row;
        }
    };
    let n = Norms::of(&u);
    row.energy = Some(n.energy());
    row.k = Some(n.k(ScalingPair::CANONICAL));
    row.label = Some(crate::functionals::classify_norms(
        &n,
        Threshold::analytic(),
        ScalingPair::CANONICAL,
    ));
    if cfg.scan.evolve {
        let solver = SolverConfig {
            t_end: cfg.scan.t_end,
            ..cfg.solver
        };
        match evolve(&u, &solver, |_, _| {}) {
            Ok((o, _)) => row.outcome = Some(o),
            Err(e) => row.note = e.to_string(),
        }
    }
    row
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub points: usize,
    pub resumed: usize,
    pub written: usize,
    pub failed: usize,
    pub table: PathBuf,
}

fn scan_header(cfg: &RunConfig) -> Vec<String> {
    let meta = CsvMeta {
        config_hash: cfg.hash(),
        grid: cfg.grid,
    };
    let mut h = meta.header_lines();
    h.push(SCAN_COLUMNS.join(","));
    h
}

/// Completed data rows of an existing table; drops a torn final line.
fn existing_rows(path: &Path, header: &[String]) -> Result<usize> {
    let text = fs::read_to_string(path)?;
    let complete = match text.rfind('\n') {
        Some(p) => &text[..=p],
        None => "",
    };
    let lines: Vec<&str> = complete.lines().collect();
    if lines.len() < header.len()
        || lines[..header.len()] != header.iter().map(String::as_str).collect::<Vec<_>>()[..]
    {
        return Err(LabError::InvalidArgument(format!(
            "{} was written by a different configuration; remove it or drop --resume",
            path.display()
        )));
    }
    if complete.len() != text.len() {
        fs::write(path, complete)?;
    }
    Ok(lines.len() - header.len())
}

/// Runs the scan with up to `jobs` points in flight. Rows are appended in
/// point order, each synced before the next, so the table on disk is
/// always a prefix of the final one and `resume` picks up after it.
pub fn cmd_scan(cfg: &RunConfig, out: &Path, jobs: usize, resume: bool) -> Result<ScanReport> {
    cfg.validate()?;
    ensure_dir(out)?;
    write_text(&out.join("config.ini"), &cfg.canonical())?;
    let table = out.join("scan.csv");
    let header = scan_header(cfg);
    let points = cfg.scan.points();

    let done = if resume && table.exists() {
        existing_rows(&table, &header)?
    } else {
        let mut f = fs::File::create(&table)?;
        for l in &header {
            writeln!(f, "{l}")?;
        }
        f.sync_all()?;
        0
    };
    if done > points.len() {
        return Err(LabError::InvalidArgument(format!(
            "{} has {done} rows but the scan has {} points",
            table.display(),
            points.len()
        )));
    }

    let mut log = AppendLog::open(&table)?;
    let todo: Vec<(usize, (f64, f64))> = points.iter().copied().enumerate().skip(done).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| LabError::InvalidArgument(format!("thread pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<(usize, ScanRow)>();
    let mut written = 0usize;
    let mut failed = 0usize;
    let mut write_err = None;
    std::thread::scope(|s| {
        let todo = &todo;
        s.spawn(move || {
            pool.install(|| {
                todo.par_iter().for_each_with(tx, |tx, &(i, (a, lam))| {
                    let _ = tx.send((i, scan_point(cfg, a, lam)));
                })
            })
        });
        let mut pending = BTreeMap::new();
        let mut next = done;
        for (i, row) in rx {
            pending.insert(i, row);
            while let Some(row) = pending.remove(&next) {
                if !row.note.is_empty() {
                    failed += 1;
                }
                if let Err(e) = log.line(&render_row(&row.cells())) {
                    write_err = Some(e);
                    return;
                }
                written += 1;
                next += 1;
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    Ok(ScanReport {
        points: points.len(),
        resumed: done,
        written,
        failed,
        table,
    })
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}
