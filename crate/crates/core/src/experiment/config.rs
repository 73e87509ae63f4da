//! Run configuration: `key = value` lines grouped under `[section]` headers.
//!
//! ```text
//! name = scattering
//! [grid]
//! r_max = 30
//! n = 3000
//! [initial]
//! kind = gaussian
//! a = 0.5
//! ```
//! `#` starts a comment. Unknown sections or keys are errors.

use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::evolution::SolverConfig;
use crate::ground_state::preset_rescaled_w;
use crate::radial::{Field, RadialGrid};
use crate::snapshot::{fmt_f64, load_snapshot};
use crate::variational::MinimizeConfig;

/// Parsed lines, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ini {
    pub entries: Vec<IniEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IniEntry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

fn parse_err<T>(line: usize, msg: impl std::fmt::Display) -> Result<T> {
    Err(LabError::Parse(format!("line {line}: {msg}")))
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut entries = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let s = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return parse_err(line, format!("unterminated section header `{s}`"));
                };
                let name = name.trim();
                if name.is_empty() {
                    return parse_err(line, "empty section name");
                }
                section = name.to_string();
                continue;
            }
            let Some((key, value)) = s.split_once('=') else {
                return parse_err(line, format!("expected `key = value`, got `{s}`"));
            };
            let key = key.trim();
            if key.is_empty() {
                return parse_err(line, "empty key");
            }
            if entries
                .iter()
                .any(|e: &IniEntry| e.section == section && e.key == key)
            {
                return parse_err(line, format!("duplicate key `{key}` in [{section}]"));
            }
            entries.push(IniEntry {
                section: section.clone(),
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(Self { entries })
    }
}

/// Initial data (also the seed for `minimize`).
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    /// `a·exp(-r²/(2·width²))`
    Gaussian {
        a: f64,
        width: f64,
    },
    /// `a·λ·W(λr)` cut off smoothly between `r_cut` and `2·r_cut`
    RescaledW {
        a: f64,
        lam: f64,
        r_cut: f64,
    },
    File {
        path: PathBuf,
    },
}

impl InitialData {
    pub fn build(&self, grid: RadialGrid) -> Result<Field> {
        match self {
            InitialData::Gaussian { a, width } => {
                if !(a.is_finite() && *width > 0.0 && width.is_finite()) {
                    return Err(LabError::InvalidArgument(format!(
                        "gaussian needs finite a and width > 0, got a={a} width={width}"
                    )));
                }
                let c = 0.5 / (width * width);
                Ok(Field::from_real_fn(grid, |r| a * (-c * r * r).exp()))
            }
            InitialData::RescaledW { a, lam, r_cut } => {
                if 2.0 * r_cut > grid.r_max() {
                    return Err(LabError::DomainTooSmall(format!(
                        "cutoff support 2·{r_cut} exceeds r_max {}",
                        grid.r_max()
                    )));
                }
                preset_rescaled_w(grid, *a, *lam, *r_cut)
            }
            InitialData::File { path } => {
                let u = load_snapshot(path)?;
                grid.check_compatible(u.grid())?;
                Ok(u)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    /// Virial radii; each needs `3R <= r_max`.
    pub virial_radii: Vec<f64>,
    /// Upper end of the Morawetz R ladder; `None` disables Morawetz output.
    pub morawetz_r0: Option<f64>,
    pub morawetz_count: usize,
    /// Cap on the kernel sub-grid cell count (kernel cost grows with its square).
    pub morawetz_cells: usize,
    pub n_theta: usize,
    pub strichartz: bool,
    pub monitor: bool,
    /// Save a snapshot every this many records (0: final state only).
    pub snapshot_every: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            virial_radii: Vec::new(),
            morawetz_r0: None,
            morawetz_count: 16,
            morawetz_cells: 256,
            n_theta: 256,
            strichartz: true,
            monitor: true,
            snapshot_every: 0,
        }
    }
}

/// Seed family for a scan; each point is `a·λ·f(λr)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanFamily {
    Gaussian,
    RescaledW,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub family: ScanFamily,
    pub a: Vec<f64>,
    pub lam: Vec<f64>,
    pub width: f64,
    pub r_cut: f64,
    /// Short evolution per point after classification.
    pub evolve: bool,
    pub t_end: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            family: ScanFamily::Gaussian,
            a: vec![0.3, 0.5],
            lam: vec![1.0],
            width: 1.0,
            r_cut: 6.0,
            evolve: false,
            t_end: 0.1,
        }
    }
}

impl ScanConfig {
    /// Points in row order: `a` outer, `lam` inner.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.a
            .iter()
            .flat_map(|&a| self.lam.iter().map(move |&l| (a, l)))
            .collect()
    }

    pub fn seed(&self, a: f64, lam: f64) -> InitialData {
        match self.family {
            ScanFamily::Gaussian => InitialData::Gaussian {
                a: a * lam,
                width: self.width / lam,
            },
            ScanFamily::RescaledW => InitialData::RescaledW {
                a,
                lam,
                r_cut: self.r_cut,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub grid: RadialGrid,
    pub solver: SolverConfig,
    pub initial: InitialData,
    pub diagnostics: DiagnosticsConfig,
    pub minimize: MinimizeConfig,
    pub scan: ScanConfig,
    /// Output root from the file; `CNLS_LAB_OUT` takes precedence.
    pub out_root: Option<PathBuf>,
}

pub const PRESETS: [&str; 5] = ["scattering", "blowup", "blowup-a1.2", "minimize", "scan"];

impl RunConfig {
    fn base(name: &str, r_max: f64, n: usize) -> Self {
        Self {
            name: name.to_string(),
            grid: RadialGrid::new(r_max, n).expect("preset grid"),
            solver: SolverConfig::default(),
            initial: InitialData::Gaussian { a: 1.0, width: 1.0 },
            diagnostics: DiagnosticsConfig::default(),
            minimize: MinimizeConfig::default(),
            scan: ScanConfig::default(),
            out_root: None,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let mut c;
        match name {
            "scattering" => {
                c = Self::base(name, 30.0, 3000);
                c.solver.t_end = 20.0;
                c.initial = InitialData::Gaussian { a: 0.5, width: 1.0 };
                c.diagnostics.virial_radii = vec![1.0, 2.0, 4.0, 8.0];
                c.diagnostics.morawetz_r0 = Some(8.0);
            }
            // (1.2, 32, 6) has E > m; 1.4 is the nearest amplitude inside K⁻
            "blowup" | "blowup-a1.2" => {
                c = Self::base(name, 20.0, 16384);
                c.solver.t_end = 5.0;
                c.solver.record_stride = 20;
                let a = if name == "blowup" { 1.4 } else { 1.2 };
                c.initial = InitialData::RescaledW {
                    a,
                    lam: 32.0,
                    r_cut: 6.0,
                };
                c.diagnostics.virial_radii = vec![1.0, 2.0, 4.0, 6.0];
                c.diagnostics.monitor = false;
            }
            "minimize" => {
                c = Self::base(name, 200.0, 20000);
            }
            "scan" => {
                c = Self::base(name, 30.0, 3000);
            }
            _ => {
                return Err(LabError::InvalidArgument(format!(
                    "unknown preset `{name}` (known: {})",
                    PRESETS.join(", ")
                )))
            }
        }
        Ok(c)
    }

    /// Applies a parsed file on top of `self`.
    pub fn apply(mut self, ini: &Ini) -> Result<Self> {
        let mut r_max = self.grid.r_max();
        let mut n = self.grid.cells();
        let mut kind: Option<(String, usize)> = None;
        let (mut a, mut width, mut lam, mut r_cut, mut path) = (None, None, None, None, None);
        match &self.initial {
            InitialData::Gaussian { a: a0, width: w0 } => {
                a = Some(*a0);
                width = Some(*w0);
            }
            InitialData::RescaledW {
                a: a0,
                lam: l0,
                r_cut: c0,
            } => {
                a = Some(*a0);
                lam = Some(*l0);
                r_cut = Some(*c0);
            }
            InitialData::File { path: p } => path = Some(p.clone()),
        }

        for e in &ini.entries {
            let l = e.line;
            let v = e.value.as_str();
            match (e.section.as_str(), e.key.as_str()) {
                ("", "name") => self.name = v.to_string(),
                ("grid", "r_max") => r_max = num(l, v)?,
                ("grid", "n") => n = int(l, v)?,
                ("solver", "dt0") => self.solver.dt0 = num(l, v)?,
                ("solver", "dt_min") => self.solver.dt_min = num(l, v)?,
                ("solver", "t_end") => self.solver.t_end = num(l, v)?,
                ("solver", "tol_drift") => self.solver.tol_drift = num(l, v)?,
                ("solver", "blowup_factor") => self.solver.blowup_factor = num(l, v)?,
                ("solver", "record_stride") => self.solver.record_stride = int(l, v)?,
                ("initial", "kind") => kind = Some((v.to_string(), l)),
                ("initial", "a") => a = Some(num(l, v)?),
                ("initial", "width") => width = Some(num(l, v)?),
                ("initial", "lam") => lam = Some(num(l, v)?),
                ("initial", "r_cut") => r_cut = Some(num(l, v)?),
                ("initial", "path") => path = Some(PathBuf::from(v)),
                ("diagnostics", "virial_radii") => self.diagnostics.virial_radii = list(l, v)?,
                ("diagnostics", "morawetz_r0") => {
                    self.diagnostics.morawetz_r0 = match v {
                        "off" | "none" => None,
                        _ => Some(num(l, v)?),
                    }
                }
                ("diagnostics", "morawetz_count") => self.diagnostics.morawetz_count = int(l, v)?,
                ("diagnostics", "morawetz_cells") => self.diagnostics.morawetz_cells = int(l, v)?,
                ("diagnostics", "n_theta") => self.diagnostics.n_theta = int(l, v)?,
                ("diagnostics", "strichartz") => self.diagnostics.strichartz = boolean(l, v)?,
                ("diagnostics", "monitor") => self.diagnostics.monitor = boolean(l, v)?,
                ("diagnostics", "snapshot_every") => self.diagnostics.snapshot_every = int(l, v)?,
                ("minimize", "max_iters") => self.minimize.max_iters = int(l, v)?,
                ("minimize", "step0") => self.minimize.step0 = num(l, v)?,
                ("minimize", "tol_grad") => self.minimize.tol_grad = num(l, v)?,
                ("minimize", "tol_value") => self.minimize.tol_value = num(l, v)?,
                ("scan", "family") => {
                    self.scan.family = match v {
                        "gaussian" => ScanFamily::Gaussian,
                        "rescaled_w" => ScanFamily::RescaledW,
                        _ => return parse_err(l, format!("unknown scan family `{v}`")),
                    }
                }
                ("scan", "a") => self.scan.a = list(l, v)?,
                ("scan", "lam") => self.scan.lam = list(l, v)?,
                ("scan", "width") => self.scan.width = num(l, v)?,
                ("scan", "r_cut") => self.scan.r_cut = num(l, v)?,
                ("scan", "evolve") => self.scan.evolve = boolean(l, v)?,
                ("scan", "t_end") => self.scan.t_end = num(l, v)?,
                ("output", "root") => self.out_root = Some(PathBuf::from(v)),
                (s, k) => {
                    let at = if s.is_empty() {
                        String::new()
                    } else {
                        format!(" in [{s}]")
                    };
                    return parse_err(l, format!("unknown key `{k}`{at}"));
                }
            }
        }

        self.grid = RadialGrid::new(r_max, n)?;
        let need = |x: Option<f64>, key: &str, kind: &str| {
            x.ok_or_else(|| LabError::Parse(format!("initial kind `{kind}` needs `{key}`")))
        };
        let kind = kind.unwrap_or_else(|| {
            let k = match &self.initial {
                InitialData::Gaussian { .. } => "gaussian",
                InitialData::RescaledW { .. } => "rescaled_w",
                InitialData::File { .. } => "file",
            };
            (k.to_string(), 0)
        });
        self.initial = match kind.0.as_str() {
            "gaussian" => InitialData::Gaussian {
                a: need(a, "a", "gaussian")?,
                width: width.unwrap_or(1.0),
            },
            "rescaled_w" => InitialData::RescaledW {
                a: need(a, "a", "rescaled_w")?,
                lam: need(lam, "lam", "rescaled_w")?,
                r_cut: need(r_cut, "r_cut", "rescaled_w")?,
            },
            "file" => InitialData::File {
                path: path
                    .ok_or_else(|| LabError::Parse("initial kind `file` needs `path`".into()))?,
            },
            other => return parse_err(kind.1, format!("unknown initial kind `{other}`")),
        };
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.minimize.validate()?;
        let bad = |msg: String| Err(LabError::InvalidArgument(msg));
        for &r in &self.diagnostics.virial_radii {
            if !(r >= 1.0) {
                return bad(format!("virial radius {r} must be at least 1"));
            }
            if 3.0 * r > self.grid.r_max() {
                return Err(LabError::DomainTooSmall(format!(
                    "virial radius {r} needs r_max >= {}",
                    3.0 * r
                )));
            }
        }
        if let Some(r0) = self.diagnostics.morawetz_r0 {
            if !(r0 >= 1.0 && r0.is_finite()) {
                return bad(format!("morawetz_r0 must be at least 1, got {r0}"));
            }
            if self.diagnostics.morawetz_count < 2 {
                return bad("morawetz_count must be at least 2".into());
            }
            if self.diagnostics.morawetz_cells < 16 {
                return bad("morawetz_cells must be at least 16".into());
            }
        }
        if self.diagnostics.n_theta < 64 {
            return bad(format!(
                "n_theta must be at least 64, got {}",
                self.diagnostics.n_theta
            ));
        }
        if self.scan.a.is_empty() || self.scan.lam.is_empty() {
            return bad("scan needs at least one value of a and of lam".into());
        }
        if !(self.scan.t_end > 0.0) {
            return bad(format!(
                "scan t_end must be positive, got {}",
                self.scan.t_end
            ));
        }
        Ok(())
    }

    /// Every numerical setting, one per line, in a fixed order; feeds the
    /// config hash. The output root is left out so moving a run does not
    /// change its hash.
    pub fn canonical(&self) -> String {
        let f = |x: f64| fmt_f64(x);
        let fl = |xs: &[f64]| xs.iter().map(|&x| f(x)).collect::<Vec<_>>().join(", ");
        let mut lines: Vec<String> = Vec::new();
        macro_rules! kv {
            ($k:expr, $v:expr) => {
                lines.push(format!("{} = {}", $k, $v))
            };
        }
        macro_rules! section {
            ($k:expr) => {
                lines.push(format!("[{}]", $k))
            };
        }
        kv!("name", self.name);
        section!("grid");
        kv!("r_max", f(self.grid.r_max()));
        kv!("n", self.grid.cells());
        section!("solver");
        kv!("dt0", f(self.solver.dt0));
        kv!("dt_min", f(self.solver.dt_min));
        kv!("t_end", f(self.solver.t_end));
        kv!("tol_drift", f(self.solver.tol_drift));
        kv!("blowup_factor", f(self.solver.blowup_factor));
        kv!("record_stride", self.solver.record_stride);
        section!("initial");
        match &self.initial {
            InitialData::Gaussian { a, width } => {
                kv!("kind", "gaussian");
                kv!("a", f(*a));
                kv!("width", f(*width));
            }
            InitialData::RescaledW { a, lam, r_cut } => {
                kv!("kind", "rescaled_w");
                kv!("a", f(*a));
                kv!("lam", f(*lam));
                kv!("r_cut", f(*r_cut));
            }
            InitialData::File { path } => {
                kv!("kind", "file");
                kv!("path", path.display());
            }
        }
        let d = &self.diagnostics;
        section!("diagnostics");
        kv!("virial_radii", fl(&d.virial_radii));
        kv!("morawetz_r0", d.morawetz_r0.map_or("off".into(), f));
        kv!("morawetz_count", d.morawetz_count);
        kv!("morawetz_cells", d.morawetz_cells);
        kv!("n_theta", d.n_theta);
        kv!("strichartz", d.strichartz);
        kv!("monitor", d.monitor);
        kv!("snapshot_every", d.snapshot_every);
        let m = &self.minimize;
        section!("minimize");
        kv!("max_iters", m.max_iters);
        kv!("step0", f(m.step0));
        kv!("tol_grad", f(m.tol_grad));
        kv!("tol_value", f(m.tol_value));
        let sc = &self.scan;
        section!("scan");
        kv!(
            "family",
            match sc.family {
                ScanFamily::Gaussian => "gaussian",
                ScanFamily::RescaledW => "rescaled_w",
            }
        );
        kv!("a", fl(&sc.a));
        kv!("lam", fl(&sc.lam));
        kv!("width", f(sc.width));
        kv!("r_cut", f(sc.r_cut));
        kv!("evolve", sc.evolve);
        kv!("t_end", f(sc.t_end));
        lines.join("\n") + "\n"
    }

    pub fn hash(&self) -> String {
        hash_text(&self.canonical())
    }
}

/// Hex SHA-256.
pub fn hash_text(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn num(line: usize, v: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => parse_err(line, format!("expected a finite number, got `{v}`")),
    }
}

fn int(line: usize, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .or_else(|_| parse_err(line, format!("expected a non-negative integer, got `{v}`")))
}

fn boolean(line: usize, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => parse_err(line, format!("expected true/false, got `{v}`")),
    }
}

fn list(line: usize, v: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(line, x.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let ini = Ini::parse("name = x  # trailing\n\n[grid]\nr_max = 10\n n=100 \n").unwrap();
        assert_eq!(ini.entries.len(), 3);
        assert_eq!(ini.entries[1].section, "grid");
        assert_eq!(ini.entries[2].value, "100");
        assert_eq!(ini.entries[2].line, 5);
    }

    #[test]
    fn rejects_malformed_lines() {
        for bad in ["[grid\n", "[]\n", "justakey\n", " = 3\n", "a = 1\na = 2\n"] {
            assert!(
                matches!(Ini::parse(bad), Err(LabError::Parse(_))),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn applies_overrides() {
        let ini = Ini::parse(
            "[grid]\nr_max = 12\nn = 1200\n[initial]\nkind = rescaled_w\na = 1.1\nlam = 4\nr_cut = 3\n[diagnostics]\nvirial_radii = 1, 2\nmorawetz_r0 = off\n",
        )
        .unwrap();
        let c = RunConfig::preset("scattering")
            .unwrap()
            .apply(&ini)
            .unwrap();
        assert_eq!(c.grid.cells(), 1200);
        assert_eq!(
            c.initial,
            InitialData::RescaledW {
                a: 1.1,
                lam: 4.0,
                r_cut: 3.0
            }
        );
        assert_eq!(c.diagnostics.virial_radii, vec![1.0, 2.0]);
        assert_eq!(c.diagnostics.morawetz_r0, None);
        assert_eq!(c.solver.t_end, 20.0);
    }

    #[test]
    fn config_errors() {
        let base = || RunConfig::preset("scattering").unwrap();
        let cases = [
            "[grid]\nbogus = 1\n",
            "[nowhere]\nx = 1\n",
            "[solver]\ndt0 = fast\n",
            "[initial]\nkind = rescaled_w\na = 1\n",
            "[initial]\nkind = soliton\n",
            "[diagnostics]\nvirial_radii = 11\n",
            "[solver]\nrecord_stride = 0\n",
        ];
        for c in cases {
            let r = Ini::parse(c).and_then(|i| base().apply(&i));
            assert!(r.is_err(), "{c:?}");
        }
        assert!(RunConfig::preset("nope").is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::preset("scattering").unwrap();
        let b = RunConfig::preset("scattering").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut c = b.clone();
        c.solver.t_end = 19.0;
        assert_ne!(a.hash(), c.hash());
        // the canonical text parses back to the same config
        let back = RunConfig::preset("minimize")
            .unwrap()
            .apply(&Ini::parse(&a.canonical()).unwrap())
            .unwrap();
        assert_eq!(back.hash(), a.hash());
    }

    #[test]
    fn presets_build() {
        for p in PRESETS {
            let c = RunConfig::preset(p).unwrap();
            c.validate().unwrap();
            if p != "minimize" {
                c.initial.build(c.grid).unwrap();
            }
        }
        let scan = ScanConfig::default();
        assert_eq!(scan.points(), vec![(0.3, 1.0), (0.5, 1.0)]);
    }
}
