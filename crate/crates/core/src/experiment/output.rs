use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::radial::RadialGrid;
use crate::snapshot::fmt_f64;

pub const OUT_ENV: &str = "CNLS_LAB_OUT";
pub const DEFAULT_ROOT: &str = "cnls-out";
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `CNLS_LAB_OUT`, else the configured root, else `cnls-out`.
pub fn output_root(configured: Option<&Path>) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => configured
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT)),
    }
}

/// Provenance lines written at the top of every CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMeta {
    pub config_hash: String,
    pub grid: RadialGrid,
}

impl CsvMeta {
    pub fn header_lines(&self) -> Vec<String> {
        vec![
            format!("# cnls-lab {CODE_VERSION}"),
            format!("# config_sha256={}", self.config_hash),
            format!(
                "# grid r_max={} n={}",
                fmt_f64(self.grid.r_max()),
                self.grid.cells()
            ),
        ]
    }
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(usize),
    S(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::I(k) => k.to_string(),
            Cell::S(s) => s.replace([',', '\n'], ";"),
            Cell::Empty => String::new(),
        }
    }
}

pub fn render_row(cells: &[Cell]) -> String {
    cells.iter().map(Cell::render).collect::<Vec<_>>().join(",")
}

pub struct CsvWriter {
    w: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, meta: &CsvMeta, columns: &[&str]) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        for l in meta.header_lines() {
            writeln!(w, "{l}")?;
        }
        writeln!(w, "{}", columns.join(","))?;
        Ok(Self { w })
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<()> {
        writeln!(self.w, "{}", render_row(cells))?;
        Ok(())
    }

    pub fn comment(&mut self, text: &str) -> Result<()> {
        writeln!(self.w, "# {text}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// Appends whole lines and syncs each one, so a killed process leaves
/// only complete rows behind.
pub struct AppendLog {
    f: File,
}

impl AppendLog {
    pub fn open(path: &Path) -> Result<Self> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { f })
    }

    pub fn line(&mut self, text: &str) -> Result<()> {
        let mut buf = text.as_bytes().to_vec();
        buf.push(b'\n');
        self.f.write_all(&buf)?;
        self.f.sync_data()?;
        Ok(())
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_render_at_full_precision() {
        let row = render_row(&[Cell::F(0.1), Cell::I(7), Cell::S("a,b".into()), Cell::Empty]);
        assert_eq!(row, "1.0000000000000001e-1,7,a;b,");
        let back: f64 = row.split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn header_carries_hash_grid_and_version() {
        let meta = CsvMeta {
            config_hash: "ab".repeat(32),
            grid: RadialGrid::new(30.0, 3000).unwrap(),
        };
        let h = meta.header_lines();
        assert!(h[0].contains(CODE_VERSION));
        assert!(h[1].ends_with(&"ab".repeat(32)));
        assert!(h[2].contains("n=3000"));
    }

    #[test]
    fn append_log_accumulates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.csv");
        AppendLog::open(&p).unwrap().line("a").unwrap();
        AppendLog::open(&p).unwrap().line("b").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "a\nb\n");
    }
}
