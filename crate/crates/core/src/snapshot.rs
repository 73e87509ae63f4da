//! Plain-text field snapshots.
//!
//! ```text
//! # r_max=<v> n=<v>
//! r<TAB>re(u)<TAB>im(u)
//! ```
//! one line per node, 17 significant digits.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::radial::{Field, RadialGrid};

/// Formats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_snapshot<W: Write>(mut w: W, u: &Field) -> Result<()> {
    let grid = u.grid();
    writeln!(w, "# r_max={} n={}", fmt_f64(grid.r_max()), grid.cells())?;
    for (i, z) in u.values().iter().enumerate() {
        writeln!(
            w,
            "{}\t{}\t{}",
            fmt_f64(grid.r(i)),
            fmt_f64(z.re),
            fmt_f64(z.im)
        )?;
    }
    Ok(())
}

pub fn save_snapshot(path: impl AsRef<Path>, u: &Field) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_snapshot(&mut w, u)?;
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(r: R) -> Result<Field> {
    let mut lines = BufReader::new(r).lines();
    let header = lines
        .next()
        .ok_or_else(|| LabError::Parse("empty snapshot".into()))??;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| LabError::Parse(format!("bad snapshot header: {header}")))?;
    let mut r_max = None;
    let mut n = None;
    for tok in header.split_whitespace() {
        if let Some(v) = tok.strip_prefix("r_max=") {
            r_max = Some(
                v.parse::<f64>()
                    .map_err(|e| LabError::Parse(e.to_string()))?,
            );
        } else if let Some(v) = tok.strip_prefix("n=") {
            n = Some(
                v.parse::<usize>()
                    .map_err(|e| LabError::Parse(e.to_string()))?,
            );
        }
    }
    let (Some(r_max), Some(n)) = (r_max, n) else {
        return Err(LabError::Parse("snapshot header needs r_max and n".into()));
    };
    let grid = RadialGrid::new(r_max, n)?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(LabError::Parse(format!("expected 3 columns: {line}")));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| LabError::Parse(format!("{s}: {e}")))
        };
        values.push(Complex64::new(parse(cols[1])?, parse(cols[2])?));
    }
    Field::from_values(grid, values)
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Field> {
    read_snapshot(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn snapshot_round_trip_is_bit_exact(
            vals in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 17..40),
            r_max in 0.5f64..100.0,
        ) {
            let grid = RadialGrid::new(r_max, vals.len() - 1).unwrap();
            let u = Field::from_values(grid, vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let mut buf = Vec::new();
            write_snapshot(&mut buf, &u).unwrap();
            let back = read_snapshot(&buf[..]).unwrap();
            prop_assert_eq!(back.grid().r_max(), r_max);
            prop_assert_eq!(back.values(), u.values());
        }
    }

    #[test]
    fn header_format() {
        let grid = RadialGrid::new(2.0, 16).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &Field::zeros(grid)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# r_max=2.0000000000000000e0 n=16\n"));
        assert_eq!(text.lines().count(), 18);
    }

    #[test]
    fn rejects_wrong_length() {
        let text = "# r_max=1 n=16\n0\t1\t0\n";
        assert!(read_snapshot(text.as_bytes()).is_err());
    }
}
