//! CSV and JSON artifacts.
//!
//! Field files have a header `x,re,im,abs` and one row per grid point, every
//! number written as `{:.16e}` (17 significant digits, exact round trip).
//! Masked points carry `NaN` in the value columns.

use std::fs;
use std::path::Path;

use nlsusy_core::{Complex64, Field, Grid1D, Mask, ResidualReport};
use serde::Serialize;

use crate::CliError;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

pub fn write_field(path: &Path, f: &Field, mask: Option<&Mask>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["x", "re", "im", "abs"]).map_err(|e| io_err(path, e))?;
    for (i, (x, z)) in f.grid().points().zip(f.values()).enumerate() {
        let z = if mask.is_some_and(|m| m.is_masked(i)) || !z.is_finite() {
            Complex64::new(f64::NAN, f64::NAN)
        } else {
            *z
        };
        w.write_record([num(x), num(z.re), num(z.im), num(z.norm())]).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Stacked states, header `t,x,re,im,abs`.
pub fn write_trajectory<'a>(path: &Path, states: impl Iterator<Item = (f64, &'a Field)>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["t", "x", "re", "im", "abs"]).map_err(|e| io_err(path, e))?;
    for (t, f) in states {
        for (x, z) in f.grid().points().zip(f.values()) {
            w.write_record([num(t), num(x), num(z.re), num(z.im), num(z.norm())])
                .map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads a field file; `x` must be uniform.
pub fn read_field(path: &Path) -> Result<Field, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = r.headers().map_err(|e| io_err(path, e))?;
    if header.iter().take(3).collect::<Vec<_>>() != ["x", "re", "im"] {
        return Err(io_err(path, "expected header x,re,im[,abs]"));
    }
    let mut xs = Vec::new();
    let mut vals = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let parse = |k: usize| -> Result<f64, CliError> {
            rec.get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| io_err(path, format!("row {}: bad number in column {k}", line + 2)))
        };
        xs.push(parse(0)?);
        vals.push(Complex64::new(parse(1)?, parse(2)?));
    }
    if xs.len() < 2 {
        return Err(io_err(path, "field has fewer than two rows"));
    }
    let grid = Grid1D::new(xs[0], xs[xs.len() - 1], xs.len())?;
    for (i, &x) in xs.iter().enumerate() {
        if (x - grid.x(i)).abs() > 1e-9 * (1.0 + x.abs()) {
            return Err(io_err(path, format!("x is not uniform at row {}", i + 2)));
        }
    }
    Ok(Field::new(grid, vals)?)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// A residual report with the tolerance it was judged against.
/// Scalar checks carry only `linf`.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub linf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask_fraction: Option<f64>,
    pub tol: f64,
    pub required: bool,
    pub pass: bool,
}

impl Verdict {
    pub fn scalar(value: f64, tol: f64) -> Self {
        Self { linf: value, l2: None, mask_fraction: None, tol, required: true, pass: value <= tol }
    }

    pub fn report(r: &ResidualReport, tol: f64) -> Self {
        Self { l2: Some(r.l2), mask_fraction: Some(r.mask_fraction), ..Self::scalar(r.linf, tol) }
    }

    /// Reported for information only.
    pub fn optional(mut self) -> Self {
        self.required = false;
        self
    }

    pub fn counts(&self) -> bool {
        self.pass || !self.required
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let g = Grid1D::new(-3.0, 7.0, 97).unwrap();
        let f = Field::from_fn(g, |x| Complex64::new(x.sin() / 3.0, (x * 1e-5).exp() * 1e-300));
        write_field(&p, &f, None).unwrap();
        let back = read_field(&p).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid().x(50), g.x(50));
    }

    #[test]
    fn masked_points_are_nan() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let g = Grid1D::new(0.0, 2.0, 9).unwrap();
        let mut m = vec![false; 9];
        m[1] = true;
        let mask = Mask::from_vec(m);
        write_field(&p, &Field::constant(g, Complex64::new(1.0, 0.0)), Some(&mask)).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let rows: Vec<_> = text.lines().collect();
        assert_eq!(rows[0], "x,re,im,abs");
        assert_eq!(rows[2], "2.5000000000000000e-1,NaN,NaN,NaN");
        assert_eq!(rows[1], "0.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e0");
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let rows = |xs: &[f64]| xs.iter().map(|x| format!("{x},1,0\n")).collect::<String>();
        let uniform = rows(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        fs::write(&p, format!("x,re,im\n{uniform}")).unwrap();
        assert_eq!(read_field(&p).unwrap().len(), 9);
        let bad = [
            format!("a,b,c\n{uniform}"),
            "x,re,im\n0,1,0\n".to_string(),
            format!("x,re,im\n{}", rows(&[0.0, 1.0, 2.0, 3.0, 4.5, 5.0, 6.0, 7.0, 8.0])),
            format!("x,re,im\n{uniform}9,1\n"),
            format!("x,re,im\n{uniform}9,1,zero\n"),
        ];
        for text in bad {
            fs::write(&p, &text).unwrap();
            assert!(matches!(read_field(&p), Err(CliError::Usage(_))), "{text:?}");
        }
        assert!(read_field(&dir.path().join("none.csv")).is_err());
    }

    #[test]
    fn optional_checks_never_fail_a_run() {
        let v = Verdict::scalar(2.0, 1.0);
        assert!(!v.pass && !v.counts());
        assert!(v.optional().counts());
        let j = serde_json::to_value(Verdict::scalar(0.5, 1.0)).unwrap();
        assert!(j.get("l2").is_none());
        assert_eq!(j["pass"], true);
    }
}
