//! Matrix exchange formats.
//!
//! JSON: `{"n": 2, "entries": [[{"re": 1.0, "im": 0.0}, ...], ...]}`, row-major.
//! Plain text: one row per line, whitespace-separated tokens `a`, `a+bi`, `a-bi`
//! (`bi` alone is also accepted). Blank lines and lines starting with `#` are
//! skipped.

use crate::error::{Error, Result};
use crate::matrix::{c64, validate, ComplexMatrix};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Entry {
    pub re: f64,
    pub im: f64,
}

/// Serialized form of a square complex matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: usize,
    pub entries: Vec<Vec<Entry>>,
}

impl From<&ComplexMatrix> for MatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        let entries = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .map(|j| Entry { re: m[(i, j)].re, im: m[(i, j)].im })
                    .collect()
            })
            .collect();
        MatrixJson { n: m.nrows(), entries }
    }
}

impl TryFrom<MatrixJson> for ComplexMatrix {
    type Error = Error;

    fn try_from(j: MatrixJson) -> Result<Self> {
        if j.n == 0 {
            return Err(Error::Parse("n must be positive".into()));
        }
        if j.entries.len() != j.n {
            return Err(Error::Parse(format!("expected {} rows, found {}", j.n, j.entries.len())));
        }
        for (i, row) in j.entries.iter().enumerate() {
            if row.len() != j.n {
                return Err(Error::Parse(format!("row {i} has {} entries, expected {}", row.len(), j.n)));
            }
        }
        let m = ComplexMatrix::from_fn(j.n, j.n, |r, c| {
            let e = j.entries[r][c];
            c64(e.re, e.im)
        });
        validate(&m)?;
        Ok(m)
    }
}

/// Serializes to the JSON matrix format.
pub fn to_json(m: &ComplexMatrix) -> String {
    serde_json::to_string_pretty(&MatrixJson::from(m)).expect("matrix serialization cannot fail")
}

/// Parses the JSON matrix format.
pub fn from_json(s: &str) -> Result<ComplexMatrix> {
    let j: MatrixJson = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
    ComplexMatrix::try_from(j)
}

/// Parses one plain-text entry token.
pub fn parse_complex(tok: &str) -> Result<Complex64> {
    let bad = || Error::Parse(format!("bad complex token '{tok}'"));
    let t = tok.trim();
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|re| c64(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |s: &str| -> Result<f64> {
        match s {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => s.parse::<f64>().map_err(|_| bad()),
        }
    };
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().map_err(|_| bad())?;
            Ok(c64(re, imag(&body[k..])?))
        }
        None => Ok(c64(0.0, imag(body)?)),
    }
}

/// Formats an entry as a plain-text token.
pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format_real(z.re)
    } else if z.im.is_sign_negative() {
        format!("{}-{}i", format_real(z.re), format_real(-z.im))
    } else {
        format!("{}+{}i", format_real(z.re), format_real(z.im))
    }
}

/// Shortest round-trip form, with an exponent outside `[1e-4, 1e15)`.
pub fn format_real(v: f64) -> String {
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&v.abs()) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Parses the plain-text matrix format.
pub fn from_text(s: &str) -> Result<ComplexMatrix> {
    let rows: Vec<Vec<Complex64>> = s
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(parse_complex).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Parse(format!("row {i} has {} entries, expected {n}", r.len())));
    }
    let m = ComplexMatrix::from_fn(n, n, |i, j| rows[i][j]);
    validate(&m)?;
    Ok(m)
}

/// Formats in the plain-text matrix format.
pub fn to_text(m: &ComplexMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_complex(m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parses either format, choosing JSON when the input starts with `{`.
pub fn parse_matrix(s: &str) -> Result<ComplexMatrix> {
    if s.trim_start().starts_with('{') {
        from_json(s)
    } else {
        from_text(s)
    }
}

/// Reads a 0/1 matrix (any format) into integer form.
pub fn to_zero_one(m: &ComplexMatrix) -> Result<DMatrix<u8>> {
    let mut out = DMatrix::<u8>::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            out[(i, j)] = match (z.re, z.im) {
                (r, im) if r == 0.0 && im == 0.0 => 0,
                (r, im) if r == 1.0 && im == 0.0 => 1,
                _ => return Err(Error::Parse(format!("entry ({i}, {j}) is not 0 or 1"))),
            };
        }
    }
    Ok(out)
}
