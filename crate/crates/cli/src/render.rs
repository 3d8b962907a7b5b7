//! Output helpers shared by the subcommands.

use crate::{CmdResult, Failure};
use ahm_core::ComplexMatrix;
use serde::Serialize;

/// Version line that opens every CSV output.
pub const CSV_HEADER: &str = "# ahm-lab v1";

pub fn json<T: Serialize>(value: &T) -> CmdResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure { code: 4, message: e.to_string() })?;
    s.push('\n');
    Ok(s)
}

/// CSV with the version comment, optionally followed by `key=value` notes.
pub fn csv(notes: &str, columns: &[&str], rows: &[Vec<String>]) -> CmdResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Failure { code: 4, message: e.to_string() };
    w.write_record(columns).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let body = w.into_inner().map_err(|e| Failure { code: 4, message: e.to_string() })?;
    let mut out = String::from(CSV_HEADER);
    if !notes.is_empty() {
        out.push(' ');
        out.push_str(notes);
    }
    out.push('\n');
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

pub fn opt(v: Option<f64>) -> String {
    v.map(full).unwrap_or_default()
}

pub fn full(v: f64) -> String {
    ahm_core::io::format_real(v)
}

pub fn opt_short(v: Option<f64>) -> String {
    v.map(short).unwrap_or_else(|| "-".into())
}

/// Compact number for text tables.
pub fn short(v: f64) -> String {
    if v == 0.0 || (1e-3..1e6).contains(&v.abs()) {
        let s = format!("{v:.6}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.into()
        }
    } else {
        format!("{v:.3e}")
    }
}

pub fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn matrix_text(m: &ComplexMatrix) -> String {
    ahm_core::io::to_text(m)
}

/// Pads cells to common column widths.
pub fn table(columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = columns.iter().map(|c| c.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}", w = *w))
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(columns.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

pub fn no_csv(command: &str) -> Failure {
    Failure::input(format!("{command} has no CSV output; use --format json or text"))
}
