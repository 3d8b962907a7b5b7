//! Named numerical tolerances with overridable defaults.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerances consulted by the analysis routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Entries with modulus at or below this are treated as zero.
    pub zero: f64,
    /// Maximum accepted `‖UU* − I‖_F`.
    pub unitary: f64,
    /// Moduli closer than this are merged into one color.
    pub cluster: f64,
    /// Maximum `‖X − X*‖_F` for a matrix to count as critical.
    pub crit: f64,
    /// Values below `−neg` count as strictly negative.
    pub neg: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { zero: 1e-12, unitary: 1e-10, cluster: 1e-8, crit: 1e-9, neg: 1e-8 }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 5] = ["zero", "unitary", "cluster", "crit", "neg"];

    /// Overrides one tolerance by name. The `tol_` prefix is optional.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidInput(format!("tolerance {name} must be a nonnegative number")));
        }
        let key = name.strip_prefix("tol_").unwrap_or(name);
        let slot = match key {
            "zero" => &mut self.zero,
            "unitary" => &mut self.unitary,
            "cluster" => &mut self.cluster,
            "crit" => &mut self.crit,
            "neg" => &mut self.neg,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown tolerance '{name}' (known: {})",
                    Self::NAMES.join(", ")
                )))
            }
        };
        *slot = value;
        Ok(())
    }

    /// Parses an override of the form `name=value`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (name, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("expected name=value, got '{spec}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad tolerance value '{value}'")))?;
        self.set(name.trim(), value)
    }
}
