//! Unit handling at the configuration boundary.
//!
//! Every quantity in a scenario document is either a bare number, taken to be in
//! the SI unit implied by the key, or a `{ value, unit }` table. Everything past
//! this module works in SI.

use serde::{Deserialize, Serialize};

use super::GRAVITY;

/// Physical dimension of a configured quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Force,
    Speed,
}

impl Dimension {
    pub fn si_unit(self) -> &'static str {
        match self {
            Dimension::Length => "m",
            Dimension::Force => "N",
            Dimension::Speed => "m/s",
        }
    }

    fn factor(self, unit: &str) -> Option<f64> {
        let f = match (self, unit) {
            (Dimension::Length, "m") => 1.0,
            (Dimension::Length, "cm") => 1e-2,
            (Dimension::Length, "mm") => 1e-3,
            (Dimension::Force, "N") => 1.0,
            (Dimension::Force, "kN") => 1e3,
            (Dimension::Force, "kgf") => GRAVITY,
            (Dimension::Speed, "m/s") => 1.0,
            (Dimension::Speed, "mm/s") => 1e-3,
            _ => return None,
        };
        Some(f)
    }
}

/// A configured quantity, optionally tagged with a unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Plain(f64),
    Tagged { value: f64, unit: String },
}

impl Quantity {
    pub fn si(value: f64, dim: Dimension) -> Self {
        Quantity::Tagged {
            value,
            unit: dim.si_unit().to_string(),
        }
    }

    /// Value in the SI unit of `dim`.
    pub fn to_si(&self, dim: Dimension) -> Result<f64, String> {
        match self {
            Quantity::Plain(v) => Ok(*v),
            Quantity::Tagged { value, unit } => dim
                .factor(unit)
                .map(|f| value * f)
                .ok_or_else(|| format!("unknown unit {unit:?} for a {dim:?} quantity")),
        }
    }

    /// The same quantity re-expressed in SI, tagged with the SI unit.
    pub fn normalized(&self, dim: Dimension) -> Result<Quantity, String> {
        self.to_si(dim).map(|v| Quantity::si(v, dim))
    }
}
