//! Quantities with mandatory unit suffixes, e.g. `"950 nm"`, `"96 MHz"`,
//! `"3 mW"`. Frequencies given in Hz are cyclic and become angular rates
//! (×2π); `rad/s` is taken verbatim.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    /// Angular frequency or rate, stored in rad/s.
    Rate,
    Power,
    ElectricField,
    Susceptibility,
    /// Coupling per unit field, rad/s per V/m.
    RatePerField,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        const TWO_PI: f64 = 2.0 * PI;
        match self {
            Dimension::Length => &[
                ("m", 1.0),
                ("mm", 1e-3),
                ("um", 1e-6),
                ("µm", 1e-6),
                ("nm", 1e-9),
                ("pm", 1e-12),
            ],
            Dimension::Time => &[
                ("s", 1.0),
                ("ms", 1e-3),
                ("us", 1e-6),
                ("µs", 1e-6),
                ("ns", 1e-9),
                ("ps", 1e-12),
                ("fs", 1e-15),
            ],
            Dimension::Rate => &[
                ("rad/s", 1.0),
                ("1/s", 1.0),
                ("Hz", TWO_PI),
                ("kHz", TWO_PI * 1e3),
                ("MHz", TWO_PI * 1e6),
                ("GHz", TWO_PI * 1e9),
                ("THz", TWO_PI * 1e12),
            ],
            Dimension::Power => &[
                ("W", 1.0),
                ("mW", 1e-3),
                ("uW", 1e-6),
                ("µW", 1e-6),
                ("nW", 1e-9),
            ],
            Dimension::ElectricField => &[("V/m", 1.0), ("kV/m", 1e3), ("MV/m", 1e6)],
            Dimension::Susceptibility => &[("m/V", 1.0), ("pm/V", 1e-12)],
            Dimension::RatePerField => &[("rad/s per V/m", 1.0), ("Hz per V/m", TWO_PI)],
        }
    }

    /// Canonical SI unit used when echoing resolved values.
    pub fn si_unit(self) -> &'static str {
        self.units()[0].0
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Rate => "rate",
            Dimension::Power => "power",
            Dimension::ElectricField => "electric field",
            Dimension::Susceptibility => "susceptibility",
            Dimension::RatePerField => "coupling per field",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitError {
    #[error("`{0}`: missing unit suffix")]
    MissingUnit(String),
    #[error("`{input}`: unknown {dimension} unit `{unit}` (expected one of {expected})")]
    UnknownUnit {
        input: String,
        unit: String,
        dimension: Dimension,
        expected: String,
    },
    #[error("`{0}`: not a finite number")]
    BadNumber(String),
}

/// Parses `"<number> <unit>"` (whitespace optional) into SI units.
pub fn parse_quantity(input: &str, dimension: Dimension) -> Result<f64, UnitError> {
    let s = input.trim();
    let split = s
        .char_indices()
        .find(|&(i, ch)| {
            !(ch.is_ascii_digit()
                || ch == '.'
                || ch == '+'
                || ch == '-'
                || ((ch == 'e' || ch == 'E') && is_exponent(s, i)))
        })
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let unit = unit.trim();
    if num.is_empty() {
        return Err(UnitError::BadNumber(input.to_string()));
    }
    if unit.is_empty() {
        return Err(UnitError::MissingUnit(input.to_string()));
    }
    let value: f64 = num
        .parse()
        .map_err(|_| UnitError::BadNumber(input.to_string()))?;
    if !value.is_finite() {
        return Err(UnitError::BadNumber(input.to_string()));
    }
    let scale = dimension
        .units()
        .iter()
        .find(|(name, _)| *name == unit)
        .map(|&(_, scale)| scale)
        .ok_or_else(|| UnitError::UnknownUnit {
            input: input.to_string(),
            unit: unit.to_string(),
            dimension,
            expected: dimension
                .units()
                .iter()
                .map(|(u, _)| *u)
                .collect::<Vec<_>>()
                .join(", "),
        })?;
    Ok(value * scale)
}

// 'e' is an exponent marker only when it follows a digit and precedes a
// digit or sign; otherwise it starts a unit.
fn is_exponent(s: &str, i: usize) -> bool {
    let bytes = s.as_bytes();
    let before = i > 0 && (bytes[i - 1].is_ascii_digit() || bytes[i - 1] == b'.');
    let after = bytes
        .get(i + 1)
        .map(|b| b.is_ascii_digit() || *b == b'+' || *b == b'-')
        .unwrap_or(false);
    before && after
}

/// Shortest round-trip text for an SI value, e.g. `"1.3218617e15 rad/s"`.
pub fn format_quantity(value: f64, dimension: Dimension) -> String {
    format!("{} {}", fmt_f64(value), dimension.si_unit())
}

/// Shortest decimal representation that parses back to the same bits.
pub fn fmt_f64(value: f64) -> String {
    let plain = format!("{value}");
    let exp = format!("{value:e}");
    if exp.len() < plain.len() {
        exp
    } else {
        plain
    }
}
