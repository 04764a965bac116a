//! Text format for sampled mode fields (`pcfield v1`).
//!
//! ```text
//! pcfield v1
//! # comments and blank lines are allowed in the header
//! shape 16 16 16
//! origin -1.5e-6 -1.5e-6 -1.5e-6
//! spacing 2e-7 2e-7 2e-7
//! omega 1.98e15
//! units raw
//! cells
//! 0 0 1.2 0 0 0 12.53
//! ...
//! ```
//!
//! `origin` is the center of the first cell and `spacing` the cell size per
//! axis, both in m. `omega` is in rad/s. `units` is `raw` (V/m) or
//! `per-photon`. After `cells` come exactly nx·ny·nz records, one per line,
//! in row-major order with x slowest and z fastest. Each record holds
//! `Re Ex  Im Ex  Re Ey  Im Ey  Re Ez  Im Ez  ε`.

use num_complex::Complex64;
use thiserror::Error;

use super::{Grid, ModeField};
use crate::units::fmt_f64;

/// Largest accepted cell count, to bound memory on untrusted input.
pub const MAX_CELLS: usize = 1 << 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldFileError {
    #[error("line 1: expected header `pcfield v1`, found `{0}`")]
    BadMagic(String),
    #[error("line 1: unsupported field file version `{0}` (this build reads v1)")]
    UnsupportedVersion(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing header key `{0}`")]
    MissingKey(&'static str),
    #[error("expected {expected} cell records, found {found}")]
    CellCount { expected: usize, found: usize },
    #[error("invalid field: {0}")]
    Invalid(String),
}

fn syntax(line: usize, message: impl Into<String>) -> FieldFileError {
    FieldFileError::Syntax {
        line,
        message: message.into(),
    }
}

fn numbers<const N: usize>(
    line: usize,
    key: &str,
    rest: &[&str],
) -> Result<[f64; N], FieldFileError> {
    if rest.len() != N {
        return Err(syntax(
            line,
            format!("`{key}` takes {N} values, got {}", rest.len()),
        ));
    }
    let mut out = [0.0f64; N];
    for (o, s) in out.iter_mut().zip(rest) {
        *o = s
            .parse()
            .map_err(|_| syntax(line, format!("`{s}` is not a number")))?;
        if !o.is_finite() {
            return Err(syntax(line, format!("`{s}` is not finite")));
        }
    }
    Ok(out)
}

pub fn parse_field_file(text: &str) -> Result<ModeField, FieldFileError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let first = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    let mut head = first.split_whitespace();
    if head.next() != Some("pcfield") {
        return Err(FieldFileError::BadMagic(first.chars().take(40).collect()));
    }
    match (head.next(), head.next()) {
        (Some("v1"), None) => {}
        (Some(v), _) => {
            return Err(FieldFileError::UnsupportedVersion(
                v.chars().take(20).collect(),
            ))
        }
        (None, _) => return Err(FieldFileError::BadMagic(first.chars().take(40).collect())),
    }

    let mut shape: Option<[usize; 3]> = None;
    let mut origin = None;
    let mut spacing = None;
    let mut omega = None;
    let mut per_photon = None;
    let mut in_cells = false;
    for (n, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let (key, rest) = (parts[0], &parts[1..]);
        match key {
            "shape" => {
                if rest.len() != 3 {
                    return Err(syntax(n, "`shape` takes 3 integers"));
                }
                let mut s = [0usize; 3];
                for (o, v) in s.iter_mut().zip(rest) {
                    *o = v
                        .parse()
                        .map_err(|_| syntax(n, format!("`{v}` is not a cell count")))?;
                }
                let total = s.iter().try_fold(1usize, |a, &b| a.checked_mul(b));
                match total {
                    Some(t) if t > 0 && t <= MAX_CELLS => {}
                    _ => {
                        return Err(syntax(
                            n,
                            format!("shape {s:?} must have between 1 and {MAX_CELLS} cells"),
                        ))
                    }
                }
                shape = Some(s);
            }
            "origin" => origin = Some(numbers::<3>(n, key, rest)?),
            "spacing" => spacing = Some(numbers::<3>(n, key, rest)?),
            "omega" => omega = Some(numbers::<1>(n, key, rest)?[0]),
            "units" => {
                per_photon = Some(match rest {
                    ["raw"] => false,
                    ["per-photon"] => true,
                    _ => return Err(syntax(n, "`units` must be `raw` or `per-photon`")),
                })
            }
            "cells" if rest.is_empty() => {
                in_cells = true;
                break;
            }
            other => {
                return Err(syntax(
                    n,
                    format!(
                        "unknown header key `{}`",
                        other.chars().take(40).collect::<String>()
                    ),
                ))
            }
        }
    }
    if !in_cells {
        return Err(FieldFileError::MissingKey("cells"));
    }
    let shape = shape.ok_or(FieldFileError::MissingKey("shape"))?;
    let origin = origin.ok_or(FieldFileError::MissingKey("origin"))?;
    let spacing = spacing.ok_or(FieldFileError::MissingKey("spacing"))?;
    let omega = omega.ok_or(FieldFileError::MissingKey("omega"))?;
    let per_photon = per_photon.ok_or(FieldFileError::MissingKey("units"))?;
    let grid =
        Grid::new(shape, origin, spacing).map_err(|e| FieldFileError::Invalid(e.to_string()))?;

    let expected = grid.len();
    let mut field = Vec::new();
    let mut eps = Vec::new();
    let mut found = 0usize;
    for (n, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        found += 1;
        if found > expected {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let v = numbers::<7>(n, "cell", &parts)?;
        field.push([
            Complex64::new(v[0], v[1]),
            Complex64::new(v[2], v[3]),
            Complex64::new(v[4], v[5]),
        ]);
        eps.push(v[6]);
    }
    if found != expected {
        return Err(FieldFileError::CellCount { expected, found });
    }
    ModeField::new(grid, field, eps, omega, per_photon)
        .map_err(|e| FieldFileError::Invalid(e.to_string()))
}

pub fn write_field_file(field: &ModeField) -> String {
    let g = &field.grid;
    let mut out = String::with_capacity(64 * g.len() + 256);
    let join = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ");
    out.push_str("pcfield v1\n");
    out.push_str(&format!(
        "shape {} {} {}\n",
        g.shape[0], g.shape[1], g.shape[2]
    ));
    out.push_str(&format!("origin {}\n", join(&g.origin)));
    out.push_str(&format!("spacing {}\n", join(&g.spacing)));
    out.push_str(&format!("omega {}\n", fmt_f64(field.omega)));
    out.push_str(if field.per_photon {
        "units per-photon\n"
    } else {
        "units raw\n"
    });
    out.push_str("cells\n");
    for (e, eps) in field.field.iter().zip(&field.permittivity) {
        out.push_str(&join(&[
            e[0].re, e[0].im, e[1].re, e[1].im, e[2].re, e[2].im, *eps,
        ]));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::overlap::gaussian_mode;
    use proptest::prelude::*;

    const SMALL: &str = "pcfield v1\nshape 1 1 2\norigin 0 0 0\nspacing 1e-7 1e-7 1e-7\nomega 1e15\nunits raw\ncells\n0 0 1 0 0 0 12\n0 0 0.5 0.25 0 0 12\n";

    #[test]
    fn parses_small_file() {
        let f = parse_field_file(SMALL).unwrap();
        assert_eq!(f.grid.shape, [1, 1, 2]);
        assert_eq!(f.field[1][1], Complex64::new(0.5, 0.25));
        assert!(!f.per_photon);
    }

    #[test]
    fn round_trip_is_exact() {
        let grid = Grid::centered_cube(5, 1.3e-6).unwrap();
        let f = gaussian_mode(
            grid,
            1.234e15,
            [1e-8, 0.0, -2e-8],
            [0.3e-6, 0.25e-6, 0.4e-6],
            2,
            11.9,
        )
        .unwrap();
        let back = parse_field_file(&write_field_file(&f)).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn diagnostics() {
        assert!(matches!(
            parse_field_file("hello"),
            Err(FieldFileError::BadMagic(_))
        ));
        assert!(matches!(
            parse_field_file("pcfield v2\n"),
            Err(FieldFileError::UnsupportedVersion(_))
        ));
        let short = SMALL.rsplit_once("0 0 0.5").unwrap().0;
        assert_eq!(
            parse_field_file(short),
            Err(FieldFileError::CellCount {
                expected: 2,
                found: 1
            })
        );
        let bad_units = SMALL.replace("units raw", "units photons");
        assert!(matches!(
            parse_field_file(&bad_units),
            Err(FieldFileError::Syntax { line: 6, .. })
        ));
        let no_omega = SMALL.replace("omega 1e15\n", "");
        assert_eq!(
            parse_field_file(&no_omega),
            Err(FieldFileError::MissingKey("omega"))
        );
        let huge = SMALL.replace("shape 1 1 2", "shape 100000 100000 100000");
        assert!(matches!(
            parse_field_file(&huge),
            Err(FieldFileError::Syntax { .. })
        ));
        let neg = SMALL.replace("spacing 1e-7", "spacing -1e-7");
        assert!(matches!(
            parse_field_file(&neg),
            Err(FieldFileError::Invalid(_))
        ));
    }

    proptest! {
        #[test]
        fn never_panics(s in "\\PC*") {
            let _ = parse_field_file(&s);
        }

        #[test]
        fn header_mutations_never_panic(line in 1usize..8, junk in "[ -~]{0,30}") {
            let mut lines: Vec<String> = SMALL.lines().map(String::from).collect();
            lines[line] = junk;
            let _ = parse_field_file(&lines.join("\n"));
        }
    }
}
