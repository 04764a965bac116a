//! Per-photon normalization of sampled cavity fields, the χ⁽²⁾ overlap
//! integral that sets g₂, and the pump power ↔ field relation.
//!
//! Fields are cell-centered on a rectilinear grid and integrals use the
//! midpoint rule. The nonlinear material occupies the cells where the
//! permittivity of mode a exceeds 1.

mod fieldfile;

pub use fieldfile::{parse_field_file, write_field_file, FieldFileError};

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::constants::{LIGHT_SPEED, REDUCED_PLANCK, VACUUM_PERMITTIVITY};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OverlapError {
    #[error("field has zero energy; cannot normalize")]
    ZeroField,
    #[error("grids differ: {left:?} vs {right:?}")]
    GridMismatch { left: [usize; 3], right: [usize; 3] },
    #[error("field {0} is not normalized per photon")]
    NotNormalized(&'static str),
    #[error("invalid field: {0}")]
    InvalidField(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub shape: [usize; 3],
    /// Center of cell (0, 0, 0) in m.
    pub origin: [f64; 3],
    pub spacing: [f64; 3],
}

impl Grid {
    pub fn new(
        shape: [usize; 3],
        origin: [f64; 3],
        spacing: [f64; 3],
    ) -> Result<Self, OverlapError> {
        if shape.iter().any(|&n| n == 0) {
            return Err(OverlapError::InvalidField(format!("empty grid {shape:?}")));
        }
        if shape
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .is_none()
        {
            return Err(OverlapError::InvalidField(format!(
                "grid {shape:?} too large"
            )));
        }
        if !spacing.iter().all(|d| d.is_finite() && *d > 0.0) {
            return Err(OverlapError::InvalidField(format!(
                "spacings must be > 0, got {spacing:?}"
            )));
        }
        if !origin.iter().all(|o| o.is_finite()) {
            return Err(OverlapError::InvalidField("origin must be finite".into()));
        }
        Ok(Grid {
            shape,
            origin,
            spacing,
        })
    }

    /// Cube of n³ cells centered on the origin with edge length `size`.
    pub fn centered_cube(n: usize, size: f64) -> Result<Self, OverlapError> {
        let d = size / n as f64;
        let o = -0.5 * size + 0.5 * d;
        Self::new([n; 3], [o; 3], [d; 3])
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Row-major index with x slowest and z fastest.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.shape[1] + j) * self.shape[2] + k
    }

    pub fn center(&self, idx: usize) -> [f64; 3] {
        let k = idx % self.shape[2];
        let j = (idx / self.shape[2]) % self.shape[1];
        let i = idx / (self.shape[1] * self.shape[2]);
        [
            self.origin[0] + self.spacing[0] * i as f64,
            self.origin[1] + self.spacing[1] * j as f64,
            self.origin[2] + self.spacing[2] * k as f64,
        ]
    }

    pub fn congruent(&self, other: &Grid) -> bool {
        let close =
            |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        self.shape == other.shape
            && (0..3).all(|d| close(self.spacing[d], other.spacing[d]))
            && (0..3).all(|d| (self.origin[d] - other.origin[d]).abs() <= 1e-9 * self.spacing[d])
    }

    fn slab_len(&self) -> usize {
        self.shape[1] * self.shape[2]
    }
}

/// Complex vector field (E_x, E_y, E_z) and relative permittivity per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField {
    pub grid: Grid,
    pub field: Vec<[Complex64; 3]>,
    pub permittivity: Vec<f64>,
    /// Angular frequency of the mode (rad/s).
    pub omega: f64,
    /// Whether the field is already in per-photon units.
    pub per_photon: bool,
}

impl ModeField {
    pub fn new(
        grid: Grid,
        field: Vec<[Complex64; 3]>,
        permittivity: Vec<f64>,
        omega: f64,
        per_photon: bool,
    ) -> Result<Self, OverlapError> {
        let n = grid.len();
        if field.len() != n || permittivity.len() != n {
            return Err(OverlapError::InvalidField(format!(
                "{} field and {} permittivity cells for a grid of {n}",
                field.len(),
                permittivity.len()
            )));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(OverlapError::InvalidField(format!(
                "ω must be > 0, got {omega}"
            )));
        }
        if !permittivity.iter().all(|e| e.is_finite() && *e > 0.0) {
            return Err(OverlapError::InvalidField(
                "permittivity must be finite and > 0".into(),
            ));
        }
        if !field
            .iter()
            .flatten()
            .all(|c| c.re.is_finite() && c.im.is_finite())
        {
            return Err(OverlapError::InvalidField(
                "field values must be finite".into(),
            ));
        }
        Ok(ModeField {
            grid,
            field,
            permittivity,
            omega,
            per_photon,
        })
    }

    /// Samples `f(r) -> (E, ε)` at every cell center.
    pub fn from_fn(
        grid: Grid,
        omega: f64,
        f: impl Fn([f64; 3]) -> ([Complex64; 3], f64),
    ) -> Result<Self, OverlapError> {
        let (field, permittivity) = (0..grid.len()).map(|idx| f(grid.center(idx))).unzip();
        Self::new(grid, field, permittivity, omega, false)
    }

    /// ∫ε₀ε(r)|E(r)|² dr.
    pub fn energy(&self) -> f64 {
        let partial = slab_sums(&self.grid, |idx| {
            let e = &self.field[idx];
            self.permittivity[idx] * (e[0].norm_sqr() + e[1].norm_sqr() + e[2].norm_sqr())
        });
        VACUUM_PERMITTIVITY * partial * self.grid.cell_volume()
    }

    pub fn scaled(&self, factor: f64) -> ModeField {
        ModeField {
            field: self
                .field
                .iter()
                .map(|e| [e[0] * factor, e[1] * factor, e[2] * factor])
                .collect(),
            ..self.clone()
        }
    }
}

/// Rescales the field so that ∫ε₀ε|E|²dr = ħω/2. Returns the scaled field
/// and the factor applied.
pub fn normalize_per_photon(field: &ModeField) -> Result<(ModeField, f64), OverlapError> {
    let energy = field.energy();
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(OverlapError::ZeroField);
    }
    let scale = (0.5 * REDUCED_PLANCK * field.omega / energy).sqrt();
    let mut out = field.scaled(scale);
    out.per_photon = true;
    Ok((out, scale))
}

/// Second-order susceptibility tensor χ_ijk (m/V).
#[derive(Debug, Clone, PartialEq)]
pub enum Chi2Tensor {
    /// Nonzero only for i, j, k all distinct, all equal to χ_xyz.
    Zincblende(f64),
    Full(Box<[[[f64; 3]; 3]; 3]>),
}

impl Chi2Tensor {
    pub fn component(&self, i: usize, j: usize, k: usize) -> f64 {
        match self {
            Chi2Tensor::Zincblende(chi) => {
                if i != j && j != k && i != k {
                    *chi
                } else {
                    0.0
                }
            }
            Chi2Tensor::Full(t) => t[i][j][k],
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Chi2Tensor::Zincblende(chi) => chi.abs(),
            Chi2Tensor::Full(t) => t
                .iter()
                .flatten()
                .flatten()
                .fold(0.0, |m, v| m.max(v.abs())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chi2Material {
    pub name: String,
    pub tensor: Chi2Tensor,
    /// (wavelength in m, refractive index) pairs.
    pub indices: Vec<(f64, f64)>,
}

impl Chi2Material {
    pub fn gaas() -> Self {
        Chi2Material {
            name: "GaAs".into(),
            tensor: Chi2Tensor::Zincblende(550e-12),
            indices: vec![(950e-9, 3.54), (1425e-9, 3.38)],
        }
    }

    /// Indices are approximate bulk values.
    pub fn gap() -> Self {
        Chi2Material {
            name: "GaP".into(),
            tensor: Chi2Tensor::Zincblende(320e-12),
            indices: vec![(637e-9, 3.31), (950e-9, 3.13)],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gaas" => Some(Self::gaas()),
            "gap" => Some(Self::gap()),
            _ => None,
        }
    }

    /// Tabulated index within 0.5 nm of `wavelength`.
    pub fn index_at(&self, wavelength: f64) -> Option<f64> {
        self.indices
            .iter()
            .find(|(w, _)| (w - wavelength).abs() < 0.5e-9)
            .map(|(_, n)| *n)
    }

    pub fn chi_xyz(&self) -> f64 {
        self.tensor.component(0, 1, 2)
    }
}

/// Result of an overlap integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2 {
    /// g₂ in rad/s.
    pub g2: Complex64,
    /// (ε₀/ħ)∫Σ|χ_ijk||E_a,i||E_b,j||E_c,k| dr, the size the integral would
    /// have without any cancellation.
    pub scale: f64,
}

fn nonlinear(eps: f64) -> bool {
    eps > 1.0 + 1e-9
}

fn check_pair(a: &ModeField, c: &ModeField) -> Result<(), OverlapError> {
    if !a.grid.congruent(&c.grid) {
        return Err(OverlapError::GridMismatch {
            left: a.grid.shape,
            right: c.grid.shape,
        });
    }
    if !a.per_photon {
        return Err(OverlapError::NotNormalized("a"));
    }
    if !c.per_photon {
        return Err(OverlapError::NotNormalized("c"));
    }
    Ok(())
}

/// Sums `f(idx)` over the grid slab by slab (fixed x index). Slabs run in
/// parallel but are added in index order, so the result does not depend on
/// the number of worker threads.
fn slab_sums<T>(grid: &Grid, f: impl Fn(usize) -> T + Sync) -> T
where
    T: Send + std::iter::Sum<T> + Copy,
{
    let slab = grid.slab_len();
    let partial: Vec<T> = (0..grid.shape[0])
        .into_par_iter()
        .map(|i| (i * slab..(i + 1) * slab).map(&f).sum())
        .collect();
    partial.into_iter().sum()
}

/// g₂ = −(ε₀/ħ)∫Σ χ_ijk E*_{a,i}(E_{b,j}E_{c,k} + E_{c,j}E_{b,k}) dr with the
/// sum over unordered index pairs {j, k} (the j = k term counted once), so
/// that each distinct field product appears once. `pump` is in V/m; `a` and
/// `c` must be per-photon normalized.
pub fn g2_full(
    a: &ModeField,
    pump: &ModeField,
    c: &ModeField,
    material: &Chi2Material,
) -> Result<G2, OverlapError> {
    check_pair(a, c)?;
    if !a.grid.congruent(&pump.grid) {
        return Err(OverlapError::GridMismatch {
            left: a.grid.shape,
            right: pump.grid.shape,
        });
    }
    let chi = &material.tensor;
    let cell = |idx: usize| -> (Complex64, f64) {
        if !nonlinear(a.permittivity[idx]) {
            return (Complex64::new(0.0, 0.0), 0.0);
        }
        let (ea, eb, ec) = (&a.field[idx], &pump.field[idx], &c.field[idx]);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        for i in 0..3 {
            let ai = ea[i].conj();
            for j in 0..3 {
                for k in j..3 {
                    let x = chi.component(i, j, k);
                    if x == 0.0 {
                        continue;
                    }
                    let prod = if j == k {
                        eb[j] * ec[k]
                    } else {
                        eb[j] * ec[k] + ec[j] * eb[k]
                    };
                    acc += ai * prod * x;
                    mag += x.abs()
                        * ai.norm()
                        * (eb[j].norm() * ec[k].norm()
                            + if j == k {
                                0.0
                            } else {
                                ec[j].norm() * eb[k].norm()
                            });
                }
            }
        }
        (acc, mag)
    };
    let (sum, mag) = slab_sums(&a.grid, |idx| Pair(cell(idx))).0;
    let pref = VACUUM_PERMITTIVITY / REDUCED_PLANCK * a.grid.cell_volume();
    Ok(G2 {
        g2: -sum * pref,
        scale: mag * pref,
    })
}

#[derive(Clone, Copy)]
struct Pair((Complex64, f64));

impl std::iter::Sum for Pair {
    fn sum<I: Iterator<Item = Pair>>(iter: I) -> Pair {
        iter.fold(Pair((Complex64::new(0.0, 0.0), 0.0)), |a, b| {
            Pair((a.0 .0 + b.0 .0, a.0 .1 + b.0 .1))
        })
    }
}

/// Classical pump beam polarized along x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpField {
    /// E_{b,x} in V/m.
    pub amplitude: f64,
    pub wavelength: f64,
    /// P_b in W.
    pub power: f64,
    pub focal_radius: f64,
}

impl PumpField {
    pub fn from_power(
        power: f64,
        focal_radius: f64,
        wavelength: f64,
    ) -> Result<Self, OverlapError> {
        if !(power >= 0.0 && power.is_finite()) || !(focal_radius > 0.0 && focal_radius.is_finite())
        {
            return Err(OverlapError::InvalidField(format!(
                "pump needs P >= 0 and r > 0, got P = {power}, r = {focal_radius}"
            )));
        }
        Ok(PumpField {
            amplitude: pump_field_from_power(power, focal_radius),
            wavelength,
            power,
            focal_radius,
        })
    }

    pub fn from_amplitude(
        amplitude: f64,
        focal_radius: f64,
        wavelength: f64,
    ) -> Result<Self, OverlapError> {
        if !(amplitude >= 0.0 && amplitude.is_finite())
            || !(focal_radius > 0.0 && focal_radius.is_finite())
        {
            return Err(OverlapError::InvalidField(format!(
                "pump needs E >= 0 and r > 0, got E = {amplitude}, r = {focal_radius}"
            )));
        }
        Ok(PumpField {
            amplitude,
            wavelength,
            power: power_from_pump_field(amplitude, focal_radius),
            focal_radius,
        })
    }
}

/// E_{b,x} = √(4P_b/(ε₀cπr²)).
pub fn pump_field_from_power(power: f64, focal_radius: f64) -> f64 {
    (4.0 * power / (VACUUM_PERMITTIVITY * LIGHT_SPEED * PI * focal_radius * focal_radius)).sqrt()
}

/// P_b = ε₀cπr²E²/4.
pub fn power_from_pump_field(amplitude: f64, focal_radius: f64) -> f64 {
    VACUUM_PERMITTIVITY * LIGHT_SPEED * PI * focal_radius * focal_radius * amplitude * amplitude
        / 4.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformPumpOverlap {
    /// g₂ at the given pump (rad/s).
    pub g2: Complex64,
    /// g₂ per unit pump field (rad/s per V/m).
    pub g2_per_field: Complex64,
    /// |∫Σχ_{i x k}E*_{a,i}E_{c,k}dr| / (χ_max √(∫|E_a|²dr ∫|E_c|²dr)) over
    /// the nonlinear region.
    pub overlap_coefficient: f64,
    pub pump_field: f64,
}

/// g₂ = −(ε₀E_{b,x}/ħ)∫Σ χ_{i x k}E*_{a,i}E_{c,k} dr for a pump that is
/// constant over the cavity.
pub fn g2_uniform_pump(
    a: &ModeField,
    c: &ModeField,
    pump: &PumpField,
    material: &Chi2Material,
) -> Result<UniformPumpOverlap, OverlapError> {
    check_pair(a, c)?;
    let chi = &material.tensor;
    let cell = |idx: usize| -> Overlap3 {
        if !nonlinear(a.permittivity[idx]) {
            return Overlap3::default();
        }
        let (ea, ec) = (&a.field[idx], &c.field[idx]);
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..3 {
            for k in 0..3 {
                let x = chi.component(i, 0, k);
                if x != 0.0 {
                    acc += ea[i].conj() * ec[k] * x;
                }
            }
        }
        let na: f64 = ea.iter().map(|v| v.norm_sqr()).sum();
        let nc: f64 = ec.iter().map(|v| v.norm_sqr()).sum();
        Overlap3 { acc, na, nc }
    };
    let total = slab_sums(&a.grid, cell);
    let dv = a.grid.cell_volume();
    let per_field = -total.acc * (VACUUM_PERMITTIVITY / REDUCED_PLANCK * dv);
    let chi_max = chi.max_abs();
    let denom = chi_max * (total.na * total.nc).sqrt();
    let overlap_coefficient = if denom > 0.0 {
        total.acc.norm() / denom
    } else {
        0.0
    };
    Ok(UniformPumpOverlap {
        g2: per_field * pump.amplitude,
        g2_per_field: per_field,
        overlap_coefficient,
        pump_field: pump.amplitude,
    })
}

#[derive(Clone, Copy, Default)]
struct Overlap3 {
    acc: Complex64,
    na: f64,
    nc: f64,
}

impl std::iter::Sum for Overlap3 {
    fn sum<I: Iterator<Item = Overlap3>>(iter: I) -> Overlap3 {
        iter.fold(Overlap3::default(), |s, o| Overlap3 {
            acc: s.acc + o.acc,
            na: s.na + o.na,
            nc: s.nc + o.nc,
        })
    }
}

/// Spatially uniform x-polarized pump sampled on `grid`, for use with
/// [`g2_full`].
pub fn uniform_pump_profile(
    grid: Grid,
    pump: &PumpField,
    omega: f64,
) -> Result<ModeField, OverlapError> {
    let e = [
        Complex64::new(pump.amplitude, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    ];
    ModeField::new(
        grid,
        vec![e; grid.len()],
        vec![1.0; grid.len()],
        omega,
        false,
    )
}

/// Gaussian field E_axis = exp(−Σ(r−r₀)²/(2w²)) in uniform permittivity,
/// unnormalized.
pub fn gaussian_mode(
    grid: Grid,
    omega: f64,
    center: [f64; 3],
    waist: [f64; 3],
    axis: usize,
    permittivity: f64,
) -> Result<ModeField, OverlapError> {
    if axis > 2 {
        return Err(OverlapError::InvalidField(format!(
            "axis {axis} out of range"
        )));
    }
    ModeField::from_fn(grid, omega, |r| {
        let q: f64 = (0..3)
            .map(|d| (r[d] - center[d]).powi(2) / (2.0 * waist[d] * waist[d]))
            .sum();
        let mut e = [Complex64::new(0.0, 0.0); 3];
        e[axis] = Complex64::new((-q).exp(), 0.0);
        (e, permittivity)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const OMEGA_A: f64 = 1.98e15;
    const OMEGA_C: f64 = 1.32e15;
    const EPS: f64 = 12.5;

    #[test]
    fn uniform_box_normalization() {
        let grid = Grid::centered_cube(8, 1e-6).unwrap();
        let f = ModeField::from_fn(grid, OMEGA_A, |_| {
            (
                [
                    Complex64::new(0.0, 0.0),
                    Complex64::new(3.0, 0.0),
                    Complex64::new(0.0, 0.0),
                ],
                EPS,
            )
        })
        .unwrap();
        let (n, _) = normalize_per_photon(&f).unwrap();
        let expect = REDUCED_PLANCK * OMEGA_A / (2.0 * VACUUM_PERMITTIVITY * EPS * 1e-18);
        for e in &n.field {
            assert_relative_eq!(e[1].norm_sqr(), expect, max_relative = 1e-12);
        }
        let (_, again) = normalize_per_photon(&n).unwrap();
        assert!((again - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_normalization_matches_closed_form() {
        let w = 0.3e-6;
        let grid = Grid::centered_cube(64, 12.0 * w).unwrap();
        let f = gaussian_mode(grid, OMEGA_A, [0.0; 3], [w; 3], 1, EPS).unwrap();
        let (_, scale) = normalize_per_photon(&f).unwrap();
        // ∫exp(−r²/w²)dr = (πw²)^{3/2}
        let oracle = (REDUCED_PLANCK * OMEGA_A
            / (2.0 * VACUUM_PERMITTIVITY * EPS * (PI * w * w).powf(1.5)))
        .sqrt();
        assert_relative_eq!(scale, oracle, max_relative = 1e-6);
    }

    #[test]
    fn zero_field_rejected() {
        let grid = Grid::centered_cube(4, 1e-6).unwrap();
        let f =
            ModeField::from_fn(grid, OMEGA_A, |_| ([Complex64::new(0.0, 0.0); 3], EPS)).unwrap();
        assert_eq!(normalize_per_photon(&f), Err(OverlapError::ZeroField));
    }

    fn pair(grid: Grid, shift: f64) -> (ModeField, ModeField) {
        let a = gaussian_mode(grid, OMEGA_A, [0.0; 3], [0.3e-6; 3], 1, EPS).unwrap();
        let c = gaussian_mode(grid, OMEGA_C, [shift, 0.0, 0.0], [0.4e-6; 3], 2, EPS).unwrap();
        (
            normalize_per_photon(&a).unwrap().0,
            normalize_per_photon(&c).unwrap().0,
        )
    }

    #[test]
    fn pump_field_examples() {
        assert_eq!(pump_field_from_power(0.0, 2.85e-6), 0.0);
        let e = pump_field_from_power(3e-3, 2.85e-6);
        // √(4·3e-3/(ε₀·c·π·(2.85e-6)²))
        let oracle = (0.012 / (8.8541878188e-12 * 299792458.0 * PI * 2.85e-6 * 2.85e-6)).sqrt();
        assert_relative_eq!(e, oracle, max_relative = 1e-14);
        assert_relative_eq!(e, 4.2e5, max_relative = 5e-3);
        assert_relative_eq!(
            power_from_pump_field(e, 2.85e-6),
            3e-3,
            max_relative = 1e-12
        );
    }

    proptest! {
        #[test]
        fn pump_round_trip(p in 0.0f64..1.0, r in 1e-7f64..1e-4) {
            let back = power_from_pump_field(pump_field_from_power(p, r), r);
            prop_assert!((back - p).abs() <= 1e-12 * p.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn full_and_uniform_agree() {
        let grid = Grid::centered_cube(24, 3e-6).unwrap();
        let (a, c) = pair(grid, 0.1e-6);
        let pump = PumpField::from_power(3e-3, 2.85e-6, 2.85e-6).unwrap();
        let profile = uniform_pump_profile(grid, &pump, 6.6e14).unwrap();
        let gaas = Chi2Material::gaas();
        let full = g2_full(&a, &profile, &c, &gaas).unwrap().g2;
        let uni = g2_uniform_pump(&a, &c, &pump, &gaas).unwrap();
        assert!((full - uni.g2).norm() <= 1e-10 * uni.g2.norm());
        assert!(uni.overlap_coefficient > 0.0 && uni.overlap_coefficient <= 1.0);
    }

    #[test]
    fn pump_linearity_and_zero_power() {
        let grid = Grid::centered_cube(16, 3e-6).unwrap();
        let (a, c) = pair(grid, 0.0);
        let gaas = Chi2Material::gaas();
        let p1 = PumpField::from_amplitude(1e5, 2.85e-6, 2.85e-6).unwrap();
        let p2 = PumpField::from_amplitude(2e5, 2.85e-6, 2.85e-6).unwrap();
        let g1 = g2_full(
            &a,
            &uniform_pump_profile(grid, &p1, 1.0).unwrap(),
            &c,
            &gaas,
        )
        .unwrap()
        .g2;
        let g2 = g2_full(
            &a,
            &uniform_pump_profile(grid, &p2, 1.0).unwrap(),
            &c,
            &gaas,
        )
        .unwrap()
        .g2;
        assert!((g2 - 2.0 * g1).norm() < 1e-12 * g1.norm());
        let zero = PumpField::from_power(0.0, 2.85e-6, 2.85e-6).unwrap();
        assert_eq!(
            g2_uniform_pump(&a, &c, &zero, &gaas).unwrap().g2.norm(),
            0.0
        );
        // g₂ ∝ √P
        let q1 = PumpField::from_power(1e-3, 2.85e-6, 2.85e-6).unwrap();
        let q4 = PumpField::from_power(4e-3, 2.85e-6, 2.85e-6).unwrap();
        let r = g2_uniform_pump(&a, &c, &q4, &gaas).unwrap().g2.norm()
            / g2_uniform_pump(&a, &c, &q1, &gaas).unwrap().g2.norm();
        assert_relative_eq!(r, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn odd_parity_cancels() {
        let grid = Grid::centered_cube(20, 3e-6).unwrap();
        let a = normalize_per_photon(
            &gaussian_mode(grid, OMEGA_A, [0.0; 3], [0.3e-6; 3], 1, EPS).unwrap(),
        )
        .unwrap()
        .0;
        let c = ModeField::from_fn(grid, OMEGA_C, |r| {
            let g = (-(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]) / (2.0 * 0.16e-12)).exp();
            (
                [
                    Complex64::new(0.0, 0.0),
                    Complex64::new(0.0, 0.0),
                    Complex64::new(r[0] / 0.4e-6 * g, 0.0),
                ],
                EPS,
            )
        })
        .unwrap();
        let c = normalize_per_photon(&c).unwrap().0;
        let pump = uniform_pump_profile(
            grid,
            &PumpField::from_amplitude(1e5, 1e-6, 1e-6).unwrap(),
            1.0,
        )
        .unwrap();
        let r = g2_full(&a, &pump, &c, &Chi2Material::gaas()).unwrap();
        assert!(r.scale > 0.0);
        assert!(
            r.g2.norm() < 1e-12 * r.scale,
            "{} vs {}",
            r.g2.norm(),
            r.scale
        );
    }

    #[test]
    fn swap_symmetry_for_real_fields() {
        let grid = Grid::centered_cube(16, 3e-6).unwrap();
        let (a, c) = pair(grid, 0.2e-6);
        let pump = uniform_pump_profile(
            grid,
            &PumpField::from_amplitude(1e5, 1e-6, 1e-6).unwrap(),
            1.0,
        )
        .unwrap();
        let gaas = Chi2Material::gaas();
        let ac = g2_full(&a, &pump, &c, &gaas).unwrap().g2;
        let ca = g2_full(&c, &pump, &a, &gaas).unwrap().g2;
        assert!((ac - ca.conj()).norm() < 1e-12 * ac.norm());
    }

    #[test]
    fn sign_alternation_reduces_overlap() {
        let grid = Grid::centered_cube(24, 3e-6).unwrap();
        let a = normalize_per_photon(
            &gaussian_mode(grid, OMEGA_A, [0.0; 3], [0.4e-6; 3], 1, EPS).unwrap(),
        )
        .unwrap()
        .0;
        let lobe = |sign: bool| {
            ModeField::from_fn(grid, OMEGA_C, move |r| {
                let g = (-(r[1] * r[1] + r[2] * r[2]) / (2.0 * 0.16e-12)).exp();
                let x = (-(r[0] - 0.3e-6).powi(2) / (2.0 * 0.04e-12)).exp();
                let y = (-(r[0] + 0.3e-6).powi(2) / (2.0 * 0.04e-12)).exp();
                let v = if sign { x - 0.5 * y } else { x + 0.5 * y };
                (
                    [
                        Complex64::new(0.0, 0.0),
                        Complex64::new(0.0, 0.0),
                        Complex64::new(v * g, 0.0),
                    ],
                    EPS,
                )
            })
            .map(|f| normalize_per_photon(&f).unwrap().0)
            .unwrap()
        };
        let gaas = Chi2Material::gaas();
        let pump = PumpField::from_power(1e-3, 2.85e-6, 2.85e-6).unwrap();
        let alt = g2_uniform_pump(&a, &lobe(true), &pump, &gaas).unwrap();
        let rect = g2_uniform_pump(&a, &lobe(false), &pump, &gaas).unwrap();
        assert!(alt.g2.norm() < rect.g2.norm());
        // the same g₂ is recovered by raising the pump power by the squared ratio
        let boost = (rect.g2.norm() / alt.g2.norm()).powi(2);
        let stronger = PumpField::from_power(1e-3 * boost, 2.85e-6, 2.85e-6).unwrap();
        let comp = g2_uniform_pump(&a, &lobe(true), &stronger, &gaas).unwrap();
        assert_relative_eq!(comp.g2.norm(), rect.g2.norm(), max_relative = 1e-12);
    }

    #[test]
    fn grid_mismatch_and_normalization_required() {
        let g1 = Grid::centered_cube(8, 3e-6).unwrap();
        let g2 = Grid::centered_cube(10, 3e-6).unwrap();
        let (a, _) = pair(g1, 0.0);
        let (_, c) = pair(g2, 0.0);
        let pump = PumpField::from_amplitude(1.0, 1e-6, 1e-6).unwrap();
        let gaas = Chi2Material::gaas();
        assert_eq!(
            g2_uniform_pump(&a, &c, &pump, &gaas).unwrap_err(),
            OverlapError::GridMismatch {
                left: [8; 3],
                right: [10; 3]
            }
        );
        let raw = gaussian_mode(g1, OMEGA_A, [0.0; 3], [0.3e-6; 3], 1, EPS).unwrap();
        let (_, c1) = pair(g1, 0.0);
        assert_eq!(
            g2_uniform_pump(&raw, &c1, &pump, &gaas).unwrap_err(),
            OverlapError::NotNormalized("a")
        );
    }

    #[test]
    fn vacuum_cells_do_not_contribute() {
        let grid = Grid::centered_cube(8, 3e-6).unwrap();
        let (a, c) = pair(grid, 0.0);
        let vac = ModeField {
            permittivity: vec![1.0; grid.len()],
            ..a.clone()
        };
        let pump = PumpField::from_amplitude(1e5, 1e-6, 1e-6).unwrap();
        assert_eq!(
            g2_uniform_pump(&vac, &c, &pump, &Chi2Material::gaas())
                .unwrap()
                .g2
                .norm(),
            0.0
        );
    }

    #[test]
    fn materials() {
        let gaas = Chi2Material::gaas();
        assert_eq!(gaas.chi_xyz(), 550e-12);
        assert_eq!(gaas.index_at(1425e-9), Some(3.38));
        assert_eq!(gaas.index_at(950e-9), Some(3.54));
        assert_eq!(Chi2Material::by_name("GaP").unwrap().chi_xyz(), 320e-12);
        assert!(Chi2Material::by_name("LiNbO3").is_none());
        assert_eq!(gaas.tensor.component(0, 0, 1), 0.0);
        assert_eq!(gaas.tensor.component(2, 1, 0), 550e-12);
    }
}
