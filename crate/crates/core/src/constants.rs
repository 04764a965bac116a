//! Fixed physical constants (CODATA 2018/2022 exact or recommended values, SI).

/// The three constants that enter the field normalization, the overlap
/// integral and the pump power relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// ε₀ in F/m.
    pub vacuum_permittivity: f64,
    /// ħ in J·s.
    pub reduced_planck: f64,
    /// c in m/s.
    pub light_speed: f64,
}

pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_818_8e-12;
pub const REDUCED_PLANCK: f64 = 1.054_571_817e-34;
pub const LIGHT_SPEED: f64 = 299_792_458.0;

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    vacuum_permittivity: VACUUM_PERMITTIVITY,
    reduced_planck: REDUCED_PLANCK,
    light_speed: LIGHT_SPEED,
};
