//! Physical parameter records for the emitter, the two cavity modes and the
//! pump, plus the derived rates every other module works with.
//!
//! All rates and frequencies are angular (rad/s). The cavity loss rate is
//! tied to the quality factor by a convention that differs by a factor of two
//! between communities; see [`KappaConvention`].

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::LIGHT_SPEED;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("pump frequency {pump:.6e} rad/s differs from ω_a − ω_c = {expected:.6e} rad/s")]
    PumpFrequencyMismatch { pump: f64, expected: f64 },
}

pub(crate) fn require(
    cond: bool,
    name: &'static str,
    reason: impl Into<String>,
) -> Result<(), ModelError> {
    if cond {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            name,
            reason: reason.into(),
        })
    }
}

/// How a cavity quality factor maps to a field-amplitude loss rate κ.
///
/// `Paper` uses κ = ω/2Q, which is what the published GaAs numbers
/// (κ_c ≈ 2π × 100 MHz at δ = 10) require. `Energy` uses κ = ω/Q, the
/// energy decay rate more common in the cavity-QED literature. Switching
/// convention changes every Q-derived rate by exactly a factor of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaConvention {
    #[default]
    Paper,
    Energy,
}

impl KappaConvention {
    /// κ = ω / (divisor · Q).
    pub fn divisor(self) -> f64 {
        match self {
            KappaConvention::Paper => 2.0,
            KappaConvention::Energy => 1.0,
        }
    }
}

impl fmt::Display for KappaConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KappaConvention::Paper => "paper",
            KappaConvention::Energy => "energy",
        })
    }
}

impl std::str::FromStr for KappaConvention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(KappaConvention::Paper),
            "energy" => Ok(KappaConvention::Energy),
            other => Err(format!(
                "unknown kappa convention `{other}` (expected paper|energy)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeLabel {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "c")]
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    TE,
    TM,
}

/// One cavity resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityMode {
    pub label: ModeLabel,
    /// Vacuum wavelength in m.
    pub wavelength: f64,
    /// ω = 2πc/λ, kept in sync with `wavelength` by the constructor.
    pub angular_frequency: f64,
    pub quality_factor: f64,
    /// Mode volume in units of (λ/n)³.
    pub normalized_mode_volume: f64,
    pub refractive_index: f64,
    pub polarization: Polarization,
}

impl CavityMode {
    pub fn new(
        label: ModeLabel,
        wavelength: f64,
        quality_factor: f64,
        normalized_mode_volume: f64,
        refractive_index: f64,
        polarization: Polarization,
    ) -> Result<Self, ModelError> {
        require(
            wavelength.is_finite() && wavelength > 0.0,
            "wavelength",
            "must be > 0",
        )?;
        require(
            quality_factor.is_finite() && quality_factor > 0.0,
            "quality_factor",
            "must be > 0",
        )?;
        require(
            normalized_mode_volume.is_finite() && normalized_mode_volume > 0.0,
            "normalized_mode_volume",
            "must be > 0",
        )?;
        require(
            refractive_index.is_finite() && refractive_index >= 1.0,
            "refractive_index",
            "must be >= 1",
        )?;
        Ok(CavityMode {
            label,
            wavelength,
            angular_frequency: 2.0 * PI * LIGHT_SPEED / wavelength,
            quality_factor,
            normalized_mode_volume,
            refractive_index,
            polarization,
        })
    }

    /// Physical mode volume in m³.
    pub fn mode_volume(&self) -> f64 {
        self.normalized_mode_volume * (self.wavelength / self.refractive_index).powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterParams {
    /// Vacuum Rabi coupling to mode a (rad/s).
    pub g1: f64,
    /// Decay of |e⟩ into non-cavity modes (rad/s).
    pub gamma: f64,
    /// γ/γ₀: non-cavity emission relative to emission in a homogeneous medium.
    pub gamma_ratio: f64,
    /// Dipole moment of the |g⟩–|e⟩ transition (C·m), informational.
    pub dipole_moment: Option<f64>,
}

impl EmitterParams {
    pub fn new(g1: f64, gamma: f64, gamma_ratio: f64) -> Result<Self, ModelError> {
        require(g1.is_finite() && g1 >= 0.0, "g1", "must be >= 0")?;
        require(gamma.is_finite() && gamma > 0.0, "gamma", "must be > 0")?;
        require(
            gamma_ratio.is_finite() && gamma_ratio > 0.0,
            "gamma_ratio",
            "must be > 0",
        )?;
        Ok(EmitterParams {
            g1,
            gamma,
            gamma_ratio,
            dipole_moment: None,
        })
    }
}

/// Every rate of the emitter–cavity–pump system, validated once at
/// construction and immutable afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub emitter: EmitterParams,
    pub mode_a: CavityMode,
    pub mode_c: CavityMode,
    pub kappa_a: f64,
    pub kappa_c_in: f64,
    pub kappa_c_ex: f64,
    pub g2: f64,
    /// ω_b = ω_a − ω_c.
    pub pump_frequency: f64,
}

/// Quantities derived from [`SystemParams`]; always recomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedQuantities {
    pub c_in: f64,
    pub phi: f64,
    pub gamma_total: f64,
    pub delta: f64,
}

impl SystemParams {
    /// Builds the parameter set with ω_b taken as ω_a − ω_c.
    pub fn new(
        emitter: EmitterParams,
        mode_a: CavityMode,
        mode_c: CavityMode,
        kappa_a: f64,
        kappa_c_in: f64,
        kappa_c_ex: f64,
        g2: f64,
    ) -> Result<Self, ModelError> {
        let pump = mode_a.angular_frequency - mode_c.angular_frequency;
        Self::with_pump_frequency(
            emitter, mode_a, mode_c, kappa_a, kappa_c_in, kappa_c_ex, g2, pump,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_pump_frequency(
        emitter: EmitterParams,
        mode_a: CavityMode,
        mode_c: CavityMode,
        kappa_a: f64,
        kappa_c_in: f64,
        kappa_c_ex: f64,
        g2: f64,
        pump_frequency: f64,
    ) -> Result<Self, ModelError> {
        require(
            kappa_a.is_finite() && kappa_a > 0.0,
            "kappa_a",
            "must be > 0",
        )?;
        require(
            kappa_c_in.is_finite() && kappa_c_in > 0.0,
            "kappa_c_in",
            "must be > 0",
        )?;
        require(
            kappa_c_ex.is_finite() && kappa_c_ex >= 0.0,
            "kappa_c_ex",
            "must be >= 0",
        )?;
        require(g2.is_finite() && g2 >= 0.0, "g2", "must be >= 0")?;
        let expected = mode_a.angular_frequency - mode_c.angular_frequency;
        require(
            expected > 0.0,
            "mode_a",
            "mode a must lie above mode c in frequency",
        )?;
        if !pump_frequency.is_finite() || ((pump_frequency - expected) / expected).abs() > 1e-9 {
            return Err(ModelError::PumpFrequencyMismatch {
                pump: pump_frequency,
                expected,
            });
        }
        Ok(SystemParams {
            emitter,
            mode_a,
            mode_c,
            kappa_a,
            kappa_c_in,
            kappa_c_ex,
            g2,
            pump_frequency,
        })
    }

    /// Rates of both modes from their quality factors, with κ_{c,ex} = δ·κ_{c,in}.
    pub fn from_modes(
        emitter: EmitterParams,
        mode_a: CavityMode,
        mode_c: CavityMode,
        convention: KappaConvention,
        delta: f64,
        g2: f64,
    ) -> Result<Self, ModelError> {
        require(delta.is_finite() && delta >= 0.0, "delta", "must be >= 0")?;
        let kappa_a = kappa_from_q(&mode_a, convention);
        let kappa_c_in = kappa_from_q(&mode_c, convention);
        Self::new(
            emitter,
            mode_a,
            mode_c,
            kappa_a,
            kappa_c_in,
            delta * kappa_c_in,
            g2,
        )
    }

    pub fn kappa_c(&self) -> f64 {
        self.kappa_c_in + self.kappa_c_ex
    }

    /// κ_{c,ex}/κ_c, the fraction of mode-c leakage that reaches the waveguide.
    pub fn kappa_ratio(&self) -> f64 {
        self.kappa_c_ex / self.kappa_c()
    }

    pub fn c_in(&self) -> f64 {
        4.0 * self.emitter.g1 * self.emitter.g1 / (self.emitter.gamma * self.kappa_a)
    }

    pub fn phi(&self) -> f64 {
        4.0 * self.g2 * self.g2 / (self.kappa_a * self.kappa_c())
    }

    pub fn delta(&self) -> f64 {
        self.kappa_c_ex / self.kappa_c_in
    }

    pub fn gamma_total(&self) -> f64 {
        gamma_total(self)
    }

    pub fn derived(&self) -> DerivedQuantities {
        DerivedQuantities {
            c_in: self.c_in(),
            phi: self.phi(),
            gamma_total: self.gamma_total(),
            delta: self.delta(),
        }
    }

    pub fn with_g2(&self, g2: f64) -> Result<Self, ModelError> {
        Self::with_pump_frequency(
            self.emitter,
            self.mode_a,
            self.mode_c,
            self.kappa_a,
            self.kappa_c_in,
            self.kappa_c_ex,
            g2,
            self.pump_frequency,
        )
    }

    /// Same system with g₂ chosen so that φ takes the requested value.
    pub fn with_phi(&self, phi: f64) -> Result<Self, ModelError> {
        require(phi.is_finite() && phi >= 0.0, "phi", "must be >= 0")?;
        self.with_g2((phi * self.kappa_a * self.kappa_c() / 4.0).sqrt())
    }

    /// Same system with κ_{c,ex} = δ·κ_{c,in}; g₂ is left unchanged.
    pub fn with_delta(&self, delta: f64) -> Result<Self, ModelError> {
        require(delta.is_finite() && delta >= 0.0, "delta", "must be >= 0")?;
        let mut p = *self;
        p.kappa_c_ex = delta * self.kappa_c_in;
        Ok(p)
    }

    pub fn with_kappa_c_ex(&self, kappa_c_ex: f64) -> Result<Self, ModelError> {
        require(
            kappa_c_ex.is_finite() && kappa_c_ex >= 0.0,
            "kappa_c_ex",
            "must be >= 0",
        )?;
        let mut p = *self;
        p.kappa_c_ex = kappa_c_ex;
        Ok(p)
    }

    pub fn with_g1(&self, g1: f64) -> Result<Self, ModelError> {
        let emitter = EmitterParams { g1, ..self.emitter };
        require(g1.is_finite() && g1 >= 0.0, "g1", "must be >= 0")?;
        let mut p = *self;
        p.emitter = emitter;
        Ok(p)
    }

    /// Largest rate in the problem, used to bound integrator step sizes.
    pub fn fastest_rate(&self) -> f64 {
        [
            self.emitter.g1,
            self.emitter.gamma,
            self.kappa_a,
            self.kappa_c(),
            self.g2,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Field loss rate of a mode from its quality factor.
pub fn kappa_from_q(mode: &CavityMode, convention: KappaConvention) -> f64 {
    mode.angular_frequency / (convention.divisor() * mode.quality_factor)
}

/// C_in = 4g₁²/(γκ_a).
pub fn cooperativity_exact(g1: f64, gamma: f64, kappa_a: f64) -> Result<f64, ModelError> {
    require(gamma.is_finite() && gamma > 0.0, "gamma", "must be > 0")?;
    require(
        kappa_a.is_finite() && kappa_a > 0.0,
        "kappa_a",
        "must be > 0",
    )?;
    Ok(4.0 * g1 * g1 / (gamma * kappa_a))
}

/// Geometric estimate C_in ≈ (3Q/2π²)·(1/V_n)·(γ₀/γ) for an emitter at the
/// field maximum. The prefactor is an order-of-magnitude estimate, not exact.
pub fn cooperativity_geometric(mode: &CavityMode, gamma_ratio: f64) -> f64 {
    3.0 * mode.quality_factor / (2.0 * PI * PI) / mode.normalized_mode_volume / gamma_ratio
}

/// The coupling g₁ that realizes a given C_in.
pub fn g1_for_cooperativity(c_in: f64, gamma: f64, kappa_a: f64) -> f64 {
    (c_in * gamma * kappa_a / 4.0).sqrt()
}

/// Cavity-enhanced decay of |e⟩: γ + 4g₁²/(κ_a + 4g₂²/κ_c).
pub fn gamma_total(params: &SystemParams) -> f64 {
    let g1 = params.emitter.g1;
    let g2 = params.g2;
    let kappa_a_eff = params.kappa_a + 4.0 * g2 * g2 / params.kappa_c();
    params.emitter.gamma + 4.0 * g1 * g1 / kappa_a_eff
}
