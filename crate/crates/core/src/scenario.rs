//! Scenario files.
//!
//! A scenario is one TOML document naming a system (a shipped preset or an
//! inline parameter set), an operating point, and the settings of every
//! computation the command line can run. Dimensioned values are strings with
//! a mandatory unit suffix (`"950 nm"`, `"3 mW"`); dimensionless values are
//! plain numbers.
//!
//! [`Scenario::resolve`] fills in every default and returns, next to the
//! resolved values, a canonical document in SI units ([`Scenario::echo`]).
//! Resolving the echo again yields the same echo, so a run started from an
//! echo file reproduces the original output bit for bit.
//!
//! ```toml
//! preset = "gaas"
//! kappa_convention = "paper"
//!
//! [operating_point]
//! delta = 10
//! pump_power = "3 mW"
//!
//! [drive]
//! shape = "slow-gaussian"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adiabatic::{calibrate_pump_model, efficiency_closed_form, PumpAnchor, PumpModel};
use crate::drive::{DriveError, DrivePulse};
use crate::model::{
    g1_for_cooperativity, kappa_from_q, CavityMode, EmitterParams, KappaConvention, ModeLabel,
    Polarization, SystemParams,
};
use crate::overlap::Chi2Material;
use crate::presets;
use crate::pulse::{Inversion, ShapeOptions};
use crate::units::{format_quantity, parse_quantity, Dimension};

/// Largest grid or sample count accepted from a file.
pub const MAX_POINTS: usize = 1 << 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("{0}")]
    Syntax(String),
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------- file layout

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_convention: Option<KappaConvention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<RawSystem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operating_point: Option<RawOperatingPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_model: Option<RawPumpModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<RawDrive>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<RawSimulation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<RawSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shaping: Option<RawShaping>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage: Option<RawStorage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<RawOverlap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSystem {
    /// Preset the values were taken from, kept for provenance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_hash: Option<String>,
    /// Rate.
    pub gamma: String,
    pub gamma_ratio: f64,
    /// Rate; give this or `c_in`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g1: Option<String>,
    /// Cooperativity under the paper κ convention.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_in: Option<f64>,
    pub material: String,
    /// Length.
    pub focal_radius: String,
    pub mode_a: RawMode,
    pub mode_c: RawMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMode {
    pub wavelength: String,
    pub quality_factor: f64,
    pub normalized_mode_volume: f64,
    pub refractive_index: f64,
    pub polarization: Polarization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOperatingPoint {
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_power: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RawPumpModel {
    /// φ fixed by one observed (P_b, δ, F) point.
    Calibrated {
        anchor_power: String,
        anchor_delta: f64,
        anchor_efficiency: f64,
    },
    /// φ = phi_at_reference at reference_power and reference_delta.
    Explicit {
        phi_at_reference: f64,
        reference_power: String,
        reference_delta: f64,
    },
    /// φ from the overlap g₂/E_b and the focal spot.
    Analytic {
        g2_per_field: String,
        reference_delta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RawDrive {
    /// Gaussian slow enough for adiabatic elimination that depletes |s⟩.
    SlowGaussian {
        /// −ln|c_s(∞)|².
        #[serde(default, skip_serializing_if = "Option::is_none")]
        depletion: Option<f64>,
        /// Peak emission rate over κ_c.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        adiabaticity: Option<f64>,
    },
    Gaussian {
        peak: String,
        center: String,
        /// Standard deviation of Ω(t).
        width: String,
        end: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
    Square {
        peak: String,
        on: String,
        off: String,
        rise: String,
        end: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        samples: Option<usize>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimulation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_min: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_max: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<bool>,
    /// Explicit δ rows; alternative to the range below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_log: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawShaping {
    /// ∫|ψ|² of the target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<f64>,
    /// Standard deviation of |ψ|².
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Inversion>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStorage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath_modes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bath_bandwidth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOverlap {
    pub field_a: String,
    pub field_c: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_power: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_field: Option<String>,
}

impl RawScenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text)
            .map_err(|e| ScenarioError::Syntax(e.to_string().trim_end().to_string()))
    }
}

// ------------------------------------------------------------ resolved values

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub mode_a: CavityMode,
    pub mode_c: CavityMode,
    pub g1: f64,
    pub gamma: f64,
    pub gamma_ratio: f64,
    pub material: Chi2Material,
    pub focal_radius: f64,
}

impl SystemSpec {
    pub fn params(
        &self,
        convention: KappaConvention,
        delta: f64,
        g2: f64,
    ) -> Result<SystemParams, String> {
        let em =
            EmitterParams::new(self.g1, self.gamma, self.gamma_ratio).map_err(|e| e.to_string())?;
        SystemParams::from_modes(em, self.mode_a, self.mode_c, convention, delta, g2)
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerSetting {
    /// P_b in W.
    PumpPower(f64),
    Phi(f64),
    /// rad/s.
    G2(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveSpec {
    Gaussian {
        peak: f64,
        center: f64,
        width: f64,
        end: f64,
        samples: usize,
    },
    Square {
        peak: f64,
        on: f64,
        off: f64,
        rise: f64,
        end: f64,
        samples: usize,
    },
}

impl DriveSpec {
    pub fn build(&self) -> Result<DrivePulse, DriveError> {
        match *self {
            DriveSpec::Gaussian {
                peak,
                center,
                width,
                end,
                samples,
            } => DrivePulse::gaussian(peak, center, width, end, samples),
            DriveSpec::Square {
                peak,
                on,
                off,
                rise,
                end,
                samples,
            } => DrivePulse::smoothed_square(peak, on, off, rise, end, samples),
        }
    }

    pub fn end(&self) -> f64 {
        match *self {
            DriveSpec::Gaussian { end, .. } | DriveSpec::Square { end, .. } => end,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub powers_mw: Vec<f64>,
    pub deltas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingSpec {
    pub norm: f64,
    pub width: f64,
    pub center: f64,
    pub end: f64,
    pub samples: usize,
    pub method: Inversion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageSpec {
    pub bath_modes: usize,
    pub bath_bandwidth: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PumpSetting {
    Power(f64),
    Field(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapSpec {
    pub field_a: PathBuf,
    pub field_c: PathBuf,
    pub pump: PumpSetting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Preset name and hash when the system came from a preset.
    pub origin: Option<(String, String)>,
    pub system: SystemSpec,
    pub kappa_convention: KappaConvention,
    pub tolerance: f64,
    pub output: Option<PathBuf>,
    pub pump_model: PumpModel,
    pub delta: f64,
    pub power: PowerSetting,
    /// System at the operating point.
    pub params: SystemParams,
    pub drive: DriveSpec,
    pub horizon: f64,
    pub samples: usize,
    pub sweep: SweepSpec,
    pub shaping: ShapingSpec,
    pub storage: StorageSpec,
    pub overlap: Option<OverlapSpec>,
    canonical: RawScenario,
}

fn q(value: f64, dim: Dimension) -> String {
    format_quantity(value, dim)
}

fn quantity(key: &str, text: &str, dim: Dimension) -> Result<f64, ScenarioError> {
    parse_quantity(text, dim).map_err(|e| invalid(key, e.to_string()))
}

fn positive(key: &str, v: f64) -> Result<f64, ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be > 0, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64, ScenarioError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be >= 0, got {v}")))
    }
}

fn count(key: &str, n: usize, min: usize) -> Result<usize, ScenarioError> {
    if n >= min && n <= MAX_POINTS {
        Ok(n)
    } else {
        Err(invalid(
            key,
            format!("must be between {min} and {MAX_POINTS}, got {n}"),
        ))
    }
}

fn resolve_mode(key: &str, label: ModeLabel, m: &RawMode) -> Result<CavityMode, ScenarioError> {
    let w = quantity(
        &format!("{key}.wavelength"),
        &m.wavelength,
        Dimension::Length,
    )?;
    CavityMode::new(
        label,
        w,
        m.quality_factor,
        m.normalized_mode_volume,
        m.refractive_index,
        m.polarization,
    )
    .map_err(|e| invalid(key, e.to_string()))
}

fn raw_mode(m: &CavityMode) -> RawMode {
    RawMode {
        wavelength: q(m.wavelength, Dimension::Length),
        quality_factor: m.quality_factor,
        normalized_mode_volume: m.normalized_mode_volume,
        refractive_index: m.refractive_index,
        polarization: m.polarization,
    }
}

fn raw_system(s: &SystemSpec, origin: &Option<(String, String)>) -> RawSystem {
    RawSystem {
        origin: origin.as_ref().map(|o| o.0.clone()),
        origin_hash: origin.as_ref().map(|o| o.1.clone()),
        gamma: q(s.gamma, Dimension::Rate),
        gamma_ratio: s.gamma_ratio,
        g1: Some(q(s.g1, Dimension::Rate)),
        c_in: None,
        material: s.material.name.clone(),
        focal_radius: q(s.focal_radius, Dimension::Length),
        mode_a: raw_mode(&s.mode_a),
        mode_c: raw_mode(&s.mode_c),
    }
}

fn resolve_system(r: &RawSystem) -> Result<SystemSpec, ScenarioError> {
    let mode_a = resolve_mode("system.mode_a", ModeLabel::A, &r.mode_a)?;
    let mode_c = resolve_mode("system.mode_c", ModeLabel::C, &r.mode_c)?;
    let gamma = positive(
        "system.gamma",
        quantity("system.gamma", &r.gamma, Dimension::Rate)?,
    )?;
    let gamma_ratio = positive("system.gamma_ratio", r.gamma_ratio)?;
    let g1 = match (&r.g1, r.c_in) {
        (Some(g1), None) => non_negative("system.g1", quantity("system.g1", g1, Dimension::Rate)?)?,
        (None, Some(c)) => {
            let c = non_negative("system.c_in", c)?;
            g1_for_cooperativity(c, gamma, kappa_from_q(&mode_a, KappaConvention::Paper))
        }
        _ => return Err(invalid("system", "give exactly one of `g1` and `c_in`")),
    };
    let material = Chi2Material::by_name(&r.material).ok_or_else(|| {
        invalid(
            "system.material",
            format!("unknown material `{}` (expected gaas|gap)", r.material),
        )
    })?;
    let focal_radius = positive(
        "system.focal_radius",
        quantity("system.focal_radius", &r.focal_radius, Dimension::Length)?,
    )?;
    Ok(SystemSpec {
        mode_a,
        mode_c,
        g1,
        gamma,
        gamma_ratio,
        material,
        focal_radius,
    })
}

// The shaped drive lives on the target grid. Shaping rejects emission rates
// 4Ω²/γ_t above half of κ_c, which bounds the peak Ω.
fn shaping_samples(params: &SystemParams, end: f64) -> usize {
    let peak = (ShapeOptions::default().adiabatic_guard * params.kappa_c() * params.gamma_total()
        / 4.0)
        .sqrt();
    sample_count(end, peak).clamp(4001, MAX_POINTS)
}

fn sample_count(end: f64, peak: f64) -> usize {
    // keeps peak·Δt ≤ 0.05
    ((end * peak / 0.05).ceil() as usize + 1).max(201)
}

impl Scenario {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        Self::resolve(&RawScenario::from_toml(text)?, base_dir)
    }

    /// Fills in defaults and checks every value. Relative file paths are
    /// taken relative to `base_dir`.
    pub fn resolve(raw: &RawScenario, base_dir: &Path) -> Result<Self, ScenarioError> {
        let convention = raw.kappa_convention.unwrap_or_default();
        let tolerance = raw.tolerance.unwrap_or(1e-10);
        if !(tolerance > 0.0 && tolerance < 1e-2) {
            return Err(invalid(
                "tolerance",
                format!("must be in (0, 1e-2), got {tolerance}"),
            ));
        }

        let (origin, system, preset) = match (&raw.preset, &raw.system) {
            (Some(name), None) => {
                let p = presets::by_name(name).ok_or_else(|| {
                    let names: Vec<_> = presets::all().iter().map(|p| p.name).collect();
                    invalid(
                        "preset",
                        format!("unknown preset `{name}` (available: {})", names.join(", ")),
                    )
                })?;
                let spec = SystemSpec {
                    mode_a: p.mode_a,
                    mode_c: p.mode_c,
                    g1: p.g1(),
                    gamma: p.gamma(),
                    gamma_ratio: p.gamma_ratio_a,
                    material: p.material.clone(),
                    focal_radius: p.focal_radius,
                };
                (Some((p.name.to_string(), p.hash())), spec, Some(p))
            }
            (None, Some(s)) => {
                let origin = match (&s.origin, &s.origin_hash) {
                    (Some(n), Some(h)) => Some((n.clone(), h.clone())),
                    (None, None) => None,
                    _ => return Err(invalid("system", "`origin` and `origin_hash` go together")),
                };
                (origin, resolve_system(s)?, None)
            }
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "preset",
                    "give either `preset` or a [system] table, not both",
                ))
            }
            (None, None) => {
                return Err(invalid(
                    "preset",
                    "give either `preset` or a [system] table",
                ))
            }
        };

        let op = match (&raw.operating_point, &preset) {
            (Some(op), _) => op.clone(),
            (None, Some(p)) => RawOperatingPoint {
                delta: p.anchor.delta,
                pump_power: Some(q(p.anchor.power_mw * 1e-3, Dimension::Power)),
                phi: None,
                g2: None,
            },
            (None, None) => {
                return Err(invalid(
                    "operating_point",
                    "required with an inline [system]",
                ))
            }
        };
        let delta = non_negative("operating_point.delta", op.delta)?;
        let power = match (&op.pump_power, op.phi, &op.g2) {
            (Some(p), None, None) => PowerSetting::PumpPower(non_negative(
                "operating_point.pump_power",
                quantity("operating_point.pump_power", p, Dimension::Power)?,
            )?),
            (None, Some(phi), None) => PowerSetting::Phi(non_negative("operating_point.phi", phi)?),
            (None, None, Some(g2)) => PowerSetting::G2(non_negative(
                "operating_point.g2",
                quantity("operating_point.g2", g2, Dimension::Rate)?,
            )?),
            _ => {
                return Err(invalid(
                    "operating_point",
                    "give exactly one of `pump_power`, `phi` and `g2`",
                ))
            }
        };

        let base = system
            .params(convention, delta, 0.0)
            .map_err(|e| invalid("system", e))?;
        let pm_raw = match (&raw.pump_model, &preset) {
            (Some(pm), _) => pm.clone(),
            (None, Some(p)) => RawPumpModel::Calibrated {
                anchor_power: q(p.anchor.power_mw * 1e-3, Dimension::Power),
                anchor_delta: p.anchor.delta,
                anchor_efficiency: p.anchor.efficiency,
            },
            (None, None) => match power {
                // φ and g₂ settings do not need a pump model; sweeps then
                // take φ linear in power with φ = 1 at 1 mW.
                PowerSetting::Phi(_) | PowerSetting::G2(_) => RawPumpModel::Explicit {
                    phi_at_reference: 1.0,
                    reference_power: q(1e-3, Dimension::Power),
                    reference_delta: delta,
                },
                PowerSetting::PumpPower(_) => {
                    return Err(invalid(
                        "pump_model",
                        "a pump power needs a [pump_model] with an inline [system]",
                    ))
                }
            },
        };
        let pump_model = match &pm_raw {
            RawPumpModel::Calibrated {
                anchor_power,
                anchor_delta,
                anchor_efficiency,
            } => {
                let p = quantity("pump_model.anchor_power", anchor_power, Dimension::Power)?;
                let at = system
                    .params(convention, *anchor_delta, 0.0)
                    .map_err(|e| invalid("pump_model", e))?;
                let anchor = PumpAnchor {
                    power_mw: p * 1e3,
                    delta: *anchor_delta,
                    efficiency: *anchor_efficiency,
                };
                calibrate_pump_model(anchor, at.c_in())
                    .map_err(|e| invalid("pump_model", e.to_string()))?
            }
            RawPumpModel::Explicit {
                phi_at_reference,
                reference_power,
                reference_delta,
            } => {
                let p = positive(
                    "pump_model.reference_power",
                    quantity(
                        "pump_model.reference_power",
                        reference_power,
                        Dimension::Power,
                    )?,
                )?;
                PumpModel::new(
                    phi_at_reference / (p * 1e3),
                    *reference_delta,
                    crate::adiabatic::Calibration::Calibrated,
                )
                .map_err(|e| invalid("pump_model", e.to_string()))?
            }
            RawPumpModel::Analytic {
                g2_per_field,
                reference_delta,
            } => {
                let g = quantity(
                    "pump_model.g2_per_field",
                    g2_per_field,
                    Dimension::RatePerField,
                )?;
                let at = system
                    .params(convention, *reference_delta, 0.0)
                    .map_err(|e| invalid("pump_model", e))?;
                PumpModel::analytic(
                    g,
                    system.focal_radius,
                    at.kappa_a,
                    at.kappa_c_in,
                    *reference_delta,
                )
                .map_err(|e| invalid("pump_model", e.to_string()))?
            }
        };

        let g2 = match power {
            PowerSetting::PumpPower(p) => {
                pump_model.g2_at(p * 1e3, delta, base.kappa_a, base.kappa_c_in)
            }
            PowerSetting::Phi(phi) => (phi * base.kappa_a * base.kappa_c() / 4.0).sqrt(),
            PowerSetting::G2(g2) => g2,
        };
        let params = base
            .with_g2(g2)
            .map_err(|e| invalid("operating_point", e.to_string()))?;
        let kc = params.kappa_c();

        let drive_raw = raw.drive.clone().unwrap_or(RawDrive::SlowGaussian {
            depletion: None,
            adiabaticity: None,
        });
        let drive = match &drive_raw {
            RawDrive::SlowGaussian {
                depletion,
                adiabaticity,
            } => {
                let a = positive("drive.depletion", depletion.unwrap_or(16.0))?;
                let r = positive("drive.adiabaticity", adiabaticity.unwrap_or(0.1))?;
                let sqrt_pi = std::f64::consts::PI.sqrt();
                let width = a / (r * sqrt_pi * kc);
                let peak = (a * params.gamma_total() / (4.0 * width * sqrt_pi)).sqrt();
                let end = 10.0 * width;
                let samples = count("drive.samples", sample_count(end, peak), 2)?;
                DriveSpec::Gaussian {
                    peak,
                    center: 5.0 * width,
                    width,
                    end,
                    samples,
                }
            }
            RawDrive::Gaussian {
                peak,
                center,
                width,
                end,
                samples,
            } => {
                let peak =
                    non_negative("drive.peak", quantity("drive.peak", peak, Dimension::Rate)?)?;
                let end = positive("drive.end", quantity("drive.end", end, Dimension::Time)?)?;
                DriveSpec::Gaussian {
                    peak,
                    center: quantity("drive.center", center, Dimension::Time)?,
                    width: positive(
                        "drive.width",
                        quantity("drive.width", width, Dimension::Time)?,
                    )?,
                    end,
                    samples: count(
                        "drive.samples",
                        samples.unwrap_or_else(|| sample_count(end, peak)),
                        2,
                    )?,
                }
            }
            RawDrive::Square {
                peak,
                on,
                off,
                rise,
                end,
                samples,
            } => {
                let peak =
                    non_negative("drive.peak", quantity("drive.peak", peak, Dimension::Rate)?)?;
                let end = positive("drive.end", quantity("drive.end", end, Dimension::Time)?)?;
                let on = quantity("drive.on", on, Dimension::Time)?;
                let off = quantity("drive.off", off, Dimension::Time)?;
                if off <= on {
                    return Err(invalid("drive.off", "must come after `on`"));
                }
                DriveSpec::Square {
                    peak,
                    on,
                    off,
                    rise: positive("drive.rise", quantity("drive.rise", rise, Dimension::Time)?)?,
                    end,
                    samples: count(
                        "drive.samples",
                        samples.unwrap_or_else(|| sample_count(end, peak)),
                        2,
                    )?,
                }
            }
        };

        let sim = raw.simulation.clone().unwrap_or_default();
        let horizon = match &sim.horizon {
            Some(h) => positive(
                "simulation.horizon",
                quantity("simulation.horizon", h, Dimension::Time)?,
            )?,
            None => drive.end() + 20.0 / kc,
        };
        let samples = count("simulation.samples", sim.samples.unwrap_or(2001), 2)?;

        let sw = raw.sweep.clone().unwrap_or_default();
        let pmin = match &sw.power_min {
            Some(s) => positive(
                "sweep.power_min",
                quantity("sweep.power_min", s, Dimension::Power)?,
            )?,
            None => 1e-5,
        };
        let pmax = match &sw.power_max {
            Some(s) => positive(
                "sweep.power_max",
                quantity("sweep.power_max", s, Dimension::Power)?,
            )?,
            None => 1.0,
        };
        if pmax <= pmin {
            return Err(invalid("sweep.power_max", "must exceed `power_min`"));
        }
        let npow = count("sweep.powers", sw.powers.unwrap_or(100), 1)?;
        let plog = sw.log.unwrap_or(true);
        let deltas = match (&sw.deltas, sw.delta_min, sw.delta_max, sw.delta_count) {
            (Some(d), None, None, None) => d.clone(),
            (None, Some(lo), Some(hi), Some(n)) => {
                let n = count("sweep.delta_count", n, 1)?;
                let log = sw.delta_log.unwrap_or(false);
                if log && lo <= 0.0 {
                    return Err(invalid("sweep.delta_min", "must be > 0 on a log axis"));
                }
                crate::adiabatic::axis(lo, hi, n, log)
            }
            (None, None, None, None) => vec![3.0, 10.0, 30.0],
            _ => {
                return Err(invalid(
                    "sweep",
                    "give either `deltas` or all of `delta_min`, `delta_max`, `delta_count`",
                ))
            }
        };
        if deltas.is_empty() || deltas.len() > MAX_POINTS {
            return Err(invalid("sweep.deltas", "needs at least one value"));
        }
        for d in &deltas {
            non_negative("sweep.deltas", *d)?;
        }
        if deltas.len().saturating_mul(npow) > MAX_POINTS {
            return Err(invalid(
                "sweep",
                format!("grid larger than {MAX_POINTS} points"),
            ));
        }
        let sweep = SweepSpec {
            powers_mw: crate::adiabatic::axis(pmin * 1e3, pmax * 1e3, npow, plog),
            deltas: deltas.clone(),
        };

        let sh = raw.shaping.clone().unwrap_or_default();
        let fmax = efficiency_closed_form(params.c_in(), params.phi(), params.kappa_ratio());
        let width = match &sh.width {
            Some(s) => positive(
                "shaping.width",
                quantity("shaping.width", s, Dimension::Time)?,
            )?,
            None => 10.0 / kc,
        };
        let center = match &sh.center {
            Some(s) => quantity("shaping.center", s, Dimension::Time)?,
            None => 7.0 * width,
        };
        let end = match &sh.end {
            Some(s) => positive("shaping.end", quantity("shaping.end", s, Dimension::Time)?)?,
            None => 14.0 * width,
        };
        let shaping = ShapingSpec {
            norm: non_negative("shaping.norm", sh.norm.unwrap_or(0.9 * fmax))?,
            width,
            center,
            end,
            samples: count(
                "shaping.samples",
                sh.samples.unwrap_or_else(|| shaping_samples(&params, end)),
                5,
            )?,
            method: sh.method.unwrap_or(Inversion::Exact),
        };

        let st = raw.storage.clone().unwrap_or_default();
        let storage = StorageSpec {
            bath_modes: count("storage.bath_modes", st.bath_modes.unwrap_or(2000), 2)?,
            bath_bandwidth: match &st.bath_bandwidth {
                Some(s) => positive(
                    "storage.bath_bandwidth",
                    quantity("storage.bath_bandwidth", s, Dimension::Rate)?,
                )?,
                None => 50.0 * kc,
            },
            samples: count("storage.samples", st.samples.unwrap_or(201), 2)?,
        };

        let overlap = match &raw.overlap {
            None => None,
            Some(o) => {
                let pump = match (&o.pump_power, &o.pump_field, power) {
                    (Some(p), None, _) => PumpSetting::Power(non_negative(
                        "overlap.pump_power",
                        quantity("overlap.pump_power", p, Dimension::Power)?,
                    )?),
                    (None, Some(e), _) => PumpSetting::Field(non_negative(
                        "overlap.pump_field",
                        quantity("overlap.pump_field", e, Dimension::ElectricField)?,
                    )?),
                    (None, None, PowerSetting::PumpPower(p)) => PumpSetting::Power(p),
                    (None, None, _) => {
                        return Err(invalid("overlap", "give `pump_power` or `pump_field`"))
                    }
                    (Some(_), Some(_), _) => {
                        return Err(invalid(
                            "overlap",
                            "give only one of `pump_power` and `pump_field`",
                        ))
                    }
                };
                let path = |key: &str, p: &str| -> Result<PathBuf, ScenarioError> {
                    let full = base_dir.join(p);
                    if full.is_file() {
                        Ok(std::path::absolute(&full).unwrap_or(full))
                    } else {
                        Err(invalid(
                            key,
                            format!("file `{}` does not exist", full.display()),
                        ))
                    }
                };
                Some(OverlapSpec {
                    field_a: path("overlap.field_a", &o.field_a)?,
                    field_c: path("overlap.field_c", &o.field_c)?,
                    pump,
                })
            }
        };

        let canonical = RawScenario {
            preset: None,
            kappa_convention: Some(convention),
            tolerance: Some(tolerance),
            output: None,
            system: Some(raw_system(&system, &origin)),
            operating_point: Some(RawOperatingPoint {
                delta,
                pump_power: match power {
                    PowerSetting::PumpPower(p) => Some(q(p, Dimension::Power)),
                    _ => None,
                },
                phi: match power {
                    PowerSetting::Phi(p) => Some(p),
                    _ => None,
                },
                g2: match power {
                    PowerSetting::G2(g) => Some(q(g, Dimension::Rate)),
                    _ => None,
                },
            }),
            pump_model: Some(canonical_pump_model(&pm_raw)?),
            drive: Some(match drive {
                DriveSpec::Gaussian {
                    peak,
                    center,
                    width,
                    end,
                    samples,
                } => RawDrive::Gaussian {
                    peak: q(peak, Dimension::Rate),
                    center: q(center, Dimension::Time),
                    width: q(width, Dimension::Time),
                    end: q(end, Dimension::Time),
                    samples: Some(samples),
                },
                DriveSpec::Square {
                    peak,
                    on,
                    off,
                    rise,
                    end,
                    samples,
                } => RawDrive::Square {
                    peak: q(peak, Dimension::Rate),
                    on: q(on, Dimension::Time),
                    off: q(off, Dimension::Time),
                    rise: q(rise, Dimension::Time),
                    end: q(end, Dimension::Time),
                    samples: Some(samples),
                },
            }),
            simulation: Some(RawSimulation {
                horizon: Some(q(horizon, Dimension::Time)),
                samples: Some(samples),
            }),
            sweep: Some(RawSweep {
                power_min: Some(q(pmin, Dimension::Power)),
                power_max: Some(q(pmax, Dimension::Power)),
                powers: Some(npow),
                log: Some(plog),
                deltas: Some(deltas),
                ..Default::default()
            }),
            shaping: Some(RawShaping {
                norm: Some(shaping.norm),
                width: Some(q(shaping.width, Dimension::Time)),
                center: Some(q(shaping.center, Dimension::Time)),
                end: Some(q(shaping.end, Dimension::Time)),
                samples: Some(shaping.samples),
                method: Some(shaping.method),
            }),
            storage: Some(RawStorage {
                bath_modes: Some(storage.bath_modes),
                bath_bandwidth: Some(q(storage.bath_bandwidth, Dimension::Rate)),
                samples: Some(storage.samples),
            }),
            overlap: overlap.as_ref().map(|spec| RawOverlap {
                field_a: spec.field_a.display().to_string(),
                field_c: spec.field_c.display().to_string(),
                pump_power: match spec.pump {
                    PumpSetting::Power(p) => Some(q(p, Dimension::Power)),
                    _ => None,
                },
                pump_field: match spec.pump {
                    PumpSetting::Field(e) => Some(q(e, Dimension::ElectricField)),
                    _ => None,
                },
            }),
        };

        Ok(Scenario {
            origin,
            system,
            kappa_convention: convention,
            tolerance,
            output: raw.output.as_ref().map(PathBuf::from),
            pump_model,
            delta,
            power,
            params,
            drive,
            horizon,
            samples,
            sweep,
            shaping,
            storage,
            overlap,
            canonical,
        })
    }

    /// Canonical TOML of every resolved value, in SI units. The output
    /// directory is not part of it.
    pub fn echo(&self) -> String {
        toml::to_string(&self.canonical).expect("scenario serializes")
    }

    pub fn canonical(&self) -> &RawScenario {
        &self.canonical
    }

    /// SHA-256 of [`Scenario::echo`], hex encoded.
    pub fn params_hash(&self) -> String {
        hex::encode(Sha256::digest(self.echo().as_bytes()))
    }

    /// Pump power at the operating point in mW, if it is set by power.
    pub fn pump_power_mw(&self) -> Option<f64> {
        match self.power {
            PowerSetting::PumpPower(p) => Some(p * 1e3),
            PowerSetting::Phi(phi) => Some(self.pump_model.power_for_phi(phi, self.delta)),
            PowerSetting::G2(_) => {
                Some(self.pump_model.power_for_phi(self.params.phi(), self.delta))
            }
        }
    }
}

fn canonical_pump_model(pm: &RawPumpModel) -> Result<RawPumpModel, ScenarioError> {
    Ok(match pm {
        RawPumpModel::Calibrated {
            anchor_power,
            anchor_delta,
            anchor_efficiency,
        } => RawPumpModel::Calibrated {
            anchor_power: q(
                quantity("pump_model.anchor_power", anchor_power, Dimension::Power)?,
                Dimension::Power,
            ),
            anchor_delta: *anchor_delta,
            anchor_efficiency: *anchor_efficiency,
        },
        RawPumpModel::Explicit {
            phi_at_reference,
            reference_power,
            reference_delta,
        } => RawPumpModel::Explicit {
            phi_at_reference: *phi_at_reference,
            reference_power: q(
                quantity(
                    "pump_model.reference_power",
                    reference_power,
                    Dimension::Power,
                )?,
                Dimension::Power,
            ),
            reference_delta: *reference_delta,
        },
        RawPumpModel::Analytic {
            g2_per_field,
            reference_delta,
        } => RawPumpModel::Analytic {
            g2_per_field: q(
                quantity(
                    "pump_model.g2_per_field",
                    g2_per_field,
                    Dimension::RatePerField,
                )?,
                Dimension::RatePerField,
            ),
            reference_delta: *reference_delta,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn resolve(text: &str) -> Result<Scenario, ScenarioError> {
        Scenario::from_toml(text, Path::new("."))
    }

    #[test]
    fn preset_defaults() {
        let s = resolve("preset = \"gaas\"").unwrap();
        assert_eq!(s.origin.as_ref().unwrap().0, "gaas");
        assert_eq!(s.delta, 10.0);
        assert_relative_eq!(s.params.phi(), 3.35, max_relative = 0.01);
        let f = efficiency_closed_form(s.params.c_in(), s.params.phi(), s.params.kappa_ratio());
        assert_relative_eq!(f, 0.7, max_relative = 1e-9);
        let DriveSpec::Gaussian {
            peak, end, samples, ..
        } = s.drive
        else {
            panic!()
        };
        assert!(peak * end / (samples - 1) as f64 <= 0.05);
        assert_eq!(s.sweep.deltas, vec![3.0, 10.0, 30.0]);
    }

    #[test]
    fn echo_is_a_fixed_point() {
        for text in [
            "preset = \"gaas\"",
            "preset = \"gap\"\nkappa_convention = \"energy\"\n[drive]\nshape = \"square\"\npeak = \"1 GHz\"\non = \"10 ns\"\noff = \"30 ns\"\nrise = \"1 ns\"\nend = \"50 ns\"",
            "preset = \"gaas\"\n[operating_point]\ndelta = 3\nphi = 12.5\n[sweep]\ndelta_min = 1\ndelta_max = 100\ndelta_count = 7\ndelta_log = true",
        ] {
            let a = resolve(text).unwrap();
            let b = resolve(&a.echo()).unwrap();
            assert_eq!(a.echo(), b.echo(), "{text}");
            assert_eq!(a.params, b.params);
            assert_eq!(a.pump_model, b.pump_model);
            assert_eq!(a.drive, b.drive);
            assert_eq!(a.sweep, b.sweep);
            assert_eq!(a.params_hash(), b.params_hash());
        }
    }

    #[test]
    fn energy_convention_doubles_kappas() {
        let a = resolve("preset = \"gaas\"").unwrap();
        let b = resolve("preset = \"gaas\"\nkappa_convention = \"energy\"").unwrap();
        assert_eq!(b.params.kappa_a, 2.0 * a.params.kappa_a);
        assert_eq!(b.params.kappa_c_in, 2.0 * a.params.kappa_c_in);
        assert_eq!(b.params.kappa_c_ex, 2.0 * a.params.kappa_c_ex);
        assert_eq!(a.params.emitter.g1, b.params.emitter.g1);
    }

    #[test]
    fn inline_system_matches_preset() {
        let text = r#"
[system]
gamma = "2e8 1/s"
gamma_ratio = 0.2
c_in = 3.7e4
material = "gaas"
focal_radius = "2.85 um"
mode_a = { wavelength = "950 nm", quality_factor = 7.3e4, normalized_mode_volume = 1.45, refractive_index = 3.54, polarization = "TM" }
mode_c = { wavelength = "1425 nm", quality_factor = 1.2e7, normalized_mode_volume = 0.77, refractive_index = 3.38, polarization = "TE" }

[operating_point]
delta = 10
pump_power = "3 mW"

[pump_model]
kind = "calibrated"
anchor_power = "3 mW"
anchor_delta = 10
anchor_efficiency = 0.7
"#;
        let s = resolve(text).unwrap();
        let p = resolve("preset = \"gaas\"").unwrap();
        assert!(s.origin.is_none());
        assert_relative_eq!(s.params.g2, p.params.g2, max_relative = 1e-12);
        assert_relative_eq!(s.params.c_in(), 3.7e4, max_relative = 1e-12);
    }

    #[test]
    fn diagnostics_name_the_key() {
        let e = resolve("preset = \"gaas\"\n[operating_point]\ndelta = 10\npump_power = \"3 mV\"")
            .unwrap_err();
        assert!(
            matches!(&e, ScenarioError::Invalid { key, .. } if key == "operating_point.pump_power"),
            "{e}"
        );
        let e = resolve("preset = \"gaas\"\n[operating_point]\ndelta = 10\npump_power = \"3\"")
            .unwrap_err();
        assert!(e.to_string().contains("missing unit"), "{e}");
        let e =
            resolve("preset = \"gaas\"\n[drive]\nshape = \"gaussian\"\npeak = 5\n").unwrap_err();
        assert!(
            matches!(e, ScenarioError::Syntax(ref m) if m.contains("line")),
            "{e}"
        );
        let e = resolve("preset = \"gaas\"\nbogus = 1").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = resolve("preset = \"si\"").unwrap_err();
        assert!(e.to_string().contains("gaas"), "{e}");
        assert!(resolve("").is_err());
        let both =
            "preset = \"gaas\"\n[operating_point]\ndelta = 1\nphi = 1\npump_power = \"1 mW\"";
        assert!(resolve(both).is_err());
        let missing = "preset = \"gaas\"\n[overlap]\nfield_a = \"/nonexistent/a.pcf\"\nfield_c = \"/nonexistent/c.pcf\"";
        assert!(
            matches!(resolve(missing), Err(ScenarioError::Invalid { key, .. }) if key == "overlap.field_a")
        );
    }

    #[test]
    fn unachievable_anchor_is_rejected() {
        let text = "preset = \"gaas\"\n[pump_model]\nkind = \"calibrated\"\nanchor_power = \"3 mW\"\nanchor_delta = 10\nanchor_efficiency = 0.95";
        assert!(
            matches!(resolve(text), Err(ScenarioError::Invalid { key, .. }) if key == "pump_model")
        );
    }

    proptest! {
        #[test]
        fn parser_never_panics(s in "\\PC*") {
            let _ = resolve(&s);
        }

        #[test]
        fn operating_points_round_trip(delta in 0.0f64..100.0, mw in 1e-3f64..1e3) {
            let text = format!("preset = \"gaas\"\n[operating_point]\ndelta = {delta}\npump_power = \"{mw} mW\"");
            let a = resolve(&text).unwrap();
            let b = resolve(&a.echo()).unwrap();
            prop_assert_eq!(a.echo(), b.echo());
            prop_assert_eq!(a.params, b.params);
        }
    }
}
