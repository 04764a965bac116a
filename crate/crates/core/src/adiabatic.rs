//! Closed-form conversion efficiency in the adiabatic limit, the optimal
//! pump strength, and the efficiency landscape over pump power and
//! overcoupling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{LIGHT_SPEED, VACUUM_PERMITTIVITY};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdiabaticError {
    #[error("large-C_in approximation needs C_in >= 4, got {0}")]
    ApproximationOutOfRange(f64),
    #[error(
        "anchor efficiency {requested} exceeds the maximum {max:.6} reachable at this overcoupling"
    )]
    Unachievable { requested: f64, max: f64 },
    #[error("anchor efficiency {requested} is within 1% of the maximum {max:.6}; the low-power branch is ill-defined")]
    AmbiguousBranch { requested: f64, max: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// F = [C/(1+φ+C)]·[φ/(1+φ)]·(κ_{c,ex}/κ_c).
///
/// The three factors are the probabilities that |e⟩ decays into mode a,
/// that a photon in a is converted into c, and that a photon in c leaves
/// through the waveguide.
pub fn efficiency_closed_form(c_in: f64, phi: f64, kappa_ratio: f64) -> f64 {
    c_in / (1.0 + phi + c_in) * (phi / (1.0 + phi)) * kappa_ratio
}

/// φ = √(1+C_in), the maximizer of [`efficiency_closed_form`] in φ.
pub fn optimal_phi(c_in: f64) -> f64 {
    (1.0 + c_in).sqrt()
}

/// F ≈ (1 − 2/√C_in)·κ_{c,ex}/κ_c, valid for C_in ≫ 1. The gap to the exact
/// optimum is O(1/C_in).
pub fn efficiency_max(c_in: f64, kappa_ratio: f64) -> Result<f64, AdiabaticError> {
    if !(c_in >= 4.0) {
        return Err(AdiabaticError::ApproximationOutOfRange(c_in));
    }
    Ok((1.0 - 2.0 / c_in.sqrt()) * kappa_ratio)
}

/// Exact optimum of the closed form, F(C, √(1+C), ratio).
pub fn efficiency_optimum(c_in: f64, kappa_ratio: f64) -> f64 {
    efficiency_closed_form(c_in, optimal_phi(c_in), kappa_ratio)
}

pub fn kappa_ratio_for_delta(delta: f64) -> f64 {
    delta / (1.0 + delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calibration {
    /// φ-per-power derived from a computed overlap integral and focal spot.
    Analytic,
    /// φ-per-power fixed by one (P_b, δ, F) operating point.
    Calibrated,
}

impl std::fmt::Display for Calibration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Calibration::Analytic => "analytic",
            Calibration::Calibrated => "calibrated",
        })
    }
}

/// Linear map from pump power to the branching parameter,
/// φ(P_b, δ) = phi_per_mw · P_b[mW] · (1+δ_ref)/(1+δ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpModel {
    pub phi_per_mw: f64,
    pub reference_delta: f64,
    pub calibration: Calibration,
}

impl PumpModel {
    pub fn new(
        phi_per_mw: f64,
        reference_delta: f64,
        calibration: Calibration,
    ) -> Result<Self, AdiabaticError> {
        if !(phi_per_mw > 0.0 && phi_per_mw.is_finite()) {
            return Err(AdiabaticError::InvalidInput(format!(
                "phi_per_mW must be > 0, got {phi_per_mw}"
            )));
        }
        if !(reference_delta >= 0.0 && reference_delta.is_finite()) {
            return Err(AdiabaticError::InvalidInput(format!(
                "reference δ must be >= 0, got {reference_delta}"
            )));
        }
        Ok(PumpModel {
            phi_per_mw,
            reference_delta,
            calibration,
        })
    }

    /// φ from the overlap coefficient g₂/E_b (rad/s per V/m) and the focal
    /// spot radius, using E_b² = 4P_b/(ε₀cπr²) and φ = 4g₂²/(κ_aκ_c).
    pub fn analytic(
        g2_per_field: f64,
        focal_radius: f64,
        kappa_a: f64,
        kappa_c_in: f64,
        reference_delta: f64,
    ) -> Result<Self, AdiabaticError> {
        if !(focal_radius > 0.0 && kappa_a > 0.0 && kappa_c_in > 0.0) {
            return Err(AdiabaticError::InvalidInput(
                "focal radius and loss rates must be > 0".into(),
            ));
        }
        let field_sq_per_mw = 4.0 * 1e-3
            / (VACUUM_PERMITTIVITY
                * LIGHT_SPEED
                * std::f64::consts::PI
                * focal_radius
                * focal_radius);
        let kappa_c = kappa_c_in * (1.0 + reference_delta);
        let phi_per_mw = 4.0 * g2_per_field * g2_per_field * field_sq_per_mw / (kappa_a * kappa_c);
        Self::new(phi_per_mw, reference_delta, Calibration::Analytic)
    }

    pub fn phi_at(&self, power_mw: f64, delta: f64) -> f64 {
        self.phi_per_mw * power_mw * (1.0 + self.reference_delta) / (1.0 + delta)
    }

    /// Pump power that puts φ at `phi` for overcoupling `delta`.
    pub fn power_for_phi(&self, phi: f64, delta: f64) -> f64 {
        phi * (1.0 + delta) / (self.phi_per_mw * (1.0 + self.reference_delta))
    }

    /// g₂ = √(φ κ_a κ_c / 4) at the given power, with κ_c = κ_{c,in}(1+δ).
    pub fn g2_at(&self, power_mw: f64, delta: f64, kappa_a: f64, kappa_c_in: f64) -> f64 {
        (self.phi_at(power_mw, delta) * kappa_a * kappa_c_in * (1.0 + delta) / 4.0).sqrt()
    }

    pub fn efficiency_at(&self, c_in: f64, power_mw: f64, delta: f64) -> f64 {
        efficiency_closed_form(
            c_in,
            self.phi_at(power_mw, delta),
            kappa_ratio_for_delta(delta),
        )
    }
}

/// An observed operating point used to fix the pump model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpAnchor {
    pub power_mw: f64,
    pub delta: f64,
    pub efficiency: f64,
}

/// Smaller root φ of F(C, φ, r) = F_target, the branch below the optimum.
///
/// F(1+φ)(1+C+φ) = Cφr is the quadratic Fφ² + (F(2+C) − Cr)φ + F(1+C) = 0;
/// the small root is taken in the cancellation-free form 2c/(−b + √disc).
pub fn phi_for_efficiency_below_optimum(c_in: f64, kappa_ratio: f64, target: f64) -> Option<f64> {
    if !(target > 0.0) {
        return None;
    }
    let a = target;
    let b = target * (2.0 + c_in) - c_in * kappa_ratio;
    let c = target * (1.0 + c_in);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 || b >= 0.0 {
        return None;
    }
    Some(2.0 * c / (-b + disc.sqrt()))
}

pub fn calibrate_pump_model(anchor: PumpAnchor, c_in: f64) -> Result<PumpModel, AdiabaticError> {
    if !(anchor.power_mw > 0.0 && anchor.power_mw.is_finite()) {
        return Err(AdiabaticError::InvalidInput(format!(
            "anchor power must be > 0, got {}",
            anchor.power_mw
        )));
    }
    if !(anchor.delta >= 0.0 && anchor.delta.is_finite()) {
        return Err(AdiabaticError::InvalidInput(format!(
            "anchor δ must be >= 0, got {}",
            anchor.delta
        )));
    }
    if !(anchor.efficiency > 0.0 && anchor.efficiency < 1.0) {
        return Err(AdiabaticError::InvalidInput(format!(
            "anchor efficiency must lie in (0, 1), got {}",
            anchor.efficiency
        )));
    }
    if !(c_in > 0.0 && c_in.is_finite()) {
        return Err(AdiabaticError::InvalidInput(format!(
            "C_in must be > 0, got {c_in}"
        )));
    }
    let ratio = kappa_ratio_for_delta(anchor.delta);
    let max = efficiency_optimum(c_in, ratio);
    if anchor.efficiency > max {
        return Err(AdiabaticError::Unachievable {
            requested: anchor.efficiency,
            max,
        });
    }
    if anchor.efficiency > 0.99 * max {
        return Err(AdiabaticError::AmbiguousBranch {
            requested: anchor.efficiency,
            max,
        });
    }
    let phi = phi_for_efficiency_below_optimum(c_in, ratio, anchor.efficiency).ok_or(
        AdiabaticError::Unachievable {
            requested: anchor.efficiency,
            max,
        },
    )?;
    PumpModel::new(phi / anchor.power_mw, anchor.delta, Calibration::Calibrated)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgePoint {
    pub delta: f64,
    pub power_mw: f64,
    pub efficiency: f64,
}

/// Efficiency over a (δ, P_b) grid. `efficiency[i][j]` and `phi[i][j]`
/// belong to `deltas[i]` and `powers_mw[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub powers_mw: Vec<f64>,
    pub deltas: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub efficiency: Vec<Vec<f64>>,
    pub ridge: Vec<RidgePoint>,
}

impl SweepGrid {
    /// Column index of the largest efficiency in each δ row.
    pub fn row_argmax(&self) -> Vec<usize> {
        self.efficiency
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (j, &f)| {
                        if f > best.1 {
                            (j, f)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect()
    }
}

/// Log- or linearly spaced axis.
pub fn axis(min: f64, max: f64, points: usize, log: bool) -> Vec<f64> {
    if points == 1 {
        return vec![min];
    }
    (0..points)
        .map(|i| {
            let s = i as f64 / (points - 1) as f64;
            if log {
                (min.ln() + s * (max.ln() - min.ln())).exp()
            } else {
                min + s * (max - min)
            }
        })
        .collect()
}

/// Fills F(P_b, δ) and the ridge P_b*(δ) where φ = √(1+C_in). Rows are
/// computed independently and collected in input order.
pub fn sweep_landscape(
    model: &PumpModel,
    c_in: f64,
    powers_mw: &[f64],
    deltas: &[f64],
) -> SweepGrid {
    let rows: Vec<(Vec<f64>, Vec<f64>)> = deltas
        .par_iter()
        .map(|&delta| {
            let ratio = kappa_ratio_for_delta(delta);
            powers_mw
                .iter()
                .map(|&p| {
                    let phi = model.phi_at(p, delta);
                    (phi, efficiency_closed_form(c_in, phi, ratio))
                })
                .unzip()
        })
        .collect();
    let (phi, efficiency) = rows.into_iter().unzip();
    let phi_opt = optimal_phi(c_in);
    let ridge = deltas
        .iter()
        .map(|&delta| RidgePoint {
            delta,
            power_mw: model.power_for_phi(phi_opt, delta),
            efficiency: efficiency_optimum(c_in, kappa_ratio_for_delta(delta)),
        })
        .collect();
    SweepGrid {
        powers_mw: powers_mw.to_vec(),
        deltas: deltas.to_vec(),
        phi,
        efficiency,
        ridge,
    }
}
