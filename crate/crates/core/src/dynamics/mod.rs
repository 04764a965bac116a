//! Exact single-excitation dynamics of the emitter + two-mode cavity.
//!
//! The state is |ψ⟩ = c_s|s⟩ + c_e|e⟩ + c_a|1_a⟩ + c_c|1_c⟩. Population that
//! leaves the four amplitudes is booked per loss channel by integrating the
//! channel rates alongside the amplitudes with the same Runge–Kutta stages,
//! so that residual norm plus the four loss integrals stays equal to the
//! initial norm to integrator accuracy.

mod bath;
mod markov;
mod wavepacket;

pub use bath::{integrate_bath_resolved, BathConfig, BathTrajectory};
pub use markov::{efficiency_exact, integrate};
pub use wavepacket::{extract_wavepacket, Wavepacket};

use num_complex::Complex64;
use thiserror::Error;

use crate::drive::DriveError;
use crate::model::ModelError;
use crate::ode::OdeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("integration did not settle: population {remaining:e} still in |e⟩, a, c at the horizon (limit {limit:e})")]
    NonConvergence { remaining: f64, limit: f64 },
    #[error("step size underflow at t = {t:e} s")]
    StepUnderflow { t: f64 },
    #[error(transparent)]
    Ode(OdeError),
    #[error("drive undersampled: max spacing {spacing:e} s × peak Ω {peak:e} rad/s = {product:.3} > 0.1")]
    UnderSampledDrive {
        spacing: f64,
        peak: f64,
        product: f64,
    },
    #[error("invalid integration request: {0}")]
    InvalidRequest(String),
    #[error(
        "wavepacket norm {wavepacket:.6e} deviates from extracted probability {extracted:.6e}"
    )]
    NormMismatch { wavepacket: f64, extracted: f64 },
    #[error("bath too narrow: measured mode-c decay {measured:.6e} rad/s vs expected {expected:.6e} rad/s")]
    BathTooNarrow { measured: f64, expected: f64 },
    #[error("invalid bath configuration: {0}")]
    InvalidBath(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Drive(#[from] DriveError),
}

impl From<OdeError> for DynamicsError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::StepUnderflow { t, .. } => DynamicsError::StepUnderflow { t },
            other => DynamicsError::Ode(other),
        }
    }
}

/// The four complex amplitudes at time `t` (seconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeState {
    pub t: f64,
    pub c_s: Complex64,
    pub c_e: Complex64,
    pub c_a: Complex64,
    pub c_c: Complex64,
}

impl AmplitudeState {
    /// Emitter in |s⟩, no photons.
    pub fn ground(t: f64) -> Self {
        AmplitudeState {
            t,
            c_s: Complex64::new(1.0, 0.0),
            c_e: Complex64::new(0.0, 0.0),
            c_a: Complex64::new(0.0, 0.0),
            c_c: Complex64::new(0.0, 0.0),
        }
    }

    pub fn empty(t: f64) -> Self {
        AmplitudeState {
            c_s: Complex64::new(0.0, 0.0),
            ..Self::ground(t)
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_s.norm_sqr() + self.c_e.norm_sqr() + self.c_a.norm_sqr() + self.c_c.norm_sqr()
    }

    /// Population in the decaying amplitudes c_e, c_a, c_c.
    pub fn excited_population(&self) -> f64 {
        self.c_e.norm_sqr() + self.c_a.norm_sqr() + self.c_c.norm_sqr()
    }

    pub(crate) fn to_slice(self, y: &mut [f64]) {
        for (k, c) in [self.c_s, self.c_e, self.c_a, self.c_c]
            .into_iter()
            .enumerate()
        {
            y[2 * k] = c.re;
            y[2 * k + 1] = c.im;
        }
    }

    pub(crate) fn from_slice(t: f64, y: &[f64]) -> Self {
        AmplitudeState {
            t,
            c_s: Complex64::new(y[0], y[1]),
            c_e: Complex64::new(y[2], y[3]),
            c_a: Complex64::new(y[4], y[5]),
            c_c: Complex64::new(y[6], y[7]),
        }
    }
}

/// Where the initial population ended up. All entries are probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBudget {
    /// ∫γ|c_e|² dt
    pub emitted_free_space: f64,
    /// ∫κ_a|c_a|² dt
    pub lost_mode_a: f64,
    /// ∫κ_{c,in}|c_c|² dt
    pub lost_mode_c_inherent: f64,
    /// ∫κ_{c,ex}|c_c|² dt, or the final bath population in bath-resolved runs
    pub extracted: f64,
    /// |c_s|² + |c_e|² + |c_a|² + |c_c|² at the horizon
    pub residual_norm: f64,
}

impl LossBudget {
    pub fn total_loss(&self) -> f64 {
        self.emitted_free_space + self.lost_mode_a + self.lost_mode_c_inherent + self.extracted
    }

    pub fn total(&self) -> f64 {
        self.total_loss() + self.residual_norm
    }

    /// Extracted fraction of everything that left the system; 0 when
    /// nothing left.
    pub fn efficiency(&self) -> f64 {
        let lost = self.total_loss();
        if lost > 0.0 {
            self.extracted / lost
        } else {
            0.0
        }
    }

    /// Fraction of the emitted population that passed through mode c.
    pub fn internal_conversion(&self) -> f64 {
        let lost = self.total_loss();
        if lost > 0.0 {
            (self.extracted + self.lost_mode_c_inherent) / lost
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Relative tolerance of the step controller.
    pub tol: f64,
    /// Number of uniformly spaced output samples over `[0, horizon]`.
    pub samples: usize,
    /// Initial amplitudes; `None` starts in |s⟩.
    pub initial: Option<AmplitudeState>,
    /// Enforce that the excited amplitudes have decayed at the horizon.
    pub require_settled: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            tol: 1e-10,
            samples: 2001,
            initial: None,
            require_settled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<AmplitudeState>,
    pub budget: LossBudget,
    /// Largest growth of the total norm over a single accepted step.
    pub max_norm_increase: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &AmplitudeState {
        self.states
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn sample_spacing(&self) -> f64 {
        if self.states.len() < 2 {
            0.0
        } else {
            self.states[1].t - self.states[0].t
        }
    }
}

pub(crate) fn uniform_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![end];
    }
    (0..n)
        .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
        .collect()
}

// Rates in units of 1e9 rad/s; only their ratios matter.
#[cfg(test)]
pub(crate) fn toy(
    g1: f64,
    gamma: f64,
    kappa_a: f64,
    kc_in: f64,
    kc_ex: f64,
    g2: f64,
) -> crate::model::SystemParams {
    use crate::model::{CavityMode, EmitterParams, ModeLabel, Polarization, SystemParams};
    let a = CavityMode::new(ModeLabel::A, 950e-9, 1e5, 1.0, 3.5, Polarization::TM).unwrap();
    let c = CavityMode::new(ModeLabel::C, 1425e-9, 1e6, 1.0, 3.4, Polarization::TE).unwrap();
    let em = EmitterParams::new(g1 * 1e9, gamma * 1e9, 0.2).unwrap();
    SystemParams::new(em, a, c, kappa_a * 1e9, kc_in * 1e9, kc_ex * 1e9, g2 * 1e9).unwrap()
}
