//! Mode c coupled to an explicitly discretized one-directional waveguide.
//!
//! N bath modes with detunings Δ_j = v·δk_j on a uniform grid centered on
//! ω_c, each coupled with G = g_w·√Δk. In the continuum limit the bath
//! reproduces the Markovian out-coupling κ_{c,ex} = 2πg_w²/v; the discrete
//! spectrum rephases after the recurrence time 2π/Δω, which bounds the
//! usable horizon.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::markov::{check_drive_sampling, check_request};
use super::{
    uniform_grid, AmplitudeState, DynamicsError, IntegrateOptions, LossBudget, Trajectory,
};
use crate::drive::DrivePulse;
use crate::model::SystemParams;
use crate::ode::{Dopri5, OdeSystem, StepOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathConfig {
    pub modes: usize,
    /// Full frequency span covered by the modes (rad/s).
    pub bandwidth: f64,
    /// Group velocity v (m/s); cancels in every probability.
    pub group_velocity: f64,
    /// Continuum coupling g_w (rad/s·√m).
    pub coupling: f64,
}

impl BathConfig {
    pub fn new(
        modes: usize,
        bandwidth: f64,
        group_velocity: f64,
        coupling: f64,
    ) -> Result<Self, DynamicsError> {
        if modes < 100 {
            return Err(DynamicsError::InvalidBath(format!(
                "need at least 100 modes, got {modes}"
            )));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(DynamicsError::InvalidBath("bandwidth must be > 0".into()));
        }
        if !(group_velocity.is_finite() && group_velocity > 0.0) {
            return Err(DynamicsError::InvalidBath(
                "group velocity must be > 0".into(),
            ));
        }
        if !(coupling.is_finite() && coupling >= 0.0) {
            return Err(DynamicsError::InvalidBath("coupling must be >= 0".into()));
        }
        let cfg = BathConfig {
            modes,
            bandwidth,
            group_velocity,
            coupling,
        };
        if bandwidth < 20.0 * cfg.kappa_ex() {
            return Err(DynamicsError::InvalidBath(format!(
                "bandwidth {bandwidth:e} rad/s is below 20 κ_ex = {:e} rad/s",
                20.0 * cfg.kappa_ex()
            )));
        }
        Ok(cfg)
    }

    /// Bath whose continuum coupling reproduces `kappa_ex`.
    pub fn for_kappa_ex(
        modes: usize,
        bandwidth: f64,
        group_velocity: f64,
        kappa_ex: f64,
    ) -> Result<Self, DynamicsError> {
        let coupling = (kappa_ex * group_velocity / (2.0 * PI)).sqrt();
        Self::new(modes, bandwidth, group_velocity, coupling)
    }

    /// 2πg_w²/v.
    pub fn kappa_ex(&self) -> f64 {
        2.0 * PI * self.coupling * self.coupling / self.group_velocity
    }

    /// Frequency spacing Δω of the discrete modes.
    pub fn spacing(&self) -> f64 {
        self.bandwidth / self.modes as f64
    }

    /// Coupling of each discrete mode, G = √(κ_ex Δω / 2π).
    pub fn discrete_coupling(&self) -> f64 {
        (self.kappa_ex() * self.spacing() / (2.0 * PI)).sqrt()
    }

    pub fn detunings(&self) -> Vec<f64> {
        let dw = self.spacing();
        let mid = (self.modes as f64 - 1.0) / 2.0;
        (0..self.modes).map(|j| (j as f64 - mid) * dw).collect()
    }

    /// Time after which the discrete bath re-excites the cavity.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.spacing()
    }

    /// Bath amplitudes of a photon that will arrive at the cavity with
    /// temporal profile `psi(t)` (amplitude per √s, sampled on a uniform grid
    /// starting at `t0`), c_j(0) = √(Δω/2π) ∫ψ(t) e^{iΔ_j t} dt.
    pub fn amplitudes_for_input(&self, t0: f64, dt: f64, psi: &[Complex64]) -> Vec<Complex64> {
        let pref = (self.spacing() / (2.0 * PI)).sqrt();
        self.detunings()
            .iter()
            .map(|&d| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, p) in psi.iter().enumerate() {
                    let t = t0 + dt * i as f64;
                    let w = if i == 0 || i + 1 == psi.len() {
                        0.5
                    } else {
                        1.0
                    };
                    acc += p * Complex64::from_polar(w, d * t);
                }
                acc * (pref * dt)
            })
            .collect()
    }

    /// Outgoing wavepacket ψ(u) = √(Δω/2π) Σ_j c_j(T) e^{iΔ_j (T − u)} in
    /// retarded time, evaluated at `times`.
    pub fn wavepacket_from_amplitudes(
        &self,
        amplitudes: &[Complex64],
        horizon: f64,
        times: &[f64],
    ) -> Vec<Complex64> {
        let pref = (self.spacing() / (2.0 * PI)).sqrt();
        let det = self.detunings();
        times
            .iter()
            .map(|&u| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (c, d) in amplitudes.iter().zip(&det) {
                    acc += c * Complex64::from_polar(1.0, d * (horizon - u));
                }
                acc * pref
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathTrajectory {
    pub trajectory: Trajectory,
    /// Final bath amplitudes c_j(T).
    pub bath_amplitudes: Vec<Complex64>,
    pub config: BathConfig,
    pub horizon: f64,
}

struct BathSystem<'a> {
    g1: f64,
    g2: f64,
    gamma: f64,
    kappa_c_in: f64,
    coupling: f64,
    detunings: Vec<f64>,
    time_unit: f64,
    drive: &'a DrivePulse,
}

// y = [cs, ce, ca, cc] pairs, [c_j] pairs, ∫γ|ce|², ∫κa|ca|², ∫κc,in|cc|²
impl OdeSystem for BathSystem<'_> {
    fn dim(&self) -> usize {
        8 + 2 * self.detunings.len() + 3
    }

    fn rhs(&self, tau: f64, y: &[f64], dy: &mut [f64]) {
        let t = tau * self.time_unit;
        let omega = self.drive.omega(t) * self.time_unit;
        let g2 = self.g2 * self.drive.pump_scale(t);
        let (g1, gamma, kc) = (self.g1, self.gamma, self.kappa_c_in);
        let (sr, si, er, ei, ar, ai, cr, ci) = (y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7]);
        let n = self.detunings.len();
        let bath = &y[8..8 + 2 * n];
        let (mut sum_r, mut sum_i) = (0.0, 0.0);
        for j in 0..n {
            sum_r += bath[2 * j];
            sum_i += bath[2 * j + 1];
        }
        let g = self.coupling;
        dy[0] = omega * ei;
        dy[1] = -omega * er;
        dy[2] = omega * si + g1 * ai - 0.5 * gamma * er;
        dy[3] = -omega * sr - g1 * ar - 0.5 * gamma * ei;
        dy[4] = g1 * ei + g2 * ci - 0.5 * ar;
        dy[5] = -g1 * er - g2 * cr - 0.5 * ai;
        // ċc = −i g2 ca − κc,in/2 cc + i G Σ c_j
        dy[6] = g2 * ai - 0.5 * kc * cr - g * sum_i;
        dy[7] = -g2 * ar - 0.5 * kc * ci + g * sum_r;
        // ċ_j = −iΔ_j c_j + i G cc
        let dbath = &mut dy[8..8 + 2 * n];
        for j in 0..n {
            let d = self.detunings[j];
            let (br, bi) = (bath[2 * j], bath[2 * j + 1]);
            dbath[2 * j] = d * bi - g * ci;
            dbath[2 * j + 1] = -d * br + g * cr;
        }
        let off = 8 + 2 * n;
        dy[off] = gamma * (er * er + ei * ei);
        dy[off + 1] = ar * ar + ai * ai;
        dy[off + 2] = kc * (cr * cr + ci * ci);
    }
}

fn bath_system<'a>(
    params: &SystemParams,
    drive: &'a DrivePulse,
    bath: &BathConfig,
) -> BathSystem<'a> {
    let k = params.kappa_a;
    BathSystem {
        g1: params.emitter.g1 / k,
        g2: params.g2 / k,
        gamma: params.emitter.gamma / k,
        kappa_c_in: params.kappa_c_in / k,
        coupling: bath.discrete_coupling() / k,
        detunings: bath.detunings().iter().map(|d| d / k).collect(),
        time_unit: 1.0 / k,
        drive,
    }
}

/// Measures the free decay rate of a singly excited mode c into its
/// intrinsic loss plus the discretized bath, over three Markovian lifetimes.
pub fn measured_mode_c_decay(
    params: &SystemParams,
    bath: &BathConfig,
) -> Result<f64, DynamicsError> {
    let expected = params.kappa_c_in + bath.kappa_ex();
    let t_probe = (3.0 / expected).min(0.25 * bath.recurrence_time());
    let isolated = params.with_g2(0.0)?.with_g1(0.0)?;
    let zero = DrivePulse::zero(t_probe);
    let sys = bath_system(&isolated, &zero, bath);
    let mut y = vec![0.0; sys.dim()];
    y[6] = 1.0;
    let solver = Dopri5::new(StepOptions {
        rtol: 1e-9,
        atol: 1e-12,
        ..StepOptions::default()
    });
    solver.solve(
        &sys,
        0.0,
        &mut y,
        t_probe * params.kappa_a,
        &[],
        |_, _, _| {},
        |_, _, _, _| {},
    )?;
    let pop = y[6] * y[6] + y[7] * y[7];
    Ok(-pop.ln() / t_probe)
}

/// Integrates the cavity amplitudes coupled to the discretized waveguide
/// without the Markov approximation. The extraction rate is set entirely by
/// `bath` (`params.kappa_c_ex` is ignored); the bath starts empty unless
/// `bath_initial` is given.
pub fn integrate_bath_resolved(
    params: &SystemParams,
    drive: &DrivePulse,
    bath: &BathConfig,
    horizon: f64,
    opts: &IntegrateOptions,
    bath_initial: Option<&[Complex64]>,
) -> Result<BathTrajectory, DynamicsError> {
    check_request(horizon, opts)?;
    check_drive_sampling(drive)?;
    if horizon > bath.recurrence_time() {
        return Err(DynamicsError::InvalidBath(format!(
            "horizon {horizon:e} s exceeds the bath recurrence time {:e} s",
            bath.recurrence_time()
        )));
    }
    let expected = params.kappa_c_in + bath.kappa_ex();
    let measured = measured_mode_c_decay(params, bath)?;
    if ((measured - expected) / expected).abs() > 0.05 {
        return Err(DynamicsError::BathTooNarrow { measured, expected });
    }

    let sys = bath_system(params, drive, bath);
    let n = bath.modes;
    let k = params.kappa_a;
    let mut y = vec![0.0; sys.dim()];
    opts.initial
        .unwrap_or_else(|| AmplitudeState::ground(0.0))
        .to_slice(&mut y);
    if let Some(init) = bath_initial {
        if init.len() != n {
            return Err(DynamicsError::InvalidRequest(format!(
                "{} bath amplitudes for {n} modes",
                init.len()
            )));
        }
        for (j, c) in init.iter().enumerate() {
            y[8 + 2 * j] = c.re;
            y[9 + 2 * j] = c.im;
        }
    }
    let initial_bath: f64 = y[8..8 + 2 * n].iter().map(|v| v * v).sum();

    let grid = uniform_grid(0.0, horizon, opts.samples);
    let checkpoints: Vec<f64> = grid.iter().map(|t| t * k).collect();
    let mut states = vec![AmplitudeState::empty(0.0); grid.len()];
    let mut max_increase: f64 = 0.0;
    let solver = Dopri5::new(StepOptions {
        rtol: opts.tol,
        atol: 1e-2 * opts.tol,
        ..StepOptions::default()
    });
    let stats = solver.solve(
        &sys,
        0.0,
        &mut y,
        horizon * k,
        &checkpoints,
        |i, _tau, y| states[i] = AmplitudeState::from_slice(grid[i], y),
        |_, y0, _, y1| {
            let n0: f64 = y0[..8 + 2 * n].iter().map(|v| v * v).sum();
            let n1: f64 = y1[..8 + 2 * n].iter().map(|v| v * v).sum();
            max_increase = max_increase.max(n1 - n0);
        },
    )?;

    let last = AmplitudeState::from_slice(horizon, &y);
    let amplitudes: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(y[8 + 2 * j], y[9 + 2 * j]))
        .collect();
    let bath_pop: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
    let off = 8 + 2 * n;
    let budget = LossBudget {
        emitted_free_space: y[off],
        lost_mode_a: y[off + 1],
        lost_mode_c_inherent: y[off + 2],
        extracted: bath_pop - initial_bath,
        residual_norm: last.norm_sqr(),
    };
    if opts.require_settled {
        let remaining = last.excited_population();
        let limit = 100.0 * opts.tol;
        if remaining > limit {
            return Err(DynamicsError::NonConvergence { remaining, limit });
        }
    }
    Ok(BathTrajectory {
        trajectory: Trajectory {
            states,
            budget,
            max_norm_increase: max_increase,
            steps: stats.accepted,
        },
        bath_amplitudes: amplitudes,
        config: *bath,
        horizon,
    })
}
