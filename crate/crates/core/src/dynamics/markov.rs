use super::{
    uniform_grid, AmplitudeState, DynamicsError, IntegrateOptions, LossBudget, Trajectory,
};
use crate::drive::DrivePulse;
use crate::model::SystemParams;
use crate::ode::{Dopri5, OdeSystem, StepOptions};

/// Amplitude equations with the waveguide eliminated (κ_c = κ_{c,in} + κ_{c,ex}),
/// written in units of κ_a: τ = κ_a t, every rate divided by κ_a.
pub(super) struct MarkovSystem<'a> {
    pub g1: f64,
    pub g2: f64,
    pub gamma: f64,
    pub kappa_a: f64,
    pub kappa_c_in: f64,
    pub kappa_c_ex: f64,
    pub time_unit: f64,
    pub drive: &'a DrivePulse,
}

impl<'a> MarkovSystem<'a> {
    pub fn new(params: &SystemParams, drive: &'a DrivePulse) -> Self {
        let k = params.kappa_a;
        MarkovSystem {
            g1: params.emitter.g1 / k,
            g2: params.g2 / k,
            gamma: params.emitter.gamma / k,
            kappa_a: 1.0,
            kappa_c_in: params.kappa_c_in / k,
            kappa_c_ex: params.kappa_c_ex / k,
            time_unit: 1.0 / k,
            drive,
        }
    }
}

// y = [cs, ce, ca, cc] as (re, im) pairs, then ∫γ|ce|², ∫κa|ca|², ∫κc,in|cc|², ∫κc,ex|cc|²
impl OdeSystem for MarkovSystem<'_> {
    fn dim(&self) -> usize {
        12
    }

    fn rhs(&self, tau: f64, y: &[f64], dy: &mut [f64]) {
        let t = tau * self.time_unit;
        let omega = self.drive.omega(t) * self.time_unit;
        let g2 = self.g2 * self.drive.pump_scale(t);
        let (g1, gamma, ka) = (self.g1, self.gamma, self.kappa_a);
        let kc = self.kappa_c_in + self.kappa_c_ex;
        let (sr, si, er, ei, ar, ai, cr, ci) = (y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7]);
        // ċs = −iΩ ce
        dy[0] = omega * ei;
        dy[1] = -omega * er;
        // ċe = −iΩ cs − i g1 ca − γ/2 ce
        dy[2] = omega * si + g1 * ai - 0.5 * gamma * er;
        dy[3] = -omega * sr - g1 * ar - 0.5 * gamma * ei;
        // ċa = −i g1 ce − i g2 cc − κa/2 ca
        dy[4] = g1 * ei + g2 * ci - 0.5 * ka * ar;
        dy[5] = -g1 * er - g2 * cr - 0.5 * ka * ai;
        // ċc = −i g2 ca − κc/2 cc
        dy[6] = g2 * ai - 0.5 * kc * cr;
        dy[7] = -g2 * ar - 0.5 * kc * ci;
        let pe = er * er + ei * ei;
        let pa = ar * ar + ai * ai;
        let pc = cr * cr + ci * ci;
        dy[8] = gamma * pe;
        dy[9] = ka * pa;
        dy[10] = self.kappa_c_in * pc;
        dy[11] = self.kappa_c_ex * pc;
    }
}

pub(super) fn check_drive_sampling(drive: &DrivePulse) -> Result<(), DynamicsError> {
    let spacing = drive.max_sample_spacing();
    let peak = drive.peak();
    let product = spacing * peak;
    if product > 0.1 {
        return Err(DynamicsError::UnderSampledDrive {
            spacing,
            peak,
            product,
        });
    }
    Ok(())
}

pub(super) fn check_request(horizon: f64, opts: &IntegrateOptions) -> Result<(), DynamicsError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(DynamicsError::InvalidRequest(format!(
            "horizon must be > 0, got {horizon}"
        )));
    }
    if !(opts.tol > 0.0 && opts.tol < 1e-2) {
        return Err(DynamicsError::InvalidRequest(format!(
            "tolerance must be in (0, 1e-2), got {}",
            opts.tol
        )));
    }
    if opts.samples < 2 {
        return Err(DynamicsError::InvalidRequest(
            "need at least two output samples".into(),
        ));
    }
    Ok(())
}

/// Integrates the four amplitude equations from t = 0 to `horizon` with the
/// control pulse `drive` (Ω = 0 outside its support).
pub fn integrate(
    params: &SystemParams,
    drive: &DrivePulse,
    horizon: f64,
    opts: &IntegrateOptions,
) -> Result<Trajectory, DynamicsError> {
    check_request(horizon, opts)?;
    check_drive_sampling(drive)?;
    let sys = MarkovSystem::new(params, drive);
    let k = params.kappa_a;

    let initial = opts.initial.unwrap_or_else(|| AmplitudeState::ground(0.0));
    let mut y = vec![0.0; 12];
    initial.to_slice(&mut y);

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
            let n0: f64 = y0[..8].iter().map(|v| v * v).sum();
            let n1: f64 = y1[..8].iter().map(|v| v * v).sum();
            max_increase = max_increase.max(n1 - n0);
        },
    )?;

    let last = AmplitudeState::from_slice(horizon, &y);
    let budget = LossBudget {
        emitted_free_space: y[8],
        lost_mode_a: y[9],
        lost_mode_c_inherent: y[10],
        extracted: y[11],
        residual_norm: last.norm_sqr(),
    };
    if opts.require_settled {
        let remaining = last.excited_population();
        let limit = 100.0 * opts.tol;
        if remaining > limit {
            return Err(DynamicsError::NonConvergence { remaining, limit });
        }
    }
    Ok(Trajectory {
        states,
        budget,
        max_norm_increase: max_increase,
        steps: stats.accepted,
    })
}

/// Probability that the photon ends up in the waveguide, computed as the
/// extracted integral over the sum of all loss integrals.
pub fn efficiency_exact(
    params: &SystemParams,
    drive: &DrivePulse,
    horizon: f64,
    opts: &IntegrateOptions,
) -> Result<f64, DynamicsError> {
    Ok(integrate(params, drive, horizon, opts)?.budget.efficiency())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::toy;
    use num_complex::Complex64;

    #[test]
    fn zero_drive_is_stationary() {
        let p = toy(2.0, 0.5, 1.0, 0.3, 3.0, 1.0);
        let drive = DrivePulse::zero(50e-9);
        let traj = integrate(&p, &drive, 50e-9, &IntegrateOptions::default()).unwrap();
        for s in &traj.states {
            assert_eq!(s.c_s, Complex64::new(1.0, 0.0));
            assert_eq!(s.excited_population(), 0.0);
        }
        assert_eq!(traj.budget.total_loss(), 0.0);
        assert_eq!(traj.budget.residual_norm, 1.0);
        assert_eq!(traj.budget.efficiency(), 0.0);
    }

    #[test]
    fn uncoupled_emitter_decays_to_free_space() {
        let p = toy(0.0, 0.5, 1.0, 0.3, 3.0, 1.0);
        // π pulse: ∫Ω dt = π/2 for the s↔e Rabi rotation with coupling Ω
        let width = 0.2e-9;
        let peak = std::f64::consts::FRAC_PI_2 / (width * (2.0 * std::f64::consts::PI).sqrt());
        let drive = DrivePulse::gaussian(peak, 1.5e-9, width, 3e-9, 601).unwrap();
        let horizon = 120e-9;
        let opts = IntegrateOptions {
            samples: 201,
            ..Default::default()
        };
        let traj = integrate(&p, &drive, horizon, &opts).unwrap();
        let b = traj.budget;
        assert_eq!(b.lost_mode_a, 0.0);
        assert_eq!(b.extracted, 0.0);
        assert!(b.residual_norm < 0.02, "{b:?}");
        assert!((b.emitted_free_space + b.residual_norm - 1.0).abs() < 1e-8);
    }

    #[test]
    fn no_extraction_channel_means_zero_efficiency() {
        let p = toy(2.0, 0.5, 1.0, 0.3, 0.0, 1.0);
        let drive = DrivePulse::gaussian(0.3e9, 20e-9, 5e-9, 40e-9, 801).unwrap();
        let opts = IntegrateOptions {
            require_settled: false,
            ..Default::default()
        };
        assert_eq!(efficiency_exact(&p, &drive, 60e-9, &opts).unwrap(), 0.0);
    }

    #[test]
    fn completeness_and_linearity() {
        let p = toy(2.0, 0.5, 1.0, 0.3, 3.0, 1.2);
        let drive = DrivePulse::gaussian(0.4e9, 20e-9, 6e-9, 40e-9, 801).unwrap();
        let opts = IntegrateOptions {
            require_settled: false,
            ..Default::default()
        };
        let full = integrate(&p, &drive, 60e-9, &opts).unwrap();
        assert!(
            (full.budget.total() - 1.0).abs() < 1e-8,
            "{:?}",
            full.budget
        );
        assert!(full.max_norm_increase <= 1e-12);

        let half = IntegrateOptions {
            initial: Some(AmplitudeState {
                c_s: Complex64::new(0.5, 0.0),
                ..AmplitudeState::empty(0.0)
            }),
            ..opts
        };
        let scaled = integrate(&p, &drive, 60e-9, &half).unwrap();
        for (a, b) in full.states.iter().zip(&scaled.states) {
            assert!((a.c_c * 0.5 - b.c_c).norm() < 1e-9);
            assert!((a.c_s * 0.5 - b.c_s).norm() < 1e-9);
        }
        assert!((scaled.budget.extracted - 0.25 * full.budget.extracted).abs() < 1e-9);
        assert!((scaled.budget.lost_mode_a - 0.25 * full.budget.lost_mode_a).abs() < 1e-9);
    }

    #[test]
    fn unsettled_run_is_rejected() {
        let p = toy(2.0, 0.5, 1.0, 0.3, 3.0, 1.2);
        let drive = DrivePulse::gaussian(0.4e9, 20e-9, 6e-9, 40e-9, 801).unwrap();
        let r = integrate(&p, &drive, 20e-9, &IntegrateOptions::default());
        assert!(
            matches!(r, Err(DynamicsError::NonConvergence { .. })),
            "{r:?}"
        );
    }

    #[test]
    fn undersampled_drive_is_rejected() {
        let p = toy(2.0, 0.5, 1.0, 0.3, 3.0, 1.2);
        let drive = DrivePulse::gaussian(1e9, 20e-9, 6e-9, 40e-9, 11).unwrap();
        let r = integrate(&p, &drive, 60e-9, &IntegrateOptions::default());
        assert!(matches!(r, Err(DynamicsError::UnderSampledDrive { .. })));
    }
}
