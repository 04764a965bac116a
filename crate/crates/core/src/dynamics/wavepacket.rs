use num_complex::Complex64;

use super::{DynamicsError, Trajectory};
use crate::model::SystemParams;

/// Outgoing single-photon amplitude in the retarded time u = t − z/v,
/// in units of 1/√s so that ∫|ψ|² du is a probability. Multiply by √v to get
/// the spatial amplitude per √m.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavepacket {
    pub start: f64,
    pub step: f64,
    pub samples: Vec<Complex64>,
}

impl Wavepacket {
    pub fn new(start: f64, step: f64, samples: Vec<Complex64>) -> Self {
        Wavepacket {
            start,
            step,
            samples,
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(move |i| self.start + self.step * i as f64)
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.samples.len().saturating_sub(1)) as f64
    }

    /// ∫|ψ|² du by the trapezoid rule.
    pub fn norm(&self) -> f64 {
        trapezoid(self.samples.iter().map(|c| c.norm_sqr()), self.step)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Wavepacket {
            samples: self.samples.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }

    /// ψ*(T − u) on the same grid, T = start + end.
    pub fn time_reversed(&self) -> Self {
        Wavepacket {
            samples: self.samples.iter().rev().map(|c| c.conj()).collect(),
            ..self.clone()
        }
    }

    /// ‖ψ − e^{iθ}target‖/‖target‖ minimized over the global phase θ.
    /// Both packets must share the grid.
    pub fn relative_l2_error_up_to_phase(&self, target: &Wavepacket) -> f64 {
        assert_eq!(
            self.samples.len(),
            target.samples.len(),
            "wavepackets on different grids"
        );
        let overlap: Complex64 = self
            .samples
            .iter()
            .zip(&target.samples)
            .map(|(a, b)| a * b.conj())
            .sum();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let num = trapezoid(
            self.samples
                .iter()
                .zip(&target.samples)
                .map(|(a, b)| (a - phase * b).norm_sqr()),
            self.step,
        );
        let den = target.norm();
        (num / den).sqrt()
    }
}

pub(crate) fn trapezoid(values: impl Iterator<Item = f64>, step: f64) -> f64 {
    let v: Vec<f64> = values.collect();
    match v.len() {
        0 | 1 => 0.0,
        n => step * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1])),
    }
}

/// ψ(u) = i√κ_{c,ex}·c_c(u), sampled on the trajectory grid. The result is
/// checked against the extracted probability of the loss budget.
pub fn extract_wavepacket(
    trajectory: &Trajectory,
    params: &SystemParams,
) -> Result<Wavepacket, DynamicsError> {
    let states = &trajectory.states;
    if states.len() < 2 {
        return Err(DynamicsError::InvalidRequest(
            "trajectory needs at least two samples".into(),
        ));
    }
    let amp = Complex64::new(0.0, params.kappa_c_ex.sqrt());
    let packet = Wavepacket::new(
        states[0].t,
        trajectory.sample_spacing(),
        states.iter().map(|s| amp * s.c_c).collect(),
    );
    let norm = packet.norm();
    let extracted = trajectory.budget.extracted;
    if (norm - extracted).abs() > 1e-3 {
        return Err(DynamicsError::NormMismatch {
            wavepacket: norm,
            extracted,
        });
    }
    Ok(packet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::DrivePulse;
    use crate::dynamics::{integrate, toy, IntegrateOptions};

    #[test]
    fn extracted_norm_matches_budget() {
        let p = toy(2.0, 0.5, 1.0, 0.3, 3.0, 1.2);
        let drive = DrivePulse::gaussian(0.4e9, 20e-9, 6e-9, 40e-9, 801).unwrap();
        let opts = IntegrateOptions {
            samples: 4001,
            require_settled: false,
            ..Default::default()
        };
        let traj = integrate(&p, &drive, 80e-9, &opts).unwrap();
        let psi = extract_wavepacket(&traj, &p).unwrap();
        assert!((psi.norm() - traj.budget.extracted).abs() < 1e-6);
        // real couplings and drive keep the output real
        let peak = psi.samples.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for c in &psi.samples {
            assert!(c.im.abs() < 1e-9 * peak, "{c}");
        }
    }

    #[test]
    fn phase_insensitive_error() {
        let w = Wavepacket::new(
            0.0,
            0.1,
            (0..50)
                .map(|i| Complex64::new((i as f64 * 0.2).sin(), 0.0))
                .collect(),
        );
        let rotated = w.scaled(Complex64::from_polar(1.0, 1.3));
        assert!(w.relative_l2_error_up_to_phase(&rotated) < 1e-12);
        let rev = w.time_reversed().time_reversed();
        assert_eq!(rev, w);
        assert!((w.scaled(Complex64::new(2.0, 0.0)).norm() - 4.0 * w.norm()).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_edges() {
        assert_eq!(trapezoid([].into_iter(), 1.0), 0.0);
        assert_eq!(trapezoid([3.0].into_iter(), 1.0), 0.0);
        assert_eq!(trapezoid([1.0, 1.0, 1.0].into_iter(), 0.5), 1.0);
    }
}
