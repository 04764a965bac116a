//! Drive-pulse design for a prescribed output wavepacket, and storage of an
//! incoming photon with a time-reversed drive.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adiabatic::efficiency_closed_form;
use crate::drive::{DriveError, DrivePulse};
use crate::dynamics::{
    integrate_bath_resolved, AmplitudeState, BathConfig, DynamicsError, IntegrateOptions,
    LossBudget, Wavepacket,
};
use crate::model::SystemParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("target norm {norm:.6} exceeds the reachable efficiency {max:.6}")]
    UnachievableNorm { norm: f64, max: f64 },
    #[error("target bandwidth {bandwidth:.4e} rad/s is not below κ_c = {kappa_c:.4e} rad/s")]
    BandwidthViolation { bandwidth: f64, kappa_c: f64 },
    #[error("c_s is exhausted at t = {at:e} s; only {captured:.6} of the target norm {target:.6} can be emitted")]
    SingularTail { at: f64, captured: f64, target: f64 },
    #[error("drive leaves the adiabatic regime: 4Ω²/γ_total = {rate:.4e} rad/s exceeds {limit:.4e} rad/s at t = {at:e} s")]
    AdiabaticViolation { rate: f64, limit: f64, at: f64 },
    #[error("target is not real up to a global phase (relative imaginary part {0:.3e})")]
    ChirpedTarget(f64),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error(transparent)]
    Drive(#[from] DriveError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Desired outgoing wavepacket ψ_w(u), amplitude per √s on a uniform grid.
/// Its norm is the extraction probability the drive has to achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetWavepacket {
    pub packet: Wavepacket,
}

impl TargetWavepacket {
    pub fn new(packet: Wavepacket) -> Result<Self, PulseError> {
        if packet.samples.len() < 5 {
            return Err(PulseError::InvalidTarget(format!(
                "need at least 5 samples, got {}",
                packet.samples.len()
            )));
        }
        if !(packet.step > 0.0 && packet.step.is_finite())
            || !(packet.start >= 0.0 && packet.start.is_finite())
        {
            return Err(PulseError::InvalidTarget(
                "grid must start at t >= 0 with a positive step".into(),
            ));
        }
        if packet
            .samples
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(PulseError::InvalidTarget("samples must be finite".into()));
        }
        Ok(TargetWavepacket { packet })
    }

    /// Gaussian with intensity |ψ|² of standard deviation `width`, scaled to
    /// ∫|ψ|² = `norm`, sampled on `n` points over `[0, end]`.
    pub fn gaussian(
        norm: f64,
        center: f64,
        width: f64,
        end: f64,
        n: usize,
    ) -> Result<Self, PulseError> {
        if !(norm >= 0.0 && width > 0.0 && end > 0.0 && n >= 5) {
            return Err(PulseError::InvalidTarget(
                "gaussian needs norm >= 0, width > 0, end > 0, n >= 5".into(),
            ));
        }
        let step = end / (n - 1) as f64;
        let amp = (norm / (width * (2.0 * std::f64::consts::PI).sqrt())).sqrt();
        let samples = (0..n)
            .map(|i| {
                let x = (i as f64 * step - center) / width;
                Complex64::new(amp * (-0.25 * x * x).exp(), 0.0)
            })
            .collect();
        Self::new(Wavepacket::new(0.0, step, samples))
    }

    pub fn norm(&self) -> f64 {
        self.packet.norm()
    }

    /// RMS angular frequency √(∫|ψ'|²/∫|ψ|²).
    pub fn bandwidth(&self) -> f64 {
        let s = &self.packet.samples;
        let h = self.packet.step;
        let deriv: f64 = s
            .windows(2)
            .map(|w| ((w[1] - w[0]) / h).norm_sqr())
            .sum::<f64>()
            * h;
        let norm = self.norm();
        if norm > 0.0 {
            (deriv / norm).sqrt()
        } else {
            0.0
        }
    }

    /// Real profile r ≥ 0 at its peak with ψ = e^{iθ}r, or the size of the
    /// residual imaginary part.
    fn real_profile(&self) -> Result<Vec<f64>, PulseError> {
        let s = &self.packet.samples;
        let sq: Complex64 = s.iter().map(|c| c * c).sum();
        let theta = 0.5 * sq.arg();
        let rot = Complex64::from_polar(1.0, -theta);
        let mut r: Vec<f64> = s.iter().map(|c| (c * rot).re).collect();
        let im: f64 = s.iter().map(|c| (c * rot).im.powi(2)).sum::<f64>();
        let total: f64 = s.iter().map(|c| c.norm_sqr()).sum();
        let rel = (im / total).sqrt();
        if rel > 1e-6 {
            return Err(PulseError::ChirpedTarget(rel));
        }
        let peak = r
            .iter()
            .copied()
            .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if peak < 0.0 {
            r.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Inversion {
    /// Inverts the full amplitude equations through the chain c_c → c_a →
    /// c_e → Ω c_s using finite differences of the target.
    Exact,
    /// Uses the adiabatically eliminated relation |ψ|² = K Ω² c_s².
    Adiabatic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeOptions {
    pub method: Inversion,
    /// 4Ω²/γ_total must stay below this multiple of κ_c.
    pub adiabatic_guard: f64,
    /// Ω is set to zero once c_s² drops below this value.
    pub depletion_floor: f64,
    /// Shaping fails if less than this fraction of the target norm is
    /// captured before c_s is exhausted.
    pub min_captured_fraction: f64,
}

impl Default for ShapeOptions {
    fn default() -> Self {
        ShapeOptions {
            method: Inversion::Exact,
            adiabatic_guard: 0.5,
            depletion_floor: 1e-6,
            min_captured_fraction: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapedDrive {
    pub drive: DrivePulse,
    /// c_s² implied by the inversion on the target grid.
    pub c_s_squared: Vec<f64>,
    /// Target norm emitted before the drive was switched off.
    pub captured_norm: f64,
    /// Time at which c_s² hit the depletion floor, if it did.
    pub truncated_at: Option<f64>,
}

/// Five-point central derivative with zero extension beyond the grid.
fn derivative(f: &[f64], h: f64) -> Vec<f64> {
    let at = |i: isize| {
        if i < 0 || i as usize >= f.len() {
            0.0
        } else {
            f[i as usize]
        }
    };
    (0..f.len() as isize)
        .map(|i| (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * h))
        .collect()
}

/// Computes the control Ω(t) ≥ 0 whose emitted wavepacket equals `target`
/// up to a global phase. The returned drive lives on the target grid.
pub fn shape_drive(
    target: &TargetWavepacket,
    params: &SystemParams,
    opts: &ShapeOptions,
) -> Result<ShapedDrive, PulseError> {
    let packet = &target.packet;
    let n = packet.samples.len();
    let times: Vec<f64> = packet.times().collect();
    let norm = target.norm();
    if norm == 0.0 {
        return Ok(ShapedDrive {
            drive: DrivePulse::from_samples(times, vec![0.0; n])?,
            c_s_squared: vec![1.0; n],
            captured_norm: 0.0,
            truncated_at: None,
        });
    }
    let max = efficiency_closed_form(params.c_in(), params.phi(), params.kappa_ratio());
    if norm > max * (1.0 + 1e-9) {
        return Err(PulseError::UnachievableNorm { norm, max });
    }
    let kappa_c = params.kappa_c();
    let bandwidth = target.bandwidth();
    if bandwidth >= kappa_c {
        return Err(PulseError::BandwidthViolation { bandwidth, kappa_c });
    }
    if params.kappa_c_ex == 0.0 || params.g2 == 0.0 || params.emitter.g1 == 0.0 {
        return Err(PulseError::InvalidTarget(
            "system cannot emit into the waveguide".into(),
        ));
    }
    let r = target.real_profile()?;
    let h = packet.step;

    // X = Ω c_s and the quantity whose integral depletes c_s²: d(c_s²)/dt = 2X·x_e
    let (x, xe) = match opts.method {
        Inversion::Exact => {
            let p = params;
            let (g1, g2, gamma) = (p.emitter.g1, p.g2, p.emitter.gamma);
            // c_c = i q, c_a = A, c_e = i e; target emitted ψ = −r
            let q: Vec<f64> = r.iter().map(|v| v / p.kappa_c_ex.sqrt()).collect();
            let dq = derivative(&q, h);
            let a: Vec<f64> = q
                .iter()
                .zip(&dq)
                .map(|(q, dq)| -(dq + 0.5 * kappa_c * q) / g2)
                .collect();
            let da = derivative(&a, h);
            let e: Vec<f64> = (0..n)
                .map(|i| (da[i] - g2 * q[i] + 0.5 * p.kappa_a * a[i]) / g1)
                .collect();
            let de = derivative(&e, h);
            let x: Vec<f64> = (0..n)
                .map(|i| -(de[i] + g1 * a[i] + 0.5 * gamma * e[i]))
                .collect();
            (x, e)
        }
        Inversion::Adiabatic => {
            let gt = params.gamma_total();
            // |ψ| = √K Ω c_s, ċ_s = −2Ω² c_s/γ_t, so d(c_s²)/dt = −|ψ|²/F with F = Kγ_t/4
            let k = 4.0 * max / gt;
            let x: Vec<f64> = r.iter().map(|v| v / k.sqrt()).collect();
            let xe: Vec<f64> = x.iter().map(|v| -2.0 * v / gt).collect();
            (x, xe)
        }
    };

    let mut cs2 = vec![1.0; n];
    let mut omega = vec![0.0; n];
    let mut truncated_at = None;
    let mut acc = 1.0;
    let limit = opts.adiabatic_guard * kappa_c;
    let gt = params.gamma_total();
    for i in 0..n {
        if i > 0 {
            acc += h * (x[i] * xe[i] + x[i - 1] * xe[i - 1]);
        }
        if truncated_at.is_some() || acc < opts.depletion_floor {
            if truncated_at.is_none() {
                truncated_at = Some(times[i]);
            }
            cs2[i] = acc.max(0.0);
            continue;
        }
        cs2[i] = acc;
        let w = (x[i] / acc.sqrt()).max(0.0);
        let rate = 4.0 * w * w / gt;
        if rate > limit {
            return Err(PulseError::AdiabaticViolation {
                rate,
                limit,
                at: times[i],
            });
        }
        omega[i] = w;
    }
    let captured = match truncated_at {
        None => norm,
        Some(t) => {
            let cut = ((t - packet.start) / h).round() as usize;
            Wavepacket::new(packet.start, h, packet.samples[..cut.max(1)].to_vec()).norm()
        }
    };
    if let Some(at) = truncated_at {
        if captured < opts.min_captured_fraction * norm {
            return Err(PulseError::SingularTail {
                at,
                captured,
                target: norm,
            });
        }
        log::warn!("drive truncated at t = {at:e} s where c_s² fell below {}; captured norm {captured:.6} of {norm:.6}", opts.depletion_floor);
    }
    Ok(ShapedDrive {
        drive: DrivePulse::from_samples(times, omega)?,
        c_s_squared: cs2,
        captured_norm: captured,
        truncated_at,
    })
}

/// Adiabatically eliminated response to `drive`: c_s(t) = exp(−2∫Ω²/γ_t)
/// and ψ(u) = −8√κ_{c,ex} g₁g₂ Ω c_s/(γ_t(κ_aκ_c + 4g₂²)), on `n` uniform
/// points over `[0, horizon]`.
pub fn adiabatic_emission(
    params: &SystemParams,
    drive: &DrivePulse,
    horizon: f64,
    n: usize,
) -> (Vec<f64>, Wavepacket) {
    let gt = params.gamma_total();
    let (g1, g2) = (params.emitter.g1, params.g2);
    let amp = -8.0 * params.kappa_c_ex.sqrt() * g1 * g2
        / (gt * (params.kappa_a * params.kappa_c() + 4.0 * g2 * g2));
    let h = horizon / (n - 1) as f64;
    // fine sub-grid for the exponent
    let sub = 8;
    let mut cs = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    let mut area = 0.0;
    for i in 0..n {
        let t = i as f64 * h;
        if i > 0 {
            let hs = h / sub as f64;
            for k in 0..sub {
                let (t0, t1) = (t - h + k as f64 * hs, t - h + (k + 1) as f64 * hs);
                let (o0, o1) = (drive.omega(t0), drive.omega(t1));
                area += 0.5 * hs * (o0 * o0 + o1 * o1);
            }
        }
        let c = (-2.0 * area / gt).exp();
        cs.push(c);
        psi.push(Complex64::new(amp * drive.omega(t) * c, 0.0));
    }
    (cs, Wavepacket::new(0.0, h, psi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageReport {
    /// Final |c_s|².
    pub probability: f64,
    pub budget: LossBudget,
    /// Photon probability in the waveguide at the start.
    pub incident: f64,
    /// Photon probability left in the waveguide at the horizon.
    pub reflected: f64,
}

/// Sends the photon `input` (amplitude per √s at the cavity, normalized to 1)
/// into the bath-resolved system with the emitter in its final state and
/// the cavity empty, and returns how much ends up in |s⟩.
pub fn simulate_storage(
    input: &Wavepacket,
    drive: &DrivePulse,
    params: &SystemParams,
    bath: &BathConfig,
    horizon: f64,
    opts: &IntegrateOptions,
) -> Result<StorageReport, PulseError> {
    let norm = input.norm();
    if (norm - 1.0).abs() > 1e-3 {
        return Err(PulseError::InvalidTarget(format!(
            "input photon must be normalized to 1, got {norm:.6}"
        )));
    }
    let amplitudes = bath.amplitudes_for_input(input.start, input.step, &input.samples);
    let incident = amplitudes.iter().map(|c| c.norm_sqr()).sum();
    let opts = IntegrateOptions {
        initial: Some(AmplitudeState::empty(0.0)),
        require_settled: false,
        ..*opts
    };
    let run = integrate_bath_resolved(params, drive, bath, horizon, &opts, Some(&amplitudes))?;
    let last = run.trajectory.final_state();
    Ok(StorageReport {
        probability: last.c_s.norm_sqr(),
        budget: run.trajectory.budget,
        incident,
        reflected: run.bath_amplitudes.iter().map(|c| c.norm_sqr()).sum(),
    })
}
