//! Sampled control pulses Ω(t) with monotone cubic (Fritsch–Carlson)
//! interpolation, and the analytic pulse shapes used by the presets.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriveError {
    #[error("drive needs at least two samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample times must be finite and strictly increasing (index {0})")]
    NonMonotoneTimes(usize),
    #[error("Rabi frequency must be finite and >= 0 (index {0})")]
    InvalidOmega(usize),
    #[error("pump envelope must be finite and >= 0 with one value per sample (index {0})")]
    InvalidEnvelope(usize),
    #[error("invalid pulse parameter `{0}`")]
    InvalidShape(&'static str),
}

/// Piecewise-cubic Hermite interpolant whose slopes are limited so that the
/// curve does not overshoot monotone data.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        let n = times.len();
        debug_assert_eq!(n, values.len());
        let mut slopes = vec![0.0; n];
        if n >= 2 {
            let secants: Vec<f64> = (0..n - 1)
                .map(|i| (values[i + 1] - values[i]) / (times[i + 1] - times[i]))
                .collect();
            slopes[0] = secants[0];
            slopes[n - 1] = secants[n - 2];
            for i in 1..n - 1 {
                let (d0, d1) = (secants[i - 1], secants[i]);
                slopes[i] = if d0 * d1 <= 0.0 {
                    0.0
                } else {
                    // weighted harmonic mean (Fritsch–Butland)
                    let h0 = times[i] - times[i - 1];
                    let h1 = times[i + 1] - times[i];
                    let w1 = 2.0 * h1 + h0;
                    let w2 = h1 + 2.0 * h0;
                    (w1 + w2) / (w1 / d0 + w2 / d1)
                };
            }
            for (i, d) in secants.iter().enumerate() {
                if *d == 0.0 {
                    slopes[i] = 0.0;
                    slopes[i + 1] = 0.0;
                }
            }
        }
        MonotoneCubic {
            times,
            values,
            slopes,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `t`; zero outside the sampled support.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] || t.is_nan() {
            return 0.0;
        }
        let i = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.values[i],
            Err(i) => i - 1,
        };
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }
}

/// A real, non-negative control Rabi frequency Ω(t) in rad/s, optionally
/// accompanied by a pump envelope that scales g₂(t) = g₂·envelope(t).
#[derive(Debug, Clone, PartialEq)]
pub struct DrivePulse {
    omega: MonotoneCubic,
    pump_envelope: Option<MonotoneCubic>,
}

impl DrivePulse {
    pub fn from_samples(times: Vec<f64>, omega: Vec<f64>) -> Result<Self, DriveError> {
        validate(&times, &omega)?;
        Ok(DrivePulse {
            omega: MonotoneCubic::new(times, omega),
            pump_envelope: None,
        })
    }

    /// Ω ≡ 0 over `[0, end]`.
    pub fn zero(end: f64) -> Self {
        DrivePulse::from_samples(vec![0.0, end.max(f64::MIN_POSITIVE)], vec![0.0, 0.0])
            .expect("valid zero drive")
    }

    pub fn with_pump_envelope(mut self, envelope: Vec<f64>) -> Result<Self, DriveError> {
        let times = self.omega.times().to_vec();
        if envelope.len() != times.len() {
            return Err(DriveError::InvalidEnvelope(envelope.len().min(times.len())));
        }
        if let Some(i) = envelope.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(DriveError::InvalidEnvelope(i));
        }
        self.pump_envelope = Some(MonotoneCubic::new(times, envelope));
        Ok(self)
    }

    /// Samples `f` on `n` uniform points over `[start, end]`.
    pub fn sample_fn(
        start: f64,
        end: f64,
        n: usize,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, DriveError> {
        if n < 2 {
            return Err(DriveError::TooFewSamples(n));
        }
        let times: Vec<f64> = (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect();
        let omega = times.iter().map(|&t| f(t)).collect();
        Self::from_samples(times, omega)
    }

    /// Ω(t) = peak·exp(−(t−center)²/(2 width²)) sampled over `[0, end]`.
    pub fn gaussian(
        peak: f64,
        center: f64,
        width: f64,
        end: f64,
        n: usize,
    ) -> Result<Self, DriveError> {
        if !(peak >= 0.0 && peak.is_finite()) {
            return Err(DriveError::InvalidShape("peak"));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(DriveError::InvalidShape("width"));
        }
        Self::sample_fn(0.0, end, n, |t| {
            let x = (t - center) / width;
            peak * (-0.5 * x * x).exp()
        })
    }

    /// Flat-top pulse between `on` and `off` with tanh edges of duration `rise`.
    pub fn smoothed_square(
        peak: f64,
        on: f64,
        off: f64,
        rise: f64,
        end: f64,
        n: usize,
    ) -> Result<Self, DriveError> {
        if !(peak >= 0.0 && peak.is_finite()) {
            return Err(DriveError::InvalidShape("peak"));
        }
        if !(rise > 0.0 && off > on) {
            return Err(DriveError::InvalidShape("rise"));
        }
        Self::sample_fn(0.0, end, n, |t| {
            0.5 * peak * (((t - on) / rise).tanh() - ((t - off) / rise).tanh())
        })
    }

    pub fn omega(&self, t: f64) -> f64 {
        self.omega.eval(t)
    }

    /// Pump envelope at `t` (1 when none was given).
    pub fn pump_scale(&self, t: f64) -> f64 {
        match &self.pump_envelope {
            Some(env) => env.eval(t),
            None => 1.0,
        }
    }

    pub fn has_pump_envelope(&self) -> bool {
        self.pump_envelope.is_some()
    }

    pub fn times(&self) -> &[f64] {
        self.omega.times()
    }

    pub fn values(&self) -> &[f64] {
        self.omega.values()
    }

    pub fn start(&self) -> f64 {
        self.times()[0]
    }

    pub fn end(&self) -> f64 {
        *self.times().last().unwrap()
    }

    pub fn peak(&self) -> f64 {
        self.values().iter().copied().fold(0.0, f64::max)
    }

    pub fn max_sample_spacing(&self) -> f64 {
        self.times()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Ω(T − t) on the mirrored sample grid.
    pub fn time_reversed(&self, total: f64) -> Self {
        let times: Vec<f64> = self.times().iter().rev().map(|t| total - t).collect();
        let values: Vec<f64> = self.values().iter().rev().copied().collect();
        let env = self
            .pump_envelope
            .as_ref()
            .map(|e| MonotoneCubic::new(times.clone(), e.values().iter().rev().copied().collect()));
        DrivePulse {
            omega: MonotoneCubic::new(times, values),
            pump_envelope: env,
        }
    }

    /// ∫Ω² dt by Simpson-weighted sampling of the interpolant.
    pub fn omega_squared_area(&self) -> f64 {
        let (a, b) = (self.start(), self.end());
        let n = 8 * self.times().len().max(8);
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let o = self.omega(a + h * i as f64);
            acc += w * o * o;
        }
        acc * h / 3.0
    }
}

fn validate(times: &[f64], omega: &[f64]) -> Result<(), DriveError> {
    if times.len() < 2 || times.len() != omega.len() {
        return Err(DriveError::TooFewSamples(times.len().min(omega.len())));
    }
    for i in 0..times.len() {
        if !times[i].is_finite() || (i > 0 && times[i] <= times[i - 1]) {
            return Err(DriveError::NonMonotoneTimes(i));
        }
        if !omega[i].is_finite() || omega[i] < 0.0 {
            return Err(DriveError::InvalidOmega(i));
        }
    }
    Ok(())
}
