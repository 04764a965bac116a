//! Adaptive Dormand–Prince 5(4) integrator for real-valued first-order
//! systems. Complex amplitudes are packed as interleaved (re, im) pairs by
//! the callers.

use thiserror::Error;

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step size; `None` lets the controller decide.
    pub max_step: Option<f64>,
    pub max_steps: usize,
    /// Steps smaller than this fraction of the integration span are fatal.
    pub min_step_fraction: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: None,
            max_steps: 20_000_000,
            min_step_fraction: 1e-15,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("exceeded {0} integration steps")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0:e}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Dormand–Prince coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub struct Dopri5 {
    pub options: StepOptions,
}

impl Dopri5 {
    pub fn new(options: StepOptions) -> Self {
        Dopri5 { options }
    }

    /// Integrates from `t0` to `t_end`, landing exactly on every time in
    /// `checkpoints` (sorted, inside `[t0, t_end]`) and reporting it through
    /// `on_checkpoint`. `on_step` sees every accepted step as
    /// `(t_prev, y_prev, t, y)`.
    pub fn solve<S, C, F>(
        &self,
        sys: &S,
        t0: f64,
        y: &mut [f64],
        t_end: f64,
        checkpoints: &[f64],
        mut on_checkpoint: C,
        mut on_step: F,
    ) -> Result<Stats, OdeError>
    where
        S: OdeSystem,
        C: FnMut(usize, f64, &[f64]),
        F: FnMut(f64, &[f64], f64, &[f64]),
    {
        let n = sys.dim();
        assert_eq!(y.len(), n, "state length does not match system dimension");
        let opts = &self.options;
        let span = t_end - t0;
        let mut stats = Stats::default();

        let mut next_cp = 0;
        while next_cp < checkpoints.len() && checkpoints[next_cp] <= t0 {
            on_checkpoint(next_cp, t0, y);
            next_cp += 1;
        }
        if span <= 0.0 {
            return Ok(stats);
        }

        let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        let mut err = vec![0.0; n];

        let mut t = t0;
        sys.rhs(t, y, &mut k[0]);
        stats.evaluations += 1;
        let mut h = self.initial_step(sys, t, y, &k[0], span, &mut tmp, &mut y_new);
        stats.evaluations += 1;
        let min_step = opts.min_step_fraction * span;
        let mut last_rejected = false;

        while t < t_end {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(OdeError::TooManySteps(opts.max_steps));
            }
            if let Some(hmax) = opts.max_step {
                h = h.min(hmax);
            }
            let h_proposed = h;
            let target = if next_cp < checkpoints.len() {
                checkpoints[next_cp].min(t_end)
            } else {
                t_end
            };
            let mut hit = false;
            if t + h >= target || target - (t + h) < 1e-12 * span {
                h = target - t;
                hit = true;
            }
            if h < min_step && !hit {
                return Err(OdeError::StepUnderflow { t, h });
            }

            let (k1, rest) = k.split_at_mut(1);
            let k1 = &k1[0];
            let [k2, k3, k4, k5, k6, k7] = rest else {
                unreachable!()
            };

            for i in 0..n {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            sys.rhs(t + C2 * h, &tmp, k2);
            for i in 0..n {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            sys.rhs(t + C3 * h, &tmp, k3);
            for i in 0..n {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            sys.rhs(t + C4 * h, &tmp, k4);
            for i in 0..n {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            sys.rhs(t + C5 * h, &tmp, k5);
            for i in 0..n {
                tmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            sys.rhs(t + h, &tmp, k6);
            for i in 0..n {
                y_new[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            sys.rhs(t + h, &y_new, k7);
            stats.evaluations += 6;

            for i in 0..n {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let mut acc = 0.0;
            for i in 0..n {
                let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                let r = err[i] / scale;
                acc += r * r;
            }
            let err_norm = (acc / n as f64).sqrt();
            if !err_norm.is_finite() {
                if h <= min_step {
                    return Err(OdeError::NonFinite(t));
                }
                h *= 0.1;
                stats.rejected += 1;
                last_rejected = true;
                continue;
            }

            if err_norm <= 1.0 {
                let t_new = if hit { target } else { t + h };
                on_step(t, y, t_new, &y_new);
                y.copy_from_slice(&y_new);
                t = t_new;
                k.swap(0, 6);
                stats.accepted += 1;
                if hit && next_cp < checkpoints.len() && target == checkpoints[next_cp].min(t_end) {
                    while next_cp < checkpoints.len() && checkpoints[next_cp] <= t {
                        on_checkpoint(next_cp, t, y);
                        next_cp += 1;
                    }
                }
                let mut factor = 0.9 * err_norm.max(1e-10).powf(-0.2);
                factor = factor.clamp(0.2, 5.0);
                if last_rejected {
                    factor = factor.min(1.0);
                }
                last_rejected = false;
                // A step clipped to a checkpoint says nothing about the
                // natural step size; keep the pre-clip size.
                h = if hit {
                    h_proposed.max(h * factor)
                } else {
                    h * factor
                };
            } else {
                let factor = (0.9 * err_norm.powf(-0.2)).max(0.2);
                h *= factor;
                stats.rejected += 1;
                last_rejected = true;
            }
        }
        // checkpoints equal to t_end that were not reached through `hit`
        while next_cp < checkpoints.len() && checkpoints[next_cp] <= t_end {
            on_checkpoint(next_cp, t, y);
            next_cp += 1;
        }
        Ok(stats)
    }

    fn initial_step<S: OdeSystem>(
        &self,
        sys: &S,
        t: f64,
        y: &[f64],
        f0: &[f64],
        span: f64,
        tmp: &mut [f64],
        f1: &mut [f64],
    ) -> f64 {
        let opts = &self.options;
        let n = y.len();
        let scale = |i: usize| opts.atol + opts.rtol * y[i].abs();
        let d0 = (y
            .iter()
            .enumerate()
            .map(|(i, v)| (v / scale(i)).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        let d1 = (f0
            .iter()
            .enumerate()
            .map(|(i, v)| (v / scale(i)).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6 * span
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(span);
        for i in 0..n {
            tmp[i] = y[i] + h0 * f0[i];
        }
        sys.rhs(t + h0, tmp, f1);
        let d2 = (f1
            .iter()
            .zip(f0)
            .enumerate()
            .map(|(i, (a, b))| ((a - b) / scale(i)).powi(2))
            .sum::<f64>()
            / n as f64)
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6 * span)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay(f64);
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.0 * y[0];
        }
    }

    struct Oscillator(f64);
    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = self.0 * y[1];
            dy[1] = -self.0 * y[0];
        }
    }

    #[test]
    fn exponential_decay_hits_checkpoints() {
        let solver = Dopri5::new(StepOptions::default());
        let mut y = vec![1.0];
        let cps: Vec<f64> = (0..=10).map(|i| i as f64 * 0.5).collect();
        let mut seen = vec![f64::NAN; cps.len()];
        solver
            .solve(
                &Decay(1.3),
                0.0,
                &mut y,
                5.0,
                &cps,
                |i, t, y| {
                    assert_eq!(t, cps[i]);
                    seen[i] = y[0];
                },
                |_, _, _, _| {},
            )
            .unwrap();
        for (i, v) in seen.iter().enumerate() {
            let exact = (-1.3 * cps[i]).exp();
            assert!((v - exact).abs() < 1e-10, "{i}: {v} vs {exact}");
        }
    }

    #[test]
    fn oscillator_long_run_accuracy() {
        let solver = Dopri5::new(StepOptions::default());
        let mut y = vec![1.0, 0.0];
        let t_end = 200.0;
        solver
            .solve(
                &Oscillator(2.0),
                0.0,
                &mut y,
                t_end,
                &[],
                |_, _, _| {},
                |_, _, _, _| {},
            )
            .unwrap();
        assert!((y[0] - (2.0 * t_end).cos()).abs() < 1e-7);
        assert!((y[1] + (2.0 * t_end).sin()).abs() < 1e-7);
    }

    #[test]
    fn underflow_is_reported() {
        struct Blowup;
        impl OdeSystem for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
                dy[0] = y[0] * y[0];
            }
        }
        let solver = Dopri5::new(StepOptions::default());
        let mut y = vec![1.0];
        let r = solver.solve(
            &Blowup,
            0.0,
            &mut y,
            2.0,
            &[],
            |_, _, _| {},
            |_, _, _, _| {},
        );
        assert!(r.is_err(), "{r:?}");
    }
}
