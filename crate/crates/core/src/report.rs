//! Runs a resolved [`Scenario`] and renders the results as text files.
//!
//! Every file starts with a `#` header holding the tool version, the SHA-256
//! of the resolved parameters, the preset hash when there is one, and the full
//! parameter echo. Numbers use the shortest decimal that round-trips.
//! Nothing here touches the file system except reading field files; writing
//! is left to the caller.

use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::adiabatic::{efficiency_closed_form, optimal_phi, sweep_landscape, SweepGrid};
use crate::dynamics::{
    extract_wavepacket, integrate, BathConfig, IntegrateOptions, Trajectory, Wavepacket,
};
use crate::overlap::{
    g2_uniform_pump, normalize_per_photon, parse_field_file, ModeField, PumpField,
};
use crate::pulse::{shape_drive, simulate_storage, ShapeOptions, TargetWavepacket};
use crate::scenario::{PumpSetting, Scenario};
use crate::units::fmt_f64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Phase velocity used for the discretized waveguide. It only sets the
/// length scale of the bath and drops out of every probability.
const BATH_GROUP_VELOCITY: f64 = 1e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RunError {
    /// Bad input that is not a numerical failure, e.g. an unreadable field
    /// file or mismatched grids.
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

fn numerical(e: impl std::fmt::Display) -> RunError {
    RunError::Numerical(e.to_string())
}

/// Files produced by one run, in the order they should be written, plus a
/// short human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub summary: String,
}

pub fn header(s: &Scenario) -> String {
    let mut h = format!(
        "# photonshift {VERSION}\n# params_sha256 {}\n",
        s.params_hash()
    );
    match &s.origin {
        Some((name, hash)) => {
            let _ = writeln!(h, "# preset {name} {hash}");
        }
        None => h.push_str("# preset none\n"),
    }
    h.push_str("# --- resolved parameters ---\n");
    for line in s.echo().lines() {
        h.push_str("# ");
        h.push_str(line);
        h.push('\n');
    }
    h.push_str("# ---\n");
    h
}

fn row(out: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        out.push_str(&fmt_f64(*v));
    }
    out.push('\n');
}

pub fn trajectory_csv(s: &Scenario, traj: &Trajectory) -> String {
    let mut out = header(s);
    out.push_str("t,re_cs,im_cs,re_ce,im_ce,re_ca,im_ca,re_cc,im_cc\n");
    for st in &traj.states {
        row(
            &mut out,
            &[
                st.t, st.c_s.re, st.c_s.im, st.c_e.re, st.c_e.im, st.c_a.re, st.c_a.im, st.c_c.re,
                st.c_c.im,
            ],
        );
    }
    out
}

pub fn wavepacket_csv(s: &Scenario, psi: &Wavepacket) -> String {
    let mut out = header(s);
    out.push_str("u,re_psi,im_psi,abs2_psi\n");
    for (u, c) in psi.times().zip(&psi.samples) {
        row(&mut out, &[u, c.re, c.im, c.norm_sqr()]);
    }
    out
}

pub fn drive_csv(s: &Scenario, times: &[f64], omega: &[f64]) -> String {
    let mut out = header(s);
    out.push_str("t,omega_rad_per_s\n");
    for (t, w) in times.iter().zip(omega) {
        row(&mut out, &[*t, *w]);
    }
    out
}

pub fn sweep_csv(s: &Scenario, grid: &SweepGrid) -> String {
    let mut out = header(s);
    let _ = writeln!(
        out,
        "# axes P_b_mW[{}] delta[{}]",
        grid.powers_mw.len(),
        grid.deltas.len()
    );
    out.push_str("P_b_mW,delta,phi,F\n");
    for (i, delta) in grid.deltas.iter().enumerate() {
        for (j, p) in grid.powers_mw.iter().enumerate() {
            row(
                &mut out,
                &[*p, *delta, grid.phi[i][j], grid.efficiency[i][j]],
            );
        }
    }
    out
}

pub fn ridge_csv(s: &Scenario, grid: &SweepGrid) -> String {
    let mut out = header(s);
    out.push_str("delta,P_b_star_mW,F_max\n");
    for r in &grid.ridge {
        row(&mut out, &[r.delta, r.power_mw, r.efficiency]);
    }
    out
}

fn summary(s: &Scenario, entries: &[(&str, String)]) -> String {
    let mut out = header(s);
    let width = entries.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in entries {
        let _ = writeln!(out, "{k:width$} = {v}");
    }
    out
}

fn operating_point_entries(s: &Scenario) -> Vec<(&'static str, String)> {
    let p = &s.params;
    vec![
        ("kappa_convention", s.kappa_convention.to_string()),
        ("pump_model", s.pump_model.calibration.to_string()),
        (
            "phi_per_mW_at_reference_delta",
            fmt_f64(s.pump_model.phi_per_mw),
        ),
        ("reference_delta", fmt_f64(s.pump_model.reference_delta)),
        (
            "pump_power_mW",
            s.pump_power_mw()
                .map(fmt_f64)
                .unwrap_or_else(|| "n/a".into()),
        ),
        ("delta", fmt_f64(p.delta())),
        ("phi", fmt_f64(p.phi())),
        ("C_in", fmt_f64(p.c_in())),
        ("g1_rad_per_s", fmt_f64(p.emitter.g1)),
        ("g2_rad_per_s", fmt_f64(p.g2)),
        ("gamma_rad_per_s", fmt_f64(p.emitter.gamma)),
        ("kappa_a_rad_per_s", fmt_f64(p.kappa_a)),
        ("kappa_c_in_rad_per_s", fmt_f64(p.kappa_c_in)),
        ("kappa_c_ex_rad_per_s", fmt_f64(p.kappa_c_ex)),
        ("kappa_c_rad_per_s", fmt_f64(p.kappa_c())),
        ("gamma_total_rad_per_s", fmt_f64(p.gamma_total())),
    ]
}

fn closed_form(s: &Scenario) -> f64 {
    let p = &s.params;
    efficiency_closed_form(p.c_in(), p.phi(), p.kappa_ratio())
}

fn options(s: &Scenario, samples: usize, require_settled: bool) -> IntegrateOptions {
    IntegrateOptions {
        tol: s.tolerance,
        samples,
        initial: None,
        require_settled,
    }
}

const SIMULATE_GP: &str = "\
set datafile separator ','
set datafile commentschars '#'
set key autotitle columnhead
set multiplot layout 2,1
set xlabel 't (s)'
set ylabel 'population'
plot 'trajectory.csv' using 1:($2**2+$3**2) with lines title '|c_s|^2', \\
     '' using 1:($4**2+$5**2) with lines title '|c_e|^2', \\
     '' using 1:($6**2+$7**2) with lines title '|c_a|^2', \\
     '' using 1:($8**2+$9**2) with lines title '|c_c|^2'
set xlabel 'u (s)'
set ylabel '|psi|^2 (1/s)'
plot 'wavepacket.csv' using 1:4 with lines title 'output photon'
unset multiplot
";

const SWEEP_GP: &str = "\
set datafile separator ','
set datafile commentschars '#'
set logscale x
set xlabel 'P_b (mW)'
set ylabel 'F'
set yrange [0:1]
plot for [i=0:ROWS_DELTA-1] 'sweep.csv' every ::i*ROWS::(i+1)*ROWS-1 using 1:4 with lines notitle, \\
     'ridge.csv' using 2:3 with points pt 7 title 'ridge'
";

/// Exact amplitude dynamics under the configured drive.
pub fn run_simulate(s: &Scenario) -> Result<RunOutput, RunError> {
    let drive = s.drive.build().map_err(numerical)?;
    let traj =
        integrate(&s.params, &drive, s.horizon, &options(s, s.samples, true)).map_err(numerical)?;
    let psi = extract_wavepacket(&traj, &s.params).map_err(numerical)?;
    let b = traj.budget;
    let times: Vec<f64> = traj.states.iter().map(|st| st.t).collect();
    let omega: Vec<f64> = times.iter().map(|&t| drive.omega(t)).collect();
    let mut entries = operating_point_entries(s);
    entries.extend([
        ("F", fmt_f64(b.efficiency())),
        ("F_closed_form", fmt_f64(closed_form(s))),
        ("internal_conversion", fmt_f64(b.internal_conversion())),
        ("extracted", fmt_f64(b.extracted)),
        ("emitted_free_space", fmt_f64(b.emitted_free_space)),
        ("lost_mode_a", fmt_f64(b.lost_mode_a)),
        ("lost_mode_c_inherent", fmt_f64(b.lost_mode_c_inherent)),
        ("residual_norm", fmt_f64(b.residual_norm)),
        ("total", fmt_f64(b.total())),
        ("wavepacket_norm", fmt_f64(psi.norm())),
        (
            "max_norm_increase_per_step",
            fmt_f64(traj.max_norm_increase),
        ),
        ("steps", traj.steps.to_string()),
    ]);
    let text = format!(
        "F = {:.4} (closed form {:.4}), internal conversion {:.4}, loss total {:.3e}",
        b.efficiency(),
        closed_form(s),
        b.internal_conversion(),
        (b.total() - 1.0).abs()
    );
    Ok(RunOutput {
        files: vec![
            ("trajectory.csv".into(), trajectory_csv(s, &traj)),
            ("wavepacket.csv".into(), wavepacket_csv(s, &psi)),
            ("drive.csv".into(), drive_csv(s, &times, &omega)),
            ("budget.txt".into(), summary(s, &entries)),
            ("simulate.gp".into(), SIMULATE_GP.into()),
            ("scenario.toml".into(), s.echo()),
        ],
        summary: text,
    })
}

/// F(P_b, δ) landscape and the ridge of optimal pump power.
pub fn run_sweep(s: &Scenario) -> Result<RunOutput, RunError> {
    let c_in = s
        .system
        .params(s.kappa_convention, 0.0, 0.0)
        .map_err(RunError::Input)?
        .c_in();
    let grid = sweep_landscape(&s.pump_model, c_in, &s.sweep.powers_mw, &s.sweep.deltas);
    let mut text = format!("phi_opt = {:.4}; ridge:", optimal_phi(c_in));
    for r in &grid.ridge {
        let _ = write!(
            text,
            " δ={} P*={:.4} mW F={:.4};",
            fmt_f64(r.delta),
            r.power_mw,
            r.efficiency
        );
    }
    let gp = format!(
        "ROWS = {}\nROWS_DELTA = {}\n{SWEEP_GP}",
        grid.powers_mw.len(),
        grid.deltas.len()
    );
    Ok(RunOutput {
        files: vec![
            ("sweep.csv".into(), sweep_csv(s, &grid)),
            ("ridge.csv".into(), ridge_csv(s, &grid)),
            ("sweep.gp".into(), gp),
            ("scenario.toml".into(), s.echo()),
        ],
        summary: text,
    })
}

fn target(s: &Scenario) -> Result<TargetWavepacket, RunError> {
    let sh = &s.shaping;
    TargetWavepacket::gaussian(sh.norm, sh.center, sh.width, sh.end, sh.samples).map_err(numerical)
}

/// Drive that emits the configured Gaussian target, checked by forward
/// simulation.
pub fn run_shape_pulse(s: &Scenario) -> Result<RunOutput, RunError> {
    let target = target(s)?;
    let opts = ShapeOptions {
        method: s.shaping.method,
        ..Default::default()
    };
    let shaped = shape_drive(&target, &s.params, &opts).map_err(numerical)?;
    let horizon = s.shaping.end;
    let traj = integrate(
        &s.params,
        &shaped.drive,
        horizon,
        &options(s, s.shaping.samples, false),
    )
    .map_err(numerical)?;
    let psi = extract_wavepacket(&traj, &s.params).map_err(numerical)?;
    let err = psi.relative_l2_error_up_to_phase(&target.packet);
    let mut entries = operating_point_entries(s);
    entries.extend([
        ("method", format!("{:?}", s.shaping.method).to_lowercase()),
        ("target_norm", fmt_f64(target.norm())),
        (
            "target_rms_bandwidth_rad_per_s",
            fmt_f64(target.bandwidth()),
        ),
        ("F_max", fmt_f64(closed_form(s))),
        ("captured_norm", fmt_f64(shaped.captured_norm)),
        (
            "truncated_at_s",
            shaped
                .truncated_at
                .map(fmt_f64)
                .unwrap_or_else(|| "none".into()),
        ),
        ("emitted_norm", fmt_f64(psi.norm())),
        ("extracted", fmt_f64(traj.budget.extracted)),
        ("relative_l2_error", fmt_f64(err)),
    ]);
    Ok(RunOutput {
        files: vec![
            ("target.csv".into(), wavepacket_csv(s, &target.packet)),
            (
                "drive.csv".into(),
                drive_csv(s, shaped.drive.times(), shaped.drive.values()),
            ),
            ("wavepacket.csv".into(), wavepacket_csv(s, &psi)),
            ("shaping.txt".into(), summary(s, &entries)),
            ("scenario.toml".into(), s.echo()),
        ],
        summary: format!(
            "emitted norm {:.4} of target {:.4}, relative L2 error {:.3e}",
            psi.norm(),
            target.norm(),
            err
        ),
    })
}

/// Generates the shaped photon, then absorbs its normalized time reverse
/// with the time-reversed drive through a discretized waveguide.
pub fn run_store(s: &Scenario) -> Result<RunOutput, RunError> {
    let target = target(s)?;
    let shaped = shape_drive(
        &target,
        &s.params,
        &ShapeOptions {
            method: s.shaping.method,
            ..Default::default()
        },
    )
    .map_err(numerical)?;
    let horizon = s.shaping.end;
    let traj = integrate(
        &s.params,
        &shaped.drive,
        horizon,
        &options(s, s.shaping.samples, false),
    )
    .map_err(numerical)?;
    let psi = extract_wavepacket(&traj, &s.params).map_err(numerical)?;
    let generated = traj.budget.extracted;
    if !(generated > 0.0) {
        return Err(RunError::Numerical("generated photon has zero norm".into()));
    }
    let input = psi
        .time_reversed()
        .scaled(Complex64::new(1.0 / psi.norm().sqrt(), 0.0));
    let drive = shaped.drive.time_reversed(horizon);
    let bath = BathConfig::for_kappa_ex(
        s.storage.bath_modes,
        s.storage.bath_bandwidth,
        BATH_GROUP_VELOCITY,
        s.params.kappa_c_ex,
    )
    .map_err(numerical)?;
    let stored = simulate_storage(
        &input,
        &drive,
        &s.params,
        &bath,
        horizon,
        &options(s, s.storage.samples, false),
    )
    .map_err(numerical)?;
    let b = stored.budget;
    let mut entries = operating_point_entries(s);
    entries.extend([
        ("bath_modes", s.storage.bath_modes.to_string()),
        (
            "bath_bandwidth_rad_per_s",
            fmt_f64(s.storage.bath_bandwidth),
        ),
        ("bath_recurrence_time_s", fmt_f64(bath.recurrence_time())),
        ("generation_probability", fmt_f64(generated)),
        ("storage_probability", fmt_f64(stored.probability)),
        ("incident", fmt_f64(stored.incident)),
        ("reflected", fmt_f64(stored.reflected)),
        ("emitted_free_space", fmt_f64(b.emitted_free_space)),
        ("lost_mode_a", fmt_f64(b.lost_mode_a)),
        ("lost_mode_c_inherent", fmt_f64(b.lost_mode_c_inherent)),
        ("residual_norm", fmt_f64(b.residual_norm)),
    ]);
    Ok(RunOutput {
        files: vec![
            ("input.csv".into(), wavepacket_csv(s, &input)),
            (
                "drive.csv".into(),
                drive_csv(s, drive.times(), drive.values()),
            ),
            ("storage.txt".into(), summary(s, &entries)),
            ("scenario.toml".into(), s.echo()),
        ],
        summary: format!(
            "stored {:.4} (generation F = {:.4})",
            stored.probability, generated
        ),
    })
}

fn load_field(path: &std::path::Path) -> Result<ModeField, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Input(format!("{}: {e}", path.display())))?;
    parse_field_file(&text).map_err(|e| RunError::Input(format!("{}: {e}", path.display())))
}

fn per_photon(field: ModeField, name: &str) -> Result<(ModeField, String), RunError> {
    if field.per_photon {
        Ok((field, "already per-photon, normalization skipped".into()))
    } else {
        let (f, scale) = normalize_per_photon(&field)
            .map_err(|e| RunError::Input(format!("field {name}: {e}")))?;
        Ok((
            f,
            format!("normalized to one photon, scale {}", fmt_f64(scale)),
        ))
    }
}

/// g₂ from two imported mode fields under a uniform x-polarized pump.
pub fn run_overlap(s: &Scenario) -> Result<RunOutput, RunError> {
    let spec = s
        .overlap
        .as_ref()
        .ok_or_else(|| RunError::Input("scenario has no [overlap] section".into()))?;
    let (a, note_a) = per_photon(load_field(&spec.field_a)?, "a")?;
    let (c, note_c) = per_photon(load_field(&spec.field_c)?, "c")?;
    let wavelength = s.params.mode_a.wavelength * s.params.mode_c.wavelength
        / (s.params.mode_c.wavelength - s.params.mode_a.wavelength);
    let pump = match spec.pump {
        PumpSetting::Power(p) => PumpField::from_power(p, s.system.focal_radius, wavelength),
        PumpSetting::Field(e) => PumpField::from_amplitude(e, s.system.focal_radius, wavelength),
    }
    .map_err(|e| RunError::Input(e.to_string()))?;
    let r = g2_uniform_pump(&a, &c, &pump, &s.system.material)
        .map_err(|e| RunError::Input(e.to_string()))?;
    let p = &s.params;
    let g2 = r.g2.norm();
    let phi = 4.0 * g2 * g2 / (p.kappa_a * p.kappa_c());
    let entries = vec![
        ("field_a", note_a),
        ("field_c", note_c),
        ("material", s.system.material.name.clone()),
        ("overlap_coefficient", fmt_f64(r.overlap_coefficient)),
        ("g2_rad_per_s", fmt_f64(g2)),
        ("re_g2_rad_per_s", fmt_f64(r.g2.re)),
        ("im_g2_rad_per_s", fmt_f64(r.g2.im)),
        (
            "g2_per_field_rad_per_s_per_V_per_m",
            fmt_f64(r.g2_per_field.norm()),
        ),
        ("pump_E_V_per_m", fmt_f64(pump.amplitude)),
        ("pump_power_W", fmt_f64(pump.power)),
        ("focal_radius_m", fmt_f64(pump.focal_radius)),
        ("delta", fmt_f64(p.delta())),
        ("kappa_a_rad_per_s", fmt_f64(p.kappa_a)),
        ("kappa_c_rad_per_s", fmt_f64(p.kappa_c())),
        ("phi", fmt_f64(phi)),
        (
            "F_closed_form",
            fmt_f64(efficiency_closed_form(p.c_in(), phi, p.kappa_ratio())),
        ),
    ];
    Ok(RunOutput {
        files: vec![
            ("overlap.txt".into(), summary(s, &entries)),
            ("scenario.toml".into(), s.echo()),
        ],
        summary: format!(
            "|g2| = {g2:.4e} rad/s, overlap coefficient {:.4}, phi = {phi:.4}",
            r.overlap_coefficient
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn scenario(text: &str) -> Scenario {
        Scenario::from_toml(text, Path::new(".")).unwrap()
    }

    #[test]
    fn sweep_files_carry_provenance() {
        let s = scenario("preset = \"gaas\"\n[sweep]\npowers = 5");
        let out = run_sweep(&s).unwrap();
        let (name, csv) = &out.files[0];
        assert_eq!(name, "sweep.csv");
        assert!(csv.starts_with(&format!(
            "# photonshift {VERSION}\n# params_sha256 {}\n# preset gaas ",
            s.params_hash()
        )));
        let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "P_b_mW,delta,phi,F");
        assert_eq!(data.len(), 1 + 5 * 3);
        let ridge = &out.files[1].1;
        let rows: Vec<&str> = ridge.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "delta,P_b_star_mW,F_max");
        let cols: Vec<f64> = rows[2].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols[0], 10.0);
        assert!((cols[2] - 0.9).abs() < 0.001, "{}", cols[2]);
    }

    #[test]
    fn header_echo_resolves_to_same_scenario() {
        let s = scenario("preset = \"gap\"\n[sweep]\npowers = 3");
        let h = header(&s);
        let echo: String = h
            .lines()
            .skip_while(|l| !l.contains("resolved parameters"))
            .skip(1)
            .take_while(|l| *l != "# ---")
            .map(|l| format!("{}\n", l.strip_prefix("# ").unwrap_or("")))
            .collect();
        let again = scenario(&echo);
        assert_eq!(again.params_hash(), s.params_hash());
        assert_eq!(run_sweep(&again).unwrap(), run_sweep(&s).unwrap());
    }

    #[test]
    fn overlap_requires_section() {
        let s = scenario("preset = \"gaas\"");
        assert!(matches!(run_overlap(&s), Err(RunError::Input(_))));
    }
}
