use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use photonshift::model::KappaConvention;
use photonshift::overlap::{
    g2_uniform_pump, gaussian_mode, normalize_per_photon, write_field_file, Chi2Material, Grid,
    PumpField,
};
use photonshift::presets;
use tempfile::TempDir;

fn photonshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photonshift"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary_value(text: &str, key: &str) -> f64 {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .find_map(|l| {
            let (k, v) = l.split_once('=')?;
            (k.trim() == key).then(|| v.trim().parse().expect("number"))
        })
        .unwrap_or_else(|| panic!("no `{key}` in summary"))
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn out_arg(dir: &TempDir, sub: &str) -> String {
    dir.path().join(sub).display().to_string()
}

#[test]
fn gaas_simulation_reaches_calibrated_efficiency() {
    let dir = TempDir::new().unwrap();
    let out = out_arg(&dir, "run");
    let o = photonshift(&["--preset", "gaas", "simulate", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let budget = fs::read_to_string(Path::new(&out).join("budget.txt")).unwrap();
    let f = summary_value(&budget, "F");
    assert!((0.68..=0.72).contains(&f), "F = {f}");
    let total = summary_value(&budget, "total");
    assert!((total - 1.0).abs() < 1e-8);
    for name in [
        "trajectory.csv",
        "wavepacket.csv",
        "drive.csv",
        "simulate.gp",
        "scenario.toml",
    ] {
        assert!(Path::new(&out).join(name).is_file(), "{name}");
    }
    let traj = fs::read_to_string(Path::new(&out).join("trajectory.csv")).unwrap();
    assert!(traj
        .lines()
        .any(|l| l == "t,re_cs,im_cs,re_ce,im_ce,re_ca,im_ca,re_cc,im_cc"));
}

#[test]
fn rerun_from_echo_is_bit_identical() {
    let dir = TempDir::new().unwrap();
    let first = out_arg(&dir, "first");
    let second = out_arg(&dir, "second");
    assert!(
        photonshift(&["--preset", "gap", "simulate", "--out", &first])
            .status
            .success()
    );
    let echo = Path::new(&first)
        .join("scenario.toml")
        .display()
        .to_string();
    let o = photonshift(&["--config", &echo, "simulate", "--out", &second]);
    assert!(o.status.success(), "{}", stderr(&o));
    for entry in fs::read_dir(&first).unwrap() {
        let path = entry.unwrap().path();
        let other = Path::new(&second).join(path.file_name().unwrap());
        assert_eq!(
            fs::read(&path).unwrap(),
            fs::read(&other).unwrap(),
            "{}",
            path.display()
        );
    }
}

#[test]
fn energy_convention_doubles_every_kappa() {
    let dir = TempDir::new().unwrap();
    let mut values = Vec::new();
    for conv in ["paper", "energy"] {
        let out = out_arg(&dir, conv);
        let cfg = dir.path().join(format!("{conv}.toml"));
        // fixed φ keeps the run fast and the rates comparable
        fs::write(
            &cfg,
            "preset = \"gaas\"\n[operating_point]\ndelta = 10\nphi = 100\n",
        )
        .unwrap();
        let o = photonshift(&[
            "--config",
            cfg.to_str().unwrap(),
            "--kappa-convention",
            conv,
            "simulate",
            "--out",
            &out,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        values.push(fs::read_to_string(Path::new(&out).join("budget.txt")).unwrap());
    }
    for key in [
        "kappa_a_rad_per_s",
        "kappa_c_in_rad_per_s",
        "kappa_c_ex_rad_per_s",
        "kappa_c_rad_per_s",
    ] {
        assert_eq!(
            summary_value(&values[1], key),
            2.0 * summary_value(&values[0], key),
            "{key}"
        );
    }
    assert_eq!(
        summary_value(&values[0], "g1_rad_per_s"),
        summary_value(&values[1], "g1_rad_per_s")
    );
}

#[test]
fn malformed_unit_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "preset = \"gaas\"\n[operating_point]\ndelta = 10\npump_power = \"3 mV\"\n",
    )
    .unwrap();
    let o = photonshift(&[
        "--config",
        cfg.to_str().unwrap(),
        "simulate",
        "--out",
        &out_arg(&dir, "x"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("operating_point.pump_power") && err.contains("mV"),
        "{err}"
    );
    assert!(!dir.path().join("x").exists());

    fs::write(
        &cfg,
        "preset = \"gaas\"\n[operating_point]\ndelta = \"ten\"\n",
    )
    .unwrap();
    let o = photonshift(&["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = photonshift(&["simulate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unachievable_target_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("s.toml");
    fs::write(&cfg, "preset = \"gaas\"\n[shaping]\nnorm = 0.95\n").unwrap();
    let o = photonshift(&[
        "--config",
        cfg.to_str().unwrap(),
        "shape-pulse",
        "--out",
        &out_arg(&dir, "x"),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn sweep_rows_ridge_and_determinism() {
    let dir = TempDir::new().unwrap();
    let mut csv = Vec::new();
    for workers in ["1", "8"] {
        let out = out_arg(&dir, workers);
        let o = photonshift(&[
            "--preset",
            "gaas",
            "--workers",
            workers,
            "sweep",
            "--out",
            &out,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        csv.push((
            fs::read(Path::new(&out).join("sweep.csv")).unwrap(),
            fs::read(Path::new(&out).join("ridge.csv")).unwrap(),
        ));
    }
    assert_eq!(csv[0], csv[1]);

    let sweep = String::from_utf8(csv[0].0.clone()).unwrap();
    assert!(sweep.contains("# axes P_b_mW[100] delta[3]"));
    let rows = data_rows(&sweep);
    let deltas: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    for d in [3.0, 10.0, 30.0] {
        assert_eq!(deltas.iter().filter(|&&x| x == d).count(), 100);
    }
    let ridge = data_rows(&String::from_utf8(csv[0].1.clone()).unwrap());
    assert_eq!(ridge[1][0], 10.0);
    assert!((ridge[1][2] - 0.9).abs() < 1e-3);
}

#[test]
fn large_sweep_is_fast() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("grid.toml");
    fs::write(
        &cfg,
        "preset = \"gaas\"\n[sweep]\npower_min = \"1 uW\"\npower_max = \"1 W\"\npowers = 100\ndelta_min = 0.1\ndelta_max = 100\ndelta_count = 50\ndelta_log = true\n",
    )
    .unwrap();
    let start = Instant::now();
    let o = photonshift(&[
        "--config",
        cfg.to_str().unwrap(),
        "sweep",
        "--out",
        &out_arg(&dir, "g"),
    ]);
    let elapsed = start.elapsed();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(elapsed.as_secs_f64() < 1.0, "{elapsed:?}");
    let rows = data_rows(&fs::read_to_string(dir.path().join("g/sweep.csv")).unwrap());
    assert_eq!(rows.len(), 100 * 50);
}

fn write_gaussian_fields(dir: &Path, shape_c: usize, per_photon: bool) {
    let grid = Grid::centered_cube(12, 1.2e-6).unwrap();
    let a = gaussian_mode(grid, 1.98e15, [0.0; 3], [0.2e-6, 0.25e-6, 0.15e-6], 1, 12.0).unwrap();
    let grid_c = Grid::centered_cube(shape_c, 1.2e-6).unwrap();
    let c = gaussian_mode(grid_c, 1.32e15, [0.0; 3], [0.3e-6, 0.2e-6, 0.2e-6], 2, 12.0).unwrap();
    let a = if per_photon {
        normalize_per_photon(&a).unwrap().0
    } else {
        a
    };
    fs::write(dir.join("a.pcf"), write_field_file(&a)).unwrap();
    fs::write(dir.join("c.pcf"), write_field_file(&c)).unwrap();
    fs::write(
        dir.join("overlap.toml"),
        "preset = \"gaas\"\n[overlap]\nfield_a = \"a.pcf\"\nfield_c = \"c.pcf\"\npump_power = \"3 mW\"\n",
    )
    .unwrap();
}

#[test]
fn overlap_matches_library() {
    let dir = TempDir::new().unwrap();
    write_gaussian_fields(dir.path(), 12, false);
    let cfg = dir.path().join("overlap.toml");
    let out = out_arg(&dir, "ov");
    let o = photonshift(&["--config", cfg.to_str().unwrap(), "overlap", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(Path::new(&out).join("overlap.txt")).unwrap();

    let read = |n: &str| {
        photonshift::overlap::parse_field_file(&fs::read_to_string(dir.path().join(n)).unwrap())
            .unwrap()
    };
    let a = normalize_per_photon(&read("a.pcf")).unwrap().0;
    let c = normalize_per_photon(&read("c.pcf")).unwrap().0;
    let preset = presets::gaas();
    let pump = PumpField::from_power(3e-3, preset.focal_radius, preset.pump_wavelength()).unwrap();
    let oracle = g2_uniform_pump(&a, &c, &pump, &Chi2Material::gaas()).unwrap();
    let g2 = summary_value(&report, "g2_rad_per_s");
    assert!(oracle.g2.norm() > 0.0);
    assert!(
        (g2 - oracle.g2.norm()).abs() <= 1e-10 * oracle.g2.norm(),
        "{g2} vs {}",
        oracle.g2.norm()
    );
    assert!(
        (summary_value(&report, "overlap_coefficient") - oracle.overlap_coefficient).abs() < 1e-10
    );
    let sys = preset.system(KappaConvention::Paper, 10.0).unwrap();
    let phi = 4.0 * g2 * g2 / (sys.kappa_a * sys.kappa_c());
    assert!((summary_value(&report, "phi") - phi).abs() <= 1e-10 * phi);
    assert!(report.contains("field_c") && report.contains("normalized to one photon"));
}

#[test]
fn overlap_notes_per_photon_input() {
    let dir = TempDir::new().unwrap();
    write_gaussian_fields(dir.path(), 12, true);
    let cfg = dir.path().join("overlap.toml");
    let out = out_arg(&dir, "ov");
    let o = photonshift(&["--config", cfg.to_str().unwrap(), "overlap", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(Path::new(&out).join("overlap.txt")).unwrap();
    let line = report.lines().find(|l| l.starts_with("field_a")).unwrap();
    assert!(
        line.contains("already per-photon, normalization skipped"),
        "{line}"
    );
}

#[test]
fn overlap_grid_mismatch_reports_shapes() {
    let dir = TempDir::new().unwrap();
    write_gaussian_fields(dir.path(), 10, false);
    let cfg = dir.path().join("overlap.toml");
    let o = photonshift(&[
        "--config",
        cfg.to_str().unwrap(),
        "overlap",
        "--out",
        &out_arg(&dir, "ov"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(
        err.contains("[12, 12, 12]") && err.contains("[10, 10, 10]"),
        "{err}"
    );
}

#[test]
fn presets_list_and_show() {
    let o = photonshift(&["presets", "list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains(&presets::gaas().hash()) && text.contains(&presets::gap().hash()));
    let o = photonshift(&["presets", "show", "gaas"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(
        text.contains("quality_factor = 1.2e7") && text.contains("width = 420 nm"),
        "{text}"
    );
    assert_eq!(
        photonshift(&["presets", "show", "si"]).status.code(),
        Some(2)
    );
}
