//! Runs the checked-in fuzz corpus through the same checks as the fuzz
//! targets, so regressions show up without a fuzzing toolchain.

use std::fs;
use std::path::{Path, PathBuf};

use photonshift::overlap::{parse_field_file, write_field_file};
use photonshift::scenario::Scenario;
use photonshift::units::{format_quantity, parse_quantity, Dimension};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read_to_string(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn quantity_seeds() {
    let dims = [
        Dimension::Length,
        Dimension::Time,
        Dimension::Rate,
        Dimension::Power,
        Dimension::ElectricField,
        Dimension::Susceptibility,
        Dimension::RatePerField,
    ];
    let mut parsed = 0;
    for (name, text) in seeds("parse_quantity") {
        for dim in dims {
            if let Ok(v) = parse_quantity(&text, dim) {
                parsed += 1;
                let again = parse_quantity(&format_quantity(v, dim), dim).unwrap();
                assert_eq!(again.to_bits(), v.to_bits(), "{name}");
            }
        }
    }
    assert!(parsed >= 8);
}

#[test]
fn field_file_seeds() {
    let mut ok = Vec::new();
    for (name, text) in seeds("parse_field_file") {
        if let Ok(field) = parse_field_file(&text) {
            assert_eq!(
                parse_field_file(&write_field_file(&field)).unwrap(),
                field,
                "{name}"
            );
            ok.push(name);
        }
    }
    assert_eq!(ok, ["per_photon", "small_raw"]);
}

#[test]
fn scenario_seeds() {
    let mut ok = Vec::new();
    for (name, text) in seeds("parse_scenario") {
        if let Ok(s) = Scenario::from_toml(&text, Path::new(".")) {
            let echo = s.echo();
            assert_eq!(
                Scenario::from_toml(&echo, Path::new(".")).unwrap().echo(),
                echo,
                "{name}"
            );
            ok.push(name);
        }
    }
    assert_eq!(
        ok,
        [
            "gap_gaussian",
            "inline_system",
            "preset_only",
            "sweep_shaping"
        ]
    );
}
