#![no_main]

use libfuzzer_sys::fuzz_target;
use photonshift::units::{format_quantity, parse_quantity, Dimension};

const DIMENSIONS: [Dimension; 7] = [
    Dimension::Length,
    Dimension::Time,
    Dimension::Rate,
    Dimension::Power,
    Dimension::ElectricField,
    Dimension::Susceptibility,
    Dimension::RatePerField,
];

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for dim in DIMENSIONS {
        if let Ok(v) = parse_quantity(text, dim) {
            // the canonical form must read back to the same value
            let again = parse_quantity(&format_quantity(v, dim), dim).expect("formatted quantity parses");
            assert_eq!(again.to_bits(), v.to_bits());
        }
    }
});
