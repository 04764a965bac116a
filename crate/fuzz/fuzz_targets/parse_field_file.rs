#![no_main]

use libfuzzer_sys::fuzz_target;
use photonshift::overlap::{parse_field_file, write_field_file};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(field) = parse_field_file(text) {
        let again = parse_field_file(&write_field_file(&field)).expect("written field parses");
        assert_eq!(again, field);
    }
});
