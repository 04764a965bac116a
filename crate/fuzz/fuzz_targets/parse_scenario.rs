#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use photonshift::scenario::Scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = Scenario::from_toml(text, Path::new(".")) {
        let echo = s.echo();
        let again = Scenario::from_toml(&echo, Path::new(".")).expect("echo parses");
        assert_eq!(again.echo(), echo);
    }
});
