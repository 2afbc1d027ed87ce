#![no_main]

use libfuzzer_sys::fuzz_target;
use spinloop_cli::Scenario;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // tabulated tables resolve against a directory that does not exist
        let _ = Scenario::from_toml_str(text, std::path::Path::new("/nonexistent"));
    }
});
