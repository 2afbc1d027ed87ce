#![no_main]

use libfuzzer_sys::fuzz_target;
use spinloop_core::PhaseSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = PhaseSet::from_json(text) {
            let again = PhaseSet::from_json(&p.to_json()).expect("round trip");
            assert_eq!(p, again);
        }
    }
});
