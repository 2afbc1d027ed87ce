#![no_main]

use libfuzzer_sys::fuzz_target;
use spinloop_core::HolonomyU2;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(h) = HolonomyU2::from_json(text) {
            assert!(h.unitarity_error() < 1e-6);
            HolonomyU2::from_json(&h.to_json()).expect("round trip");
        }
    }
});
