#![no_main]

use libfuzzer_sys::fuzz_target;
use spinloop_core::driving::TabulatedDriving;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = TabulatedDriving::from_csv_str(text) {
            assert!(t.validate().is_ok());
        }
    }
});
