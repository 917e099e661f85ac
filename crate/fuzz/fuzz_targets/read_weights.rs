#![no_main]

use libfuzzer_sys::fuzz_target;
use stap::weights::{read_weights, write_weights};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(w) = read_weights(text) else {
        return;
    };
    assert!(w.is_diagonally_dominant());
    let again = read_weights(&write_weights(&w)).expect("written weights parse");
    assert_eq!(w, again);
});
