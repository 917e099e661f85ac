#![no_main]

use libfuzzer_sys::fuzz_target;
use stap::tntp::{parse_trips, write_trips};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(demand) = parse_trips(text) else {
        return;
    };
    let again = parse_trips(&write_trips(&demand)).expect("written trips parse");
    assert!(demand.iter().eq(again.iter()));
});
