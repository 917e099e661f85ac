#![no_main]

use libfuzzer_sys::fuzz_target;
use stap::tntp::{parse_network, write_network};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(net) = parse_network(text) else {
        return;
    };
    // anything accepted must survive a write and re-read unchanged
    let again = parse_network(&write_network(&net)).expect("written network parses");
    assert_eq!(net.links(), again.links());
    assert_eq!(net.node_count(), again.node_count());
    assert_eq!(net.zone_count(), again.zone_count());
});
