#![no_main]

use libfuzzer_sys::fuzz_target;
use noma_lddp::instance::{parse_instance, render_instance};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(inst) = parse_instance(text) {
        // anything accepted must survive a write/read cycle unchanged
        let again = parse_instance(&render_instance(&inst)).expect("rendered instance parses");
        assert_eq!(inst, again);
    }
});
