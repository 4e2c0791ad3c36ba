#![no_main]

use libfuzzer_sys::fuzz_target;
use noma_lddp::config::SweepConfig;
use noma_lddp::sweep::sweep_cells;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = SweepConfig::parse(text) {
        // cell enumeration only; solving is out of scope for a parser target
        if cfg.instances.saturating_mul(cfg.users.len()).saturating_mul(cfg.levels.len()) < 10_000 {
            let _ = sweep_cells(&cfg);
        }
    }
});
