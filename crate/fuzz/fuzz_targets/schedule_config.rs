#![no_main]

use libfuzzer_sys::fuzz_target;
use noma_lddp::config::ScheduleConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ScheduleConfig::parse(text) {
        let params = cfg.params();
        assert_eq!(params.users, cfg.users);
        let _ = cfg.seeds().take(4).count();
    }
});
