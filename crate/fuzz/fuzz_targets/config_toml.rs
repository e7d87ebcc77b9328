// SPDX-License-Identifier: MIT OR Apache-2.0

#![no_main]

use langdim::driver::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml(text) {
        let _ = cfg.validate();
        let _ = cfg.validate_against(64, 12);
        let _ = cfg.to_json();
    }
});
