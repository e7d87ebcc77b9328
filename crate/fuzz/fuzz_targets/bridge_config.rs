// SPDX-License-Identifier: MIT OR Apache-2.0

#![no_main]

use langdim::bridge::BridgeConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = BridgeConfig::from_toml(text) {
        let _ = cfg.validate(12);
        let _ = cfg.sidecar_path();
    }
});
