// SPDX-License-Identifier: MIT OR Apache-2.0

#![no_main]

use langdim::stats::CorpusMeanVector;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mean) = CorpusMeanVector::from_json(text) {
        assert!(mean.values().iter().all(|v| v.is_finite()));
        assert_eq!(CorpusMeanVector::from_json(&mean.to_json()).expect("reparse"), mean);
    }
});
