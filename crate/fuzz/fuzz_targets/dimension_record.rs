// SPDX-License-Identifier: MIT OR Apache-2.0

#![no_main]

use langdim::stats::DimensionSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(set) = DimensionSet::from_json(text) {
        assert!(set.indices().windows(2).all(|w| w[0] < w[1]));
        assert!(set.indices().iter().all(|&i| i < set.hidden_size()));
        assert_eq!(DimensionSet::from_json(&set.to_json()).expect("reparse"), set);
    }
});
