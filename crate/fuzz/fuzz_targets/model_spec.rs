// SPDX-License-Identifier: MIT OR Apache-2.0

//! Model descriptions are parsed from JSON and validated before any
//! allocation sized by them.

#![no_main]

use langdim::toy::PlantedModelSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<PlantedModelSpec>(data) else {
        return;
    };
    let _ = spec.validate();
});
