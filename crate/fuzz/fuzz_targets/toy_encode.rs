// SPDX-License-Identifier: MIT OR Apache-2.0

#![no_main]

use langdim::toy::ToyVocab;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let vocab = ToyVocab::new(64);
    if let Ok(tokens) = vocab.encode(text) {
        let decoded = vocab.decode(&tokens).expect("encoded tokens decode");
        assert_eq!(vocab.encode(&decoded).expect("re-encode"), tokens);
    }
});
