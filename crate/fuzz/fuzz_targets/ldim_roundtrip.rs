// SPDX-License-Identifier: MIT OR Apache-2.0

//! Anything the reader accepts must re-encode to the same bytes.

#![no_main]

use langdim::store::{read_corpus_with, ReadOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let opts = ReadOptions { alloc_cap: 1 << 20 };
    if let Ok(corpus) = read_corpus_with(data, &opts) {
        let bytes = corpus.to_bytes().expect("accepted corpus re-encodes");
        assert_eq!(bytes.as_slice(), data);
    }
});
