// SPDX-License-Identifier: MIT OR Apache-2.0

#![no_main]

use langdim::store::{read_corpus_with, ReadOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let opts = ReadOptions { alloc_cap: 1 << 20 };
    if let Ok(corpus) = read_corpus_with(data, &opts) {
        for rec in &corpus.records {
            assert!(rec.data.iter().all(|x| x.is_finite()));
            assert_eq!(
                rec.data.len(),
                corpus.header.num_layers() * rec.num_tokens as usize * corpus.hidden_size()
            );
        }
    }
});
