// SPDX-License-Identifier: MIT OR Apache-2.0

#![no_main]

use langdim::bridge::{check_hook_vectors, read_hook_vectors, write_hook_vectors};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(vectors) = read_hook_vectors(data) {
        let _ = check_hook_vectors(&vectors);
        let mut buf = Vec::new();
        write_hook_vectors(&vectors, &mut buf).unwrap();
        assert_eq!(read_hook_vectors(&buf[..]).unwrap(), vectors);
    }
});
