// SPDX-License-Identifier: MIT OR Apache-2.0

#![no_main]

use langdim::store::{read_meta, write_meta};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = read_meta(data) {
        let mut out = Vec::new();
        write_meta(&records, &mut out).expect("write");
        assert_eq!(read_meta(out.as_slice()).expect("reread"), records);
    }
});
