#![no_main]

use libfuzzer_sys::fuzz_target;
use mlt_core::codeswitch::{read_attention_dump, write_attention_dump};

fuzz_target!(|data: &[u8]| {
    let Ok(records) = read_attention_dump(data) else { return };
    let mut out = Vec::new();
    write_attention_dump(&records, &mut out).unwrap();
    assert_eq!(read_attention_dump(out.as_slice()).unwrap().len(), records.len());
});
