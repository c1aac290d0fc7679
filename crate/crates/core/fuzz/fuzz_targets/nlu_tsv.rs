#![no_main]

use libfuzzer_sys::fuzz_target;
use mlt_core::nlu::{parse_nlu, write_nlu};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(examples) = parse_nlu(text) else { return };
    let mut out = Vec::new();
    write_nlu(&examples, &mut out).unwrap();
    assert_eq!(parse_nlu(std::str::from_utf8(&out).unwrap()).unwrap(), examples);
});
