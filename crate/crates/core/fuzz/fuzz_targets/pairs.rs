#![no_main]

use libfuzzer_sys::fuzz_target;
use mlt_core::codeswitch::PairDictionary;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(dict) = PairDictionary::parse_str(text) else {
        return;
    };
    assert_eq!(PairDictionary::parse_str(&dict.to_tsv()).unwrap(), dict);
});
