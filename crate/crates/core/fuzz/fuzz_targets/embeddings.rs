#![no_main]

use libfuzzer_sys::fuzz_target;
use mlt_core::embeddings::EmbeddingTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(table) = EmbeddingTable::parse_str(text, None) else {
        return;
    };
    let mut out = Vec::new();
    table.write(&mut out).unwrap();
    let back = EmbeddingTable::parse_str(std::str::from_utf8(&out).unwrap(), Some(table.dim())).unwrap();
    assert_eq!(back.len(), table.len());
});
