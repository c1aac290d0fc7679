#![no_main]

use libfuzzer_sys::fuzz_target;
use mlt_core::embeddings::BilingualLexicon;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(lex) = BilingualLexicon::parse_str(text) {
            for s in lex.sources() {
                assert!(lex.first_target(s).is_some());
            }
        }
    }
});
