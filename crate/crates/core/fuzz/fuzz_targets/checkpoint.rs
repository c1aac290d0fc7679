#![no_main]

use libfuzzer_sys::fuzz_target;
use mlt_core::Checkpoint;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ck) = Checkpoint::from_json(text) {
        // a parsed checkpoint either rebuilds a model or reports why not
        let _ = ck.dst_model();
        let _ = ck.nlu_model();
    }
});
