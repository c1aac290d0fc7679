#![no_main]

use libfuzzer_sys::fuzz_target;
use mlt_core::dst::Ontology;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(ontology) = Ontology::parse_str(text) else {
        return;
    };
    let again = Ontology::from_json(&ontology.to_json()).unwrap();
    assert_eq!(again, ontology);
});
