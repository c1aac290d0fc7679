use std::path::Path;

use mlt_core::codeswitch::{ontology_pairs, SkipReason, DEFAULT_PAIRS_DST};
use mlt_core::dst::Ontology;
use mlt_core::embeddings::BilingualLexicon;

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn woz_style_ontology_yields_ninety_pairs() {
    let ontology = Ontology::load(fixture("woz_ontology.json")).unwrap();
    let lexicon = BilingualLexicon::load(fixture("woz_lexicon.txt")).unwrap();
    let out = ontology_pairs(&ontology.terms(), &lexicon);

    assert_eq!(out.dictionary.len(), 90);
    assert_eq!(out.dictionary.len(), DEFAULT_PAIRS_DST);
    // ontology order: slot names first, multi-word values split
    let sources: Vec<&str> = out.dictionary.sources().take(5).collect();
    assert_eq!(sources, ["food", "area", "price", "range", "afghan"]);
    // first listed target wins
    assert_eq!(out.dictionary.get("food"), Some("food_de"));
    assert!(out.skipped.iter().all(|s| s.reason == SkipReason::NotInLexicon));
    assert!(out.skipped.iter().any(|s| s.word == "signature"));
}
