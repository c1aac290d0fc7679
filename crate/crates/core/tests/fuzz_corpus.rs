//! Replays the checked-in fuzz corpus through every parser, plus truncated
//! and byte-flipped variants of each seed, on stable Rust.

use std::fs;
use std::path::PathBuf;

use mlt_core::codeswitch::{read_attention_dump, write_attention_dump, PairDictionary};
use mlt_core::dst::{parse_dialogues, Ontology};
use mlt_core::embeddings::{BilingualLexicon, EmbeddingTable};
use mlt_core::nlu::{parse_nlu, write_nlu};
use mlt_core::Checkpoint;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

/// Parse `data`, returning whether it was accepted. Must never panic.
fn run(target: &str, data: &[u8]) -> bool {
    let text = std::str::from_utf8(data);
    match target {
        "attention_dump" => match read_attention_dump(data) {
            Ok(records) => {
                let mut buf = Vec::new();
                write_attention_dump(&records, &mut buf).unwrap();
                assert_eq!(read_attention_dump(buf.as_slice()).unwrap().len(), records.len());
                true
            }
            Err(_) => false,
        },
        _ => {
            let Ok(text) = text else { return false };
            match target {
                "embeddings" => EmbeddingTable::parse_str(text, None)
                    .map(|t| {
                        let mut buf = Vec::new();
                        t.write(&mut buf).unwrap();
                        let back =
                            EmbeddingTable::parse_str(std::str::from_utf8(&buf).unwrap(), Some(t.dim())).unwrap();
                        assert_eq!(back.len(), t.len());
                    })
                    .is_ok(),
                "lexicon" => BilingualLexicon::parse_str(text).is_ok(),
                "nlu_tsv" => parse_nlu(text)
                    .map(|ex| {
                        let mut buf = Vec::new();
                        write_nlu(&ex, &mut buf).unwrap();
                        assert_eq!(parse_nlu(std::str::from_utf8(&buf).unwrap()).unwrap(), ex);
                    })
                    .is_ok(),
                "dialogues" => parse_dialogues(text).is_ok(),
                "ontology" => Ontology::parse_str(text)
                    .map(|o| assert_eq!(Ontology::from_json(&o.to_json()).unwrap(), o))
                    .is_ok(),
                "pairs" => PairDictionary::parse_str(text)
                    .map(|d| assert_eq!(PairDictionary::parse_str(&d.to_tsv()).unwrap(), d))
                    .is_ok(),
                "checkpoint" => match Checkpoint::from_json(text) {
                    Ok(ck) => ck.dst_model().is_ok() || ck.nlu_model().is_ok(),
                    Err(_) => false,
                },
                other => panic!("unknown target {other}"),
            }
        }
    }
}

const TARGETS: [&str; 8] = [
    "embeddings",
    "lexicon",
    "nlu_tsv",
    "dialogues",
    "ontology",
    "pairs",
    "attention_dump",
    "checkpoint",
];

#[test]
fn every_seed_parses() {
    for target in TARGETS {
        for (name, data) in seeds(target) {
            assert!(run(target, &data), "{target}/{name} was rejected");
        }
    }
}

#[test]
fn mutated_seeds_never_panic() {
    for target in TARGETS {
        for (_, data) in seeds(target) {
            let step = (data.len() / 64).max(1);
            for cut in (0..data.len()).step_by(step) {
                run(target, &data[..cut]);
                let mut flipped = data.clone();
                flipped[cut] ^= 0x5a;
                run(target, &flipped);
                let mut digit = data.clone();
                digit[cut] = b'9';
                run(target, &digit);
            }
        }
    }
}
