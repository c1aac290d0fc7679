#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mlt_cli::synth::{SynthConfig, SynthCorpus};

pub fn dst_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/dst")
        .join(name)
}

/// Run the `mlt` binary.
pub fn mlt<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_mlt"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("mlt runs")
}

pub fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Common DST flags for the checked-in fixture.
pub fn dst_args(out_dir: &Path) -> Vec<String> {
    let f = |n: &str| dst_fixture(n).display().to_string();
    vec![
        "--task".into(),
        "dst".into(),
        "--train".into(),
        f("train.json"),
        "--ontology".into(),
        f("ontology.json"),
        "--source-embeddings".into(),
        f("source.vec"),
        "--target-embeddings".into(),
        f("target.vec"),
        "--lexicon".into(),
        f("lexicon.txt"),
        "--epochs".into(),
        "5".into(),
        "--optimizer".into(),
        "adam".into(),
        "--lr".into(),
        "0.01".into(),
        "--out-dir".into(),
        out_dir.display().to_string(),
    ]
}

/// Export a small synthetic NLU world into `dir` and return it.
pub fn nlu_world(dir: &Path) -> PathBuf {
    let cfg = SynthConfig {
        train_size: 60,
        test_size: 30,
        ..SynthConfig::default()
    };
    let world = dir.join("nlu");
    SynthCorpus::generate(&cfg, 3).unwrap().export(&world).unwrap();
    world
}

pub fn nlu_args(world: &Path, out_dir: &Path) -> Vec<String> {
    let f = |n: &str| world.join(n).display().to_string();
    vec![
        "--task".into(),
        "nlu".into(),
        "--train".into(),
        f("train.tsv"),
        "--source-embeddings".into(),
        f("source.vec"),
        "--target-embeddings".into(),
        f("target.vec"),
        "--lexicon".into(),
        f("lexicon.txt"),
        "--epochs".into(),
        "4".into(),
        "--optimizer".into(),
        "adam".into(),
        "--lr".into(),
        "0.01".into(),
        "--out-dir".into(),
        out_dir.display().to_string(),
    ]
}

pub fn with(mut args: Vec<String>, extra: &[&str]) -> Vec<String> {
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

/// Replace the value of `flag` in `args`.
pub fn set(mut args: Vec<String>, flag: &str, value: &str) -> Vec<String> {
    let i = args.iter().position(|a| a == flag).expect("flag present");
    args[i + 1] = value.to_string();
    args
}
