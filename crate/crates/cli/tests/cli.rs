mod common;

use std::fs;

use common::*;
use mlt_cli::commands::TaskData;
use mlt_cli::report::{MetricsFile, RunManifest};
use mlt_core::codeswitch::PairDictionary;
use mlt_core::{Checkpoint, Task};

fn read(path: &std::path::Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn base_dst_run_writes_loadable_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let dev = dst_fixture("test.json").display().to_string();
    let args = with(set(dst_args(&out), "--epochs", "12"), &["--dev", &dev]);
    ok(&mlt(std::iter::once("train".to_string()).chain(args)));

    let ck = Checkpoint::load(out.join("checkpoint.json")).unwrap();
    assert_eq!(ck.task(), Task::Dst);
    ck.dst_model().unwrap();

    let manifest: RunManifest = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest.losses.len(), 12);
    assert!(manifest.pairs.is_empty());
    // a three-epoch moving average never rises by more than 5%
    let smooth: Vec<f64> = manifest
        .losses
        .windows(3)
        .map(|w| w.iter().sum::<f64>() / 3.0)
        .collect();
    for w in smooth.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "loss trace {:?}", manifest.losses);
    }
    assert!(manifest.losses.last().unwrap() < &manifest.losses[0]);

    let metrics: MetricsFile = serde_json::from_str(&read(&out.join("metrics.json"))).unwrap();
    assert_eq!(metrics.metrics, manifest.metrics);
    assert_eq!(metrics.config_digest, manifest.config_digest);

    let dev: MetricsFile = serde_json::from_str(&read(&out.join("metrics_dev.json"))).unwrap();
    assert_eq!(dev.split, "dev");
    assert_eq!(Some(dev.metrics), manifest.dev_metrics);
}

#[test]
fn mlt_attention_without_source_model_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let args = with(
        dst_args(tmp.path()),
        &["--mode", "mlt_attention", "--base-phase", "false"],
    );
    let out = mlt(std::iter::once("train".to_string()).chain(args));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`checkpoint`"), "{err}");
}

#[test]
fn mlt_attention_runs_a_base_phase_and_keeps_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let args = with(dst_args(&out), &["--mode", "mlt-attention"]);
    ok(&mlt(std::iter::once("train".to_string()).chain(args)));
    for f in [
        "base_checkpoint.json",
        "attention.jsonl",
        "keywords.json",
        "pairs.tsv",
        "checkpoint.json",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let manifest: RunManifest = serde_json::from_str(&read(&out.join("manifest.json"))).unwrap();
    assert!(manifest.base_losses.is_some());
    let dict = PairDictionary::load(out.join("pairs.tsv")).unwrap();
    assert_eq!(manifest.pairs, dict.pairs());
    assert!(!dict.is_empty() && dict.len() <= 90);

    let TaskData::Dst(orig) = TaskData::load(Task::Dst, &dst_fixture("train.json")).unwrap() else {
        unreachable!()
    };
    let TaskData::Dst(cs) = TaskData::Dst(orig.clone()).code_switched(&dict) else {
        unreachable!()
    };
    let mut changed = 0;
    for (a, b) in orig.iter().flatten().zip(cs.iter().flatten()) {
        assert_eq!(a.gold_slots, b.gold_slots);
        assert_eq!(a.gold_requests, b.gold_requests);
        assert_eq!(a.acts, b.acts);
        assert_eq!(a.utterance.len(), b.utterance.len());
        changed += (a.utterance != b.utterance) as usize;
    }
    assert!(changed > 0);
}

#[test]
fn mlt_ontology_pairs_come_from_the_ontology() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let args = with(dst_args(&out), &["--mode", "mlt_ontology"]);
    ok(&mlt(std::iter::once("train".to_string()).chain(args)));
    let dict = PairDictionary::load(out.join("pairs.tsv")).unwrap();
    assert_eq!(dict.get("italian"), Some("italienisch"));
    assert_eq!(dict.get("south"), Some("süd"));
    assert!(!dict.contains("want"));
}

#[test]
fn repeated_training_gives_identical_metric_json() {
    let tmp = tempfile::tempdir().unwrap();
    let world = nlu_world(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let args = with(nlu_args(&world, dir), &["--mode", "mlt_attention", "--seed", "5"]);
        ok(&mlt(std::iter::once("train".to_string()).chain(args)));
    }
    assert_eq!(read(&a.join("metrics.json")), read(&b.join("metrics.json")));
    assert_eq!(read(&a.join("pairs.tsv")), read(&b.join("pairs.tsv")));
    assert_eq!(read(&a.join("checkpoint.json")), read(&b.join("checkpoint.json")));
}

#[test]
fn keyword_selection_respects_pair_budgets() {
    let tmp = tempfile::tempdir().unwrap();
    let world = nlu_world(tmp.path());
    let base = tmp.path().join("base");
    ok(&mlt(std::iter::once("train".to_string()).chain(nlu_args(&world, &base))));
    let ck = base.join("checkpoint.json").display().to_string();

    let mut files = Vec::new();
    for name in ["s1", "s2"] {
        let dir = tmp.path().join(name);
        let args = with(nlu_args(&world, &dir), &["--checkpoint", &ck]);
        ok(&mlt(std::iter::once("select-keywords".to_string()).chain(args)));
        files.push(read(&dir.join("pairs.tsv")));
        assert!(dir.join("attention.jsonl").exists());
    }
    assert!(files[0].lines().count() <= 20);
    assert_eq!(files[0], files[1]);

    let dbase = tmp.path().join("dbase");
    ok(&mlt(std::iter::once("train".to_string()).chain(dst_args(&dbase))));
    let dck = dbase.join("checkpoint.json").display().to_string();
    let dsel = tmp.path().join("dsel");
    let args = with(
        dst_args(&dsel),
        &["--checkpoint", &dck, "--n-pairs", "90", "--min-count", "1"],
    );
    ok(&mlt(std::iter::once("select-keywords".to_string()).chain(args)));
    assert!(read(&dsel.join("pairs.tsv")).lines().count() <= 90);

    // checkpoint of the wrong task
    let args = with(nlu_args(&world, &dsel), &["--checkpoint", &dck]);
    let out = mlt(std::iter::once("select-keywords".to_string()).chain(args));
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("expected nlu"));
}

#[test]
fn evaluating_on_training_data_reproduces_training_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let world = nlu_world(tmp.path());
    let run = tmp.path().join("run");
    ok(&mlt(std::iter::once("train".to_string()).chain(nlu_args(&world, &run))));
    let trained: MetricsFile = serde_json::from_str(&read(&run.join("metrics.json"))).unwrap();

    let ev = tmp.path().join("ev");
    let w = |n: &str| world.join(n).display().to_string();
    let out = mlt([
        "evaluate",
        "--task",
        "nlu",
        "--checkpoint",
        &run.join("checkpoint.json").display().to_string(),
        "--test",
        &w("train.tsv"),
        "--target-embeddings",
        &w("source.vec"),
        "--out-dir",
        &ev.display().to_string(),
    ]);
    ok(&out);
    let evaluated: MetricsFile = serde_json::from_str(&read(&ev.join("metrics.json"))).unwrap();
    assert_eq!(evaluated.metrics, trained.metrics);
    // stdout carries the same JSON
    let printed: MetricsFile = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, evaluated);
}

#[test]
fn evaluation_errors_are_clean() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");
    ok(&mlt(std::iter::once("train".to_string()).chain(dst_args(&run))));
    let ck = run.join("checkpoint.json").display().to_string();
    let f = |n: &str| dst_fixture(n).display().to_string();

    let missing = mlt([
        "evaluate",
        "--task",
        "dst",
        "--checkpoint",
        &ck,
        "--test",
        &f("test_de.json"),
        "--ontology",
        &f("ontology_de.json"),
        "--target-embeddings",
        "/nonexistent/target.vec",
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("target_embeddings"));

    let short = tmp.path().join("short.vec");
    fs::write(&short, "a 1 2 3\nb 4 5 6\n").unwrap();
    let mismatch = mlt([
        "evaluate",
        "--task",
        "dst",
        "--checkpoint",
        &ck,
        "--test",
        &f("test_de.json"),
        "--ontology",
        &f("ontology_de.json"),
        "--target-embeddings",
        &short.display().to_string(),
        "--source-embeddings",
        &f("source.vec"),
    ]);
    assert_eq!(mismatch.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("dimension mismatch"));

    let zero_shot = mlt([
        "evaluate",
        "--task",
        "dst",
        "--checkpoint",
        &ck,
        "--test",
        &f("test_de.json"),
        "--ontology",
        &f("ontology_de.json"),
        "--target-embeddings",
        &f("target.vec"),
        "--out-dir",
        &tmp.path().join("ev").display().to_string(),
    ]);
    ok(&zero_shot);
    let m: MetricsFile = serde_json::from_slice(&zero_shot.stdout).unwrap();
    assert!(m.metrics.joint_goal_acc.unwrap().value <= m.metrics.slot_acc.unwrap().value);
}

#[test]
fn generate_cs_rewrites_tokens_only() {
    let tmp = tempfile::tempdir().unwrap();
    let world = nlu_world(tmp.path());
    let pairs = tmp.path().join("pairs.tsv");
    fs::write(&pairs, "alarm\txalarm\nparis\txparis\n").unwrap();
    let out = mlt([
        "generate-cs",
        "--task",
        "nlu",
        "--train",
        &world.join("train.tsv").display().to_string(),
        "--pairs",
        &pairs.display().to_string(),
        "--out-dir",
        &tmp.path().join("cs").display().to_string(),
    ]);
    ok(&out);
    let path = tmp.path().join("cs/train_cs.tsv");
    let TaskData::Nlu(orig) = TaskData::load(Task::Nlu, &world.join("train.tsv")).unwrap() else {
        unreachable!()
    };
    let TaskData::Nlu(cs) = TaskData::load(Task::Nlu, &path).unwrap() else {
        unreachable!()
    };
    assert_eq!(orig.len(), cs.len());
    for (a, b) in orig.iter().zip(&cs) {
        assert_eq!(a.tags, b.tags);
        assert_eq!(a.intent, b.intent);
        for (x, y) in a.tokens.iter().zip(&b.tokens) {
            match x.as_str() {
                "alarm" | "paris" => assert_eq!(y, &format!("x{x}")),
                _ => assert_eq!(x, y),
            }
        }
    }
}

#[test]
fn config_file_keys_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let world = nlu_world(tmp.path());
    let cfg = tmp.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{"task": "nlu", "train": "nlu/train.tsv", "source_embeddings": "nlu/source.vec",
            "epochs": 2, "optimizer": "adam", "lr": 0.01, "seed": 1, "out_dir": "from_file"}"#,
    )
    .unwrap();
    let out = mlt(["train", "--config", &cfg.display().to_string(), "--seed", "4"]);
    ok(&out);
    let manifest: RunManifest = serde_json::from_str(&read(&tmp.path().join("from_file/manifest.json"))).unwrap();
    assert_eq!(manifest.seed, 4);
    assert_eq!(manifest.losses.len(), 2);
    assert_eq!(
        manifest.config.train.as_deref(),
        Some(world.join("train.tsv").as_path())
    );

    fs::write(&cfg, r#"{"task": "nlu", "epochz": 2}"#).unwrap();
    let out = mlt(["train", "--config", &cfg.display().to_string()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epochz"));
}

#[test]
fn missing_required_inputs_name_the_field() {
    let out = mlt(["train", "--task", "nlu"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`train`"));
    let out = mlt(["train", "--task", "pos"]);
    assert!(!out.status.success());
}
