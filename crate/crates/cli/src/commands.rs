//! The subcommands as library functions.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use mlt_core::codeswitch::{
    build_pairs, collect_top1, default_stopwords, ontology_pairs, select_keywords, write_attention_dump,
    AttentionRecord, PairDictionary, Skipped,
};
use mlt_core::dst::{self, gold_beliefs, load_dialogues, track_all, train_dst, write_dialogues, Dialogue, Ontology};
use mlt_core::embeddings::{BilingualLexicon, EmbeddingTable};
use mlt_core::metrics::MetricsReport;
use mlt_core::nlu::{self, load_nlu, train_nlu, write_nlu, NluExample, TransitionMask};
use mlt_core::{Checkpoint, Error, Task};

use crate::config::{ExperimentConfig, Mode};
use crate::error::{CliError, CliResult};
use crate::report::{write_json, MetricsFile, RunManifest};

/// Training or evaluation data of either task.
#[derive(Clone, Debug)]
pub enum TaskData {
    Dst(Vec<Dialogue>),
    Nlu(Vec<NluExample>),
}

impl TaskData {
    pub fn load(task: Task, path: &Path) -> CliResult<Self> {
        Ok(match task {
            Task::Dst => {
                let set = load_dialogues(path)?;
                if set.ignored_acts > 0 {
                    log::warn!("{}: ignored {} extra system acts", path.display(), set.ignored_acts);
                }
                TaskData::Dst(set.dialogues)
            }
            Task::Nlu => TaskData::Nlu(load_nlu(path)?),
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let file = File::create(path).map_err(|e| CliError::file(path, e))?;
        let out = BufWriter::new(file);
        match self {
            TaskData::Dst(d) => write_dialogues(d, out)?,
            TaskData::Nlu(x) => write_nlu(x, out)?,
        }
        Ok(())
    }

    /// Copy with every utterance rewritten by `dict`; labels untouched.
    pub fn code_switched(&self, dict: &PairDictionary) -> Self {
        match self {
            TaskData::Dst(ds) => TaskData::Dst(
                ds.iter()
                    .map(|d| d.iter().map(|t| t.code_switched(dict)).collect())
                    .collect(),
            ),
            TaskData::Nlu(xs) => TaskData::Nlu(xs.iter().map(|x| x.code_switched(dict)).collect()),
        }
    }

    pub fn file_name(&self, stem: &str) -> String {
        match self {
            TaskData::Dst(_) => format!("{stem}.json"),
            TaskData::Nlu(_) => format!("{stem}.tsv"),
        }
    }
}

fn load_table(path: &Path, cfg: &ExperimentConfig) -> CliResult<EmbeddingTable> {
    let table = EmbeddingTable::load(path, None)?;
    if table.duplicates() > 0 {
        log::warn!(
            "{}: {} duplicate tokens kept their first vector",
            path.display(),
            table.duplicates()
        );
    }
    Ok(table.with_oov_policy(cfg.oov))
}

fn same_dim(a: &EmbeddingTable, b: &EmbeddingTable) -> CliResult<()> {
    if a.dim() != b.dim() {
        return Err(CliError::Core(Error::Dimension {
            op: "source vs target embeddings",
            left: vec![a.dim()],
            right: vec![b.dim()],
        }));
    }
    Ok(())
}

/// Source vectors, plus target vectors for code-switched tokens when given.
fn training_table(cfg: &ExperimentConfig) -> CliResult<EmbeddingTable> {
    let src = load_table(cfg.require("source_embeddings", &cfg.source_embeddings)?, cfg)?;
    match &cfg.target_embeddings {
        Some(p) => {
            let tgt = load_table(p, cfg)?;
            same_dim(&src, &tgt)?;
            Ok(src.merged(&tgt)?.with_oov_policy(cfg.oov))
        }
        None => Ok(src),
    }
}

fn load_ontology(cfg: &ExperimentConfig) -> CliResult<Ontology> {
    Ok(Ontology::load(cfg.require("ontology", &cfg.ontology)?)?)
}

fn check_embed_dim(ck: &Checkpoint, table: &EmbeddingTable) -> CliResult<()> {
    if ck.embed_dim() != table.dim() {
        return Err(CliError::Core(Error::Dimension {
            op: "checkpoint vs embeddings",
            left: vec![ck.embed_dim()],
            right: vec![table.dim()],
        }));
    }
    Ok(())
}

fn load_checkpoint(cfg: &ExperimentConfig) -> CliResult<Checkpoint> {
    let path = cfg.require("checkpoint", &cfg.checkpoint)?;
    let ck = Checkpoint::load(path)?;
    ck.expect(cfg.task)?;
    Ok(ck)
}

fn ensure_out_dir(cfg: &ExperimentConfig) -> CliResult<&Path> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::file(&cfg.out_dir, e))?;
    Ok(&cfg.out_dir)
}

/// Train a model of the configured task; returns it with its loss trace.
pub fn fit(cfg: &ExperimentConfig, data: &TaskData, table: &EmbeddingTable) -> CliResult<(Checkpoint, Vec<f64>)> {
    Ok(match data {
        TaskData::Dst(ds) => {
            let ontology = load_ontology(cfg)?;
            let turns: Vec<_> = ds.iter().flatten().cloned().collect();
            let out = train_dst(&turns, &ontology, table, &cfg.dst_train())?;
            (Checkpoint::from(&out.model), out.losses)
        }
        TaskData::Nlu(xs) => {
            let out = train_nlu(xs, table, &cfg.nlu_train())?;
            (Checkpoint::from(&out.model), out.losses)
        }
    })
}

/// Inference plus metrics.
pub fn score(
    cfg: &ExperimentConfig,
    ck: &Checkpoint,
    data: &TaskData,
    table: &EmbeddingTable,
) -> CliResult<MetricsReport> {
    check_embed_dim(ck, table)?;
    Ok(match data {
        TaskData::Dst(ds) => {
            let ontology = load_ontology(cfg)?;
            let model = ck.dst_model()?;
            let track = dst::TrackConfig {
                threshold: cfg.threshold,
                mode: model.mode,
            };
            let pred = track_all(&model, table, ds, &ontology, &track)?;
            let gold: Vec<_> = ds.iter().flat_map(|d| gold_beliefs(d, &ontology)).collect();
            MetricsReport::dst(&pred, &gold)?
        }
        TaskData::Nlu(xs) => {
            let model = ck.nlu_model()?;
            let mask = cfg.bio_mask.then(|| TransitionMask::bio(model.tags()));
            let (mut pi, mut gi, mut pt, mut gt) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
            for x in xs {
                let p = model.predict(table, &x.tokens, mask.as_ref())?;
                pi.push(p.intent);
                pt.push(p.tags);
                gi.push(x.intent.clone());
                gt.push(x.tags.clone());
            }
            MetricsReport::nlu(&pi, &gi, &pt, &gt)?
        }
    })
}

/// Per-utterance attention of a trained model.
pub fn attention_dump(ck: &Checkpoint, data: &TaskData, table: &EmbeddingTable) -> CliResult<Vec<AttentionRecord>> {
    check_embed_dim(ck, table)?;
    Ok(match data {
        TaskData::Dst(ds) => dst::attention_records(&ck.dst_model()?, table, ds)?,
        TaskData::Nlu(xs) => nlu::attention_records(&ck.nlu_model()?, table, xs)?,
    })
}

/// Outcome of attention-based keyword selection.
#[derive(Clone, Debug, Serialize)]
pub struct Selection {
    pub counts: BTreeMap<String, usize>,
    pub skipped_records: usize,
    pub stopword_hits: usize,
    pub n: usize,
    pub min_count: usize,
    pub keywords: Vec<String>,
    pub pairs: Vec<(String, String)>,
    pub unpaired: Vec<Skipped>,
    #[serde(skip)]
    pub dictionary: PairDictionary,
    #[serde(skip)]
    pub records: Vec<AttentionRecord>,
}

pub fn select(
    cfg: &ExperimentConfig,
    ck: &Checkpoint,
    data: &TaskData,
    table: &EmbeddingTable,
    lexicon: &BilingualLexicon,
) -> CliResult<Selection> {
    let records = attention_dump(ck, data, table)?;
    let top = collect_top1(&records, &default_stopwords());
    let keywords = select_keywords(&top.counts, cfg.n_pairs(), cfg.min_count);
    let outcome = build_pairs(&keywords, lexicon);
    for s in &outcome.skipped {
        log::info!("keyword `{}` not paired: {:?}", s.word, s.reason);
    }
    Ok(Selection {
        counts: top.counts,
        skipped_records: top.skipped,
        stopword_hits: top.stopword_hits,
        n: cfg.n_pairs(),
        min_count: cfg.min_count,
        keywords,
        pairs: outcome.dictionary.pairs().to_vec(),
        unpaired: outcome.skipped,
        dictionary: outcome.dictionary,
        records,
    })
}

fn write_selection(dir: &Path, sel: &Selection) -> CliResult<()> {
    let path = dir.join("attention.jsonl");
    let file = File::create(&path).map_err(|e| CliError::file(&path, e))?;
    write_attention_dump(&sel.records, BufWriter::new(file))?;
    sel.dictionary.save(dir.join("pairs.tsv"))?;
    write_json(&dir.join("keywords.json"), sel)
}

/// Paths written by `train`.
#[derive(Clone, Debug)]
pub struct TrainOutputs {
    pub checkpoint: PathBuf,
    pub manifest: RunManifest,
    pub metrics: MetricsFile,
}

fn validate_train(cfg: &ExperimentConfig) -> CliResult<()> {
    cfg.validate_numbers()?;
    cfg.require("train", &cfg.train)?;
    cfg.require("source_embeddings", &cfg.source_embeddings)?;
    for (field, p) in [
        ("dev", &cfg.dev),
        ("test", &cfg.test),
        ("target_embeddings", &cfg.target_embeddings),
        ("lexicon", &cfg.lexicon),
        ("ontology", &cfg.ontology),
        ("checkpoint", &cfg.checkpoint),
        ("pairs", &cfg.pairs),
    ] {
        cfg.check_optional(field, p)?;
    }
    if cfg.task == Task::Dst {
        cfg.require("ontology", &cfg.ontology)?;
    }
    if cfg.mode == Mode::Base {
        return Ok(());
    }
    cfg.require("target_embeddings", &cfg.target_embeddings)?;
    if cfg.pairs.is_some() {
        return Ok(());
    }
    cfg.require("lexicon", &cfg.lexicon)?;
    match cfg.mode {
        Mode::MltOntology => {
            cfg.require("ontology", &cfg.ontology)?;
        }
        Mode::MltAttention if cfg.checkpoint.is_none() && !cfg.base_phase => {
            return Err(CliError::usage(
                "checkpoint",
                "mlt_attention needs a source model checkpoint or base_phase = true",
            ));
        }
        _ => {}
    }
    Ok(())
}

/// Build the training pairs for an mlt mode. Returns the dictionary and
/// the BASE-phase losses if a BASE model was trained here.
fn mode_pairs(
    cfg: &ExperimentConfig,
    data: &TaskData,
    table: &EmbeddingTable,
    dir: &Path,
) -> CliResult<(Option<PairDictionary>, Option<Vec<f64>>)> {
    if cfg.mode == Mode::Base {
        return Ok((None, None));
    }
    if let Some(p) = &cfg.pairs {
        return Ok((Some(PairDictionary::load(p)?), None));
    }
    let lexicon = BilingualLexicon::load(cfg.require("lexicon", &cfg.lexicon)?)?;
    match cfg.mode {
        Mode::Base => unreachable!(),
        Mode::MltOntology => {
            let outcome = ontology_pairs(&load_ontology(cfg)?.terms(), &lexicon);
            for s in &outcome.skipped {
                log::info!("ontology token `{}` not paired: {:?}", s.word, s.reason);
            }
            Ok((Some(outcome.dictionary), None))
        }
        Mode::MltAttention => {
            let (source, base_losses) = match &cfg.checkpoint {
                Some(_) => (load_checkpoint(cfg)?, None),
                None => {
                    log::info!("training the BASE model for keyword selection");
                    let base_cfg = ExperimentConfig {
                        mode: Mode::Base,
                        ..cfg.clone()
                    };
                    let (ck, losses) = fit(&base_cfg, data, table)?;
                    ck.save(dir.join("base_checkpoint.json"))?;
                    (ck, Some(losses))
                }
            };
            let sel = select(cfg, &source, data, table, &lexicon)?;
            write_selection(dir, &sel)?;
            Ok((Some(sel.dictionary), base_losses))
        }
    }
}

/// Train per the configured mode and write `checkpoint.json`,
/// `metrics.json` (training-set metrics), `manifest.json` and, in mlt
/// modes, `pairs.tsv`.
pub fn cmd_train(cfg: &ExperimentConfig) -> CliResult<TrainOutputs> {
    validate_train(cfg)?;
    let started = Instant::now();
    let dir = ensure_out_dir(cfg)?;
    let table = training_table(cfg)?;
    let data = TaskData::load(cfg.task, cfg.require("train", &cfg.train)?)?;

    let (dict, base_losses) = mode_pairs(cfg, &data, &table, dir)?;
    let train_data = match &dict {
        Some(d) => {
            d.save(dir.join("pairs.tsv"))?;
            log::info!("code-switching the training data with {} pairs", d.len());
            data.code_switched(d)
        }
        None => data.clone(),
    };

    let (ck, losses) = fit(cfg, &train_data, &table)?;
    let checkpoint = dir.join("checkpoint.json");
    ck.save(&checkpoint)?;

    let report = score(cfg, &ck, &data, &table)?;
    let metrics = MetricsFile::new(cfg, "train", report.clone());
    write_json(&dir.join("metrics.json"), &metrics)?;

    let dev_metrics = match &cfg.dev {
        Some(path) => {
            let dev = TaskData::load(cfg.task, path)?;
            let report = score(cfg, &ck, &dev, &table)?;
            write_json(
                &dir.join("metrics_dev.json"),
                &MetricsFile::new(cfg, "dev", report.clone()),
            )?;
            Some(report)
        }
        None => None,
    };

    let manifest = RunManifest {
        config_digest: cfg.digest(),
        seed: cfg.seed,
        config: cfg.clone(),
        pairs: dict.map(|d| d.pairs().to_vec()).unwrap_or_default(),
        losses,
        base_losses,
        metrics: report,
        dev_metrics,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(TrainOutputs {
        checkpoint,
        manifest,
        metrics,
    })
}

/// Dump attention of a trained model over the training data and write
/// `attention.jsonl`, `keywords.json` and `pairs.tsv`.
pub fn cmd_select_keywords(cfg: &ExperimentConfig) -> CliResult<Selection> {
    cfg.validate_numbers()?;
    let ck = load_checkpoint(cfg)?;
    let data = TaskData::load(cfg.task, cfg.require("train", &cfg.train)?)?;
    let table = training_table(cfg)?;
    let lexicon = BilingualLexicon::load(cfg.require("lexicon", &cfg.lexicon)?)?;
    let dir = ensure_out_dir(cfg)?;
    let sel = select(cfg, &ck, &data, &table, &lexicon)?;
    write_selection(dir, &sel)?;
    Ok(sel)
}

/// Rewrite the `train` data with the `pairs` file into `<out_dir>/train_cs.*`.
pub fn cmd_generate_cs(cfg: &ExperimentConfig) -> CliResult<PathBuf> {
    let dict = PairDictionary::load(cfg.require("pairs", &cfg.pairs)?)?;
    let data = TaskData::load(cfg.task, cfg.require("train", &cfg.train)?)?;
    let dir = ensure_out_dir(cfg)?;
    let cs = data.code_switched(&dict);
    let path = dir.join(cs.file_name("train_cs"));
    cs.save(&path)?;
    Ok(path)
}

/// Zero-shot evaluation: load the checkpoint, swap in the target embedding
/// table (the source table if no target is given) and score `test`.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> CliResult<MetricsFile> {
    cfg.validate_numbers()?;
    let ck = load_checkpoint(cfg)?;
    let test = cfg.require("test", &cfg.test)?;
    let table = match (&cfg.target_embeddings, &cfg.source_embeddings) {
        (Some(_), src) => {
            let tgt = load_table(cfg.require("target_embeddings", &cfg.target_embeddings)?, cfg)?;
            if src.is_some() {
                let src = load_table(cfg.require("source_embeddings", src)?, cfg)?;
                same_dim(&src, &tgt)?;
            }
            tgt
        }
        (None, Some(_)) => load_table(cfg.require("source_embeddings", &cfg.source_embeddings)?, cfg)?,
        (None, None) => return Err(CliError::usage("target_embeddings", "an embedding file is required")),
    };
    let data = TaskData::load(cfg.task, test)?;
    let report = score(cfg, &ck, &data, &table)?;
    let metrics = MetricsFile::new(cfg, "test", report);
    let dir = ensure_out_dir(cfg)?;
    write_json(&dir.join("metrics.json"), &metrics)?;
    Ok(metrics)
}
