//! A self-contained bilingual NLU corpus and the BASE vs MLT_A comparison
//! run on it.
//!
//! Every source word has a target-language twin `x<word>`. The bilingual
//! lexicon is exact. The target vector of a word is its source vector plus
//! `noise` times a standard normal draw per word, so translation pairs stay
//! close but not equal. At `noise = 0` both languages share identical
//! vectors.

use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use mlt_core::codeswitch::{build_pairs, collect_top1, default_stopwords, select_keywords, PairDictionary};
use mlt_core::embeddings::{BilingualLexicon, EmbeddingTable};
use mlt_core::metrics::MetricsReport;
use mlt_core::nlu::{attention_records, train_nlu, write_nlu, NluExample, NluModel, NluTrainConfig};
use mlt_core::numeric::OptimizerKind;
use mlt_core::rng::{self, Stream};
use mlt_core::Result;

use crate::error::{CliError, CliResult};
use crate::report::write_json;

const TIME: &[&str] = &["seven", "nine", "noon", "midnight", "six", "eight"];
const LOCATION: &[&str] = &["paris", "london", "tokyo", "rome", "berlin", "new york"];
const DATE: &[&str] = &["today", "tomorrow", "monday", "friday", "tonight", "weekend"];
const TODO: &[&str] = &["laundry", "groceries", "dentist", "homework", "rent", "car wash"];

const ALARM: &[&str] = &["alarm", "wake", "ring"];
const WEATHER: &[&str] = &["weather", "forecast", "rain", "sunny"];
const REMINDER: &[&str] = &["remind", "reminder", "remember"];

/// Templates per intent. `{t}` is a trigger word and `{time}` etc. are
/// slots. `{p}`, `{c}` and `{s}` draw prefix, connector and suffix words
/// from pools shared by all intents, so function words carry no intent.
const TEMPLATES: &[(&str, &[&str])] = &[
    (
        "set_alarm",
        &[
            "{p} {t} {c} {time} {s}",
            "{p} {t} {c} {time} {c} {date} {s}",
            "{p} {c} {time} {date} {s}",
        ],
    ),
    (
        "get_weather",
        &[
            "{p} {t} {c} {location} {s}",
            "{p} {t} {c} {location} {date} {s}",
            "{p} {c} {location} {date} {s}",
        ],
    ),
    (
        "set_reminder",
        &[
            "{p} {t} {c} {todo} {s}",
            "{p} {t} {c} {todo} {c} {time} {s}",
            "{p} {todo} {c} {date} {s}",
        ],
    ),
];

const PREFIX: &[&str] = &["please", "can you", "i want to", "hey", "now", "", ""];
const CONNECTOR: &[&str] = &["at", "for", "in", "on", "about", "to", "the", "me"];
const SUFFIX: &[&str] = &["please", "now", "thanks", "", ""];

fn slot_values(slot: &str) -> &'static [&'static str] {
    match slot {
        "time" => TIME,
        "location" => LOCATION,
        "date" => DATE,
        "todo" => TODO,
        _ => unreachable!("unknown template slot {slot}"),
    }
}

fn triggers(intent: &str) -> &'static [&'static str] {
    match intent {
        "set_alarm" => ALARM,
        "get_weather" => WEATHER,
        _ => REMINDER,
    }
}

/// Target-language spelling of a source word.
pub fn translate(word: &str) -> String {
    format!("x{word}")
}

fn sample_example<R: Rng>(rng: &mut R) -> NluExample {
    let (intent, templates) = TEMPLATES.choose(rng).expect("templates");
    let template = templates.choose(rng).expect("template");
    let (mut tokens, mut tags) = (Vec::new(), Vec::new());
    for piece in template.split_whitespace() {
        let filler = match piece {
            "{p}" => Some(PREFIX),
            "{c}" => Some(CONNECTOR),
            "{s}" => Some(SUFFIX),
            _ => None,
        };
        if let Some(pool) = filler {
            for w in pool.choose(rng).expect("filler").split_whitespace() {
                tokens.push(w.to_string());
                tags.push("O".to_string());
            }
        } else if piece == "{t}" {
            tokens.push(triggers(intent).choose(rng).expect("trigger").to_string());
            tags.push("O".to_string());
        } else if let Some(slot) = piece.strip_prefix('{').and_then(|p| p.strip_suffix('}')) {
            let value = slot_values(slot).choose(rng).expect("value");
            for (k, w) in value.split_whitespace().enumerate() {
                tokens.push(w.to_string());
                tags.push(format!("{}-{slot}", if k == 0 { "B" } else { "I" }));
            }
        } else {
            tokens.push(piece.to_string());
            tags.push("O".to_string());
        }
    }
    NluExample {
        tokens,
        tags,
        intent: intent.to_string(),
    }
}

/// Every source word the templates can produce, sorted.
pub fn source_vocabulary() -> Vec<String> {
    let mut words: Vec<String> = TEMPLATES
        .iter()
        .flat_map(|(_, ts)| ts.iter().flat_map(|t| t.split_whitespace()))
        .filter(|w| !w.starts_with('{'))
        .chain(
            [
                TIME, LOCATION, DATE, TODO, ALARM, WEATHER, REMINDER, PREFIX, CONNECTOR, SUFFIX,
            ]
            .concat()
            .iter()
            .flat_map(|v| v.split_whitespace()),
        )
        .map(String::from)
        .collect();
    words.sort();
    words.dedup();
    words
}

/// Knobs of the synthetic comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub noise: f64,
    pub dim: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub n_pairs: usize,
    pub min_count: usize,
    /// Independent runs, seeded `seed, seed + 1, ...`.
    pub runs: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            noise: 1.0,
            dim: 16,
            train_size: 200,
            test_size: 100,
            hidden_dim: 16,
            epochs: 15,
            lr: 0.01,
            optimizer: OptimizerKind::Adam,
            n_pairs: mlt_core::codeswitch::DEFAULT_PAIRS_NLU,
            min_count: mlt_core::codeswitch::DEFAULT_MIN_COUNT,
            runs: 3,
            seed: 0,
        }
    }
}

/// One sampled bilingual world.
pub struct SynthCorpus {
    pub train: Vec<NluExample>,
    /// Source-language test set.
    pub test_source: Vec<NluExample>,
    /// The same test set fully translated.
    pub test_target: Vec<NluExample>,
    /// Both vocabularies in one shared space.
    pub embeddings: EmbeddingTable,
    pub source_embeddings: EmbeddingTable,
    pub target_embeddings: EmbeddingTable,
    pub lexicon: BilingualLexicon,
}

fn gaussian<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

impl SynthCorpus {
    pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<Self> {
        let mut corpus_rng = rng::derived(seed, Stream::Corpus);
        let train = (0..cfg.train_size).map(|_| sample_example(&mut corpus_rng)).collect();
        let test_source: Vec<NluExample> = (0..cfg.test_size).map(|_| sample_example(&mut corpus_rng)).collect();

        let vocab = source_vocabulary();
        let mut lexicon = BilingualLexicon::new();
        for w in &vocab {
            lexicon.insert(w, &translate(w))?;
        }
        let dict = PairDictionary::from_pairs(vocab.iter().map(|w| (w.clone(), translate(w))))?;
        let test_target = test_source.iter().map(|ex| ex.code_switched(&dict)).collect();

        let mut emb_rng = rng::derived(seed, Stream::Embeddings);
        let mut source_embeddings = EmbeddingTable::new(cfg.dim)?;
        let mut target_embeddings = EmbeddingTable::new(cfg.dim)?;
        for w in &vocab {
            let src = gaussian(&mut emb_rng, cfg.dim);
            let jitter = gaussian(&mut emb_rng, cfg.dim);
            let tgt = src.iter().zip(&jitter).map(|(s, j)| s + cfg.noise * j).collect();
            source_embeddings.insert(w, src)?;
            target_embeddings.insert(&translate(w), tgt)?;
        }
        Ok(SynthCorpus {
            train,
            test_source,
            test_target,
            embeddings: source_embeddings.merged(&target_embeddings)?,
            source_embeddings,
            target_embeddings,
            lexicon,
        })
    }

    /// Write the corpus as CLI inputs: `train.tsv`, `test_source.tsv`,
    /// `test_target.tsv`, `source.vec`, `target.vec` and `lexicon.txt`.
    pub fn export(&self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))?;
        let create = |name: &str| {
            let path = dir.join(name);
            fs::File::create(&path)
                .map(std::io::BufWriter::new)
                .map_err(|e| CliError::file(&path, e))
        };
        write_nlu(&self.train, create("train.tsv")?)?;
        write_nlu(&self.test_source, create("test_source.tsv")?)?;
        write_nlu(&self.test_target, create("test_target.tsv")?)?;
        self.source_embeddings.write(create("source.vec")?)?;
        self.target_embeddings.write(create("target.vec")?)?;
        let mut lex = String::new();
        for w in self.lexicon.sources() {
            for t in self.lexicon.targets(w).unwrap_or_default() {
                lex.push_str(&format!("{w} {t}\n"));
            }
        }
        let path = dir.join("lexicon.txt");
        fs::write(&path, lex).map_err(|e| CliError::file(&path, e))
    }
}

/// Intent accuracy and slot F1 of `model` on `examples`.
pub fn evaluate_nlu(model: &NluModel, emb: &EmbeddingTable, examples: &[NluExample]) -> Result<MetricsReport> {
    let (mut pi, mut gi, mut pt, mut gt) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for ex in examples {
        let p = model.predict(emb, &ex.tokens, None)?;
        pi.push(p.intent);
        pt.push(p.tags);
        gi.push(ex.intent.clone());
        gt.push(ex.tags.clone());
    }
    MetricsReport::nlu(&pi, &gi, &pt, &gt)
}

/// Results of one seeded run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthRun {
    pub seed: u64,
    pub pairs: Vec<(String, String)>,
    pub base: MetricsReport,
    pub mlt_attention: MetricsReport,
    /// MLT_A minus BASE, in percentage points.
    pub intent_delta: f64,
    pub slot_f1_delta: f64,
    pub base_losses: Vec<f64>,
    pub mlt_losses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub config: SynthConfig,
    pub runs: Vec<SynthRun>,
    pub mean_intent_delta: f64,
    pub mean_slot_f1_delta: f64,
}

fn points(r: &MetricsReport) -> (f64, f64) {
    let intent = r.intent_acc.map_or(0.0, |x| x.value);
    let f1 = r.slot_f1.map_or(0.0, |x| x.value);
    (100.0 * intent, 100.0 * f1)
}

/// Train BASE on source data, mine keyword pairs from its attention,
/// retrain on code-switched data and compare both zero-shot.
pub fn run_once(cfg: &SynthConfig, seed: u64) -> Result<SynthRun> {
    let corpus = SynthCorpus::generate(cfg, seed)?;
    let train_cfg = NluTrainConfig {
        hidden_dim: cfg.hidden_dim,
        epochs: cfg.epochs,
        lr: cfg.lr,
        optimizer: cfg.optimizer,
        seed,
        ..NluTrainConfig::default()
    };
    let base = train_nlu(&corpus.train, &corpus.embeddings, &train_cfg)?;

    let records = attention_records(&base.model, &corpus.embeddings, &corpus.train)?;
    let counts = collect_top1(&records, &default_stopwords());
    let keywords = select_keywords(&counts.counts, cfg.n_pairs, cfg.min_count);
    let dict = build_pairs(&keywords, &corpus.lexicon).dictionary;
    let cs: Vec<NluExample> = corpus.train.iter().map(|ex| ex.code_switched(&dict)).collect();
    let mlt = train_nlu(&cs, &corpus.embeddings, &train_cfg)?;

    let base_report = evaluate_nlu(&base.model, &corpus.embeddings, &corpus.test_target)?;
    let mlt_report = evaluate_nlu(&mlt.model, &corpus.embeddings, &corpus.test_target)?;
    let (bi, bf) = points(&base_report);
    let (mi, mf) = points(&mlt_report);
    log::info!(
        "seed {seed}: BASE intent {bi:.1} f1 {bf:.1}, MLT_A intent {mi:.1} f1 {mf:.1}, {} pairs",
        dict.len()
    );
    Ok(SynthRun {
        seed,
        pairs: dict.pairs().to_vec(),
        base: base_report,
        mlt_attention: mlt_report,
        intent_delta: mi - bi,
        slot_f1_delta: mf - bf,
        base_losses: base.losses,
        mlt_losses: mlt.losses,
    })
}

/// All runs, in parallel threads, reported in seed order.
pub fn run_experiment(cfg: &SynthConfig) -> Result<SynthReport> {
    let seeds: Vec<u64> = (0..cfg.runs as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let runs: Vec<SynthRun> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds.iter().map(|&seed| s.spawn(move || run_once(cfg, seed))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("synthetic run panicked"))
            .collect::<Result<_>>()
    })?;
    let n = runs.len().max(1) as f64;
    let mean_intent_delta = runs.iter().map(|r| r.intent_delta).sum::<f64>() / n;
    let mean_slot_f1_delta = runs.iter().map(|r| r.slot_f1_delta).sum::<f64>() / n;
    Ok(SynthReport {
        config: cfg.clone(),
        runs,
        mean_intent_delta,
        mean_slot_f1_delta,
    })
}

/// Run the experiment and write `synth_report.json` into `out_dir`.
pub fn cmd_synth_experiment(cfg: &SynthConfig, out_dir: &Path) -> CliResult<SynthReport> {
    if cfg.runs == 0 || cfg.train_size == 0 || cfg.test_size == 0 || cfg.dim == 0 {
        return Err(CliError::usage("runs", "runs, sizes and dim must be positive"));
    }
    if !(cfg.noise.is_finite() && cfg.noise >= 0.0) {
        return Err(CliError::usage("noise", "must be a non-negative number"));
    }
    let report = run_experiment(cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::file(out_dir, e))?;
    write_json(&out_dir.join("synth_report.json"), &report)?;
    Ok(report)
}
