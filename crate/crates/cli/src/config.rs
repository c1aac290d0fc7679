//! Flat JSON experiment configuration with same-named flag overrides.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mlt_core::codeswitch::{DEFAULT_MIN_COUNT, DEFAULT_PAIRS_DST, DEFAULT_PAIRS_NLU};
use mlt_core::dst::{DstTrainConfig, ScoringMode, TrackConfig};
use mlt_core::embeddings::OovPolicy;
use mlt_core::nlu::NluTrainConfig;
use mlt_core::numeric::OptimizerKind;
use mlt_core::Task;

use crate::error::CliError;

/// Where training data comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Source-language data only.
    #[default]
    Base,
    /// Code-switch with pairs built from the ontology vocabulary.
    MltOntology,
    /// Code-switch with pairs mined from a source model's attention.
    MltAttention,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Base => "base",
            Mode::MltOntology => "mlt_ontology",
            Mode::MltAttention => "mlt_attention",
        })
    }
}

impl FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.replace('-', "_").as_str() {
            "base" => Ok(Mode::Base),
            "mlt_ontology" => Ok(Mode::MltOntology),
            "mlt_attention" => Ok(Mode::MltAttention),
            _ => Err(CliError::usage("mode", format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub mode: Mode,

    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub source_embeddings: Option<PathBuf>,
    pub target_embeddings: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    /// A trained model: the source model for attention mining, or the model
    /// to evaluate.
    pub checkpoint: Option<PathBuf>,
    /// A ready-made pair file, bypassing pair construction.
    pub pairs: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Train a BASE model first when `mlt_attention` has no checkpoint.
    pub base_phase: bool,

    pub oov: OovPolicy,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub clip_norm: Option<f64>,
    pub lambda: f64,
    pub negatives: usize,
    pub unlabelled_negatives: usize,
    pub bilinear: bool,
    pub scoring: ScoringMode,
    pub threshold: f64,
    pub bio_mask: bool,
    /// Defaults to 90 for DST and 20 for NLU.
    pub n_pairs: Option<usize>,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::Nlu,
            mode: Mode::Base,
            train: None,
            dev: None,
            test: None,
            source_embeddings: None,
            target_embeddings: None,
            lexicon: None,
            ontology: None,
            checkpoint: None,
            pairs: None,
            out_dir: PathBuf::from("out"),
            base_phase: true,
            oov: OovPolicy::Zero,
            hidden_dim: 16,
            epochs: 20,
            lr: 0.05,
            optimizer: OptimizerKind::Sgd,
            momentum: 0.0,
            clip_norm: Some(5.0),
            lambda: 1.0,
            negatives: 3,
            unlabelled_negatives: 1,
            bilinear: true,
            scoring: ScoringMode::Binary,
            threshold: 0.5,
            bio_mask: false,
            n_pairs: None,
            min_count: DEFAULT_MIN_COUNT,
            seed: 0,
        }
    }
}

/// Every config key as an optional flag.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `dst` or `nlu`.
    #[arg(long)]
    pub task: Option<Task>,
    /// `base`, `mlt_ontology` or `mlt_attention`.
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Training data: dialogue JSON (dst) or block TSV (nlu).
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Held-out source-language data scored after training.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Evaluation data, same format as `--train`.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Source-language word2vec text file.
    #[arg(long, alias = "source_embeddings")]
    pub source_embeddings: Option<PathBuf>,
    /// Target-language vectors in the same space.
    #[arg(long, alias = "target_embeddings")]
    pub target_embeddings: Option<PathBuf>,
    /// Bilingual dictionary, one `source target` pair per line.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Slot/value ontology JSON (dst only).
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// Trained model to evaluate or mine attention from.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Pair TSV to use instead of building one.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Directory for every output file.
    #[arg(long, alias = "out_dir")]
    pub out_dir: Option<PathBuf>,
    /// Train a BASE model first when mlt_attention has no checkpoint.
    #[arg(long, alias = "base_phase")]
    pub base_phase: Option<bool>,
    /// `zero` or `mean` vector for unknown tokens.
    #[arg(long)]
    pub oov: Option<OovPolicy>,
    #[arg(long, alias = "hidden_dim")]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub optimizer: Option<OptimizerKind>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Global gradient norm limit; 0 disables clipping.
    #[arg(long, alias = "clip_norm")]
    pub clip_norm: Option<f64>,
    /// Weight of the intent loss (nlu).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Sampled negative values per gold slot value (dst).
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Sampled negatives per unlabelled slot (dst).
    #[arg(long, alias = "unlabelled_negatives")]
    pub unlabelled_negatives: Option<usize>,
    /// Add the bilinear match term to the DST head.
    #[arg(long)]
    pub bilinear: Option<bool>,
    /// `binary` or `slot_softmax` (dst).
    #[arg(long)]
    pub scoring: Option<ScoringMode>,
    /// Match probability needed to update a slot (dst).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Forbid ill-formed BIO transitions when decoding (nlu).
    #[arg(long, alias = "bio_mask")]
    pub bio_mask: Option<bool>,
    /// Keyword pairs to keep; 90 for dst and 20 for nlu by default.
    #[arg(long, alias = "n_pairs")]
    pub n_pairs: Option<usize>,
    /// Drop keywords selected fewer times than this.
    #[arg(long, alias = "min_count")]
    pub min_count: Option<usize>,
    /// Seed for initialisation, shuffling and sampling.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl ExperimentConfig {
    /// Parse a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::usage("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.train,
            &mut cfg.dev,
            &mut cfg.test,
            &mut cfg.source_embeddings,
            &mut cfg.target_embeddings,
            &mut cfg.lexicon,
            &mut cfg.ontology,
            &mut cfg.checkpoint,
            &mut cfg.pairs,
        ] {
            resolve(base, p);
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    /// Config file (if any) with flag overrides applied.
    pub fn from_args(args: &ConfigArgs) -> Result<Self, CliError> {
        let mut cfg = match &args.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply(args);
        Ok(cfg)
    }

    pub fn apply(&mut self, a: &ConfigArgs) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &a.$field {
                    self.$field = v.clone();
                }
            )*};
        }
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if let Some(v) = &a.$field {
                    self.$field = Some(v.clone());
                }
            )*};
        }
        set!(task, mode, out_dir, base_phase, oov, hidden_dim, epochs, lr, optimizer, momentum);
        set!(
            lambda,
            negatives,
            unlabelled_negatives,
            bilinear,
            scoring,
            threshold,
            bio_mask,
            min_count,
            seed
        );
        set_opt!(
            train,
            dev,
            test,
            source_embeddings,
            target_embeddings,
            lexicon,
            ontology,
            checkpoint,
            pairs,
            n_pairs
        );
        if let Some(c) = a.clip_norm {
            self.clip_norm = (c > 0.0).then_some(c);
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs.unwrap_or(match self.task {
            Task::Dst => DEFAULT_PAIRS_DST,
            Task::Nlu => DEFAULT_PAIRS_NLU,
        })
    }

    /// SHA-256 of the config with the output directory blanked, so the
    /// same experiment written to two places shares one digest.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The path stored under `field`, which must be set and exist.
    pub fn require<'a>(&self, field: &'static str, value: &'a Option<PathBuf>) -> Result<&'a Path, CliError> {
        let p = value
            .as_deref()
            .ok_or_else(|| CliError::usage(field, format!("`{field}` is required for this command")))?;
        if !p.exists() {
            return Err(CliError::usage(field, format!("{} does not exist", p.display())));
        }
        Ok(p)
    }

    /// An optional path must exist when given.
    pub fn check_optional(&self, field: &'static str, value: &Option<PathBuf>) -> Result<(), CliError> {
        match value {
            Some(p) if !p.exists() => Err(CliError::usage(field, format!("{} does not exist", p.display()))),
            _ => Ok(()),
        }
    }

    /// Hyperparameter sanity checks shared by every command.
    pub fn validate_numbers(&self) -> Result<(), CliError> {
        if self.hidden_dim == 0 {
            return Err(CliError::usage("hidden_dim", "must be positive"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(CliError::usage("lr", "must be a non-negative number"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(CliError::usage("momentum", "must lie in [0, 1)"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(CliError::usage("threshold", "must lie in (0, 1)"));
        }
        if self.min_count == 0 {
            return Err(CliError::usage("min_count", "must be at least 1"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(CliError::usage("lambda", "must be a non-negative number"));
        }
        Ok(())
    }

    pub fn nlu_train(&self) -> NluTrainConfig {
        NluTrainConfig {
            hidden_dim: self.hidden_dim,
            epochs: self.epochs,
            lr: self.lr,
            optimizer: self.optimizer,
            momentum: self.momentum,
            clip_norm: self.clip_norm,
            lambda: self.lambda,
            seed: self.seed,
        }
    }

    pub fn dst_train(&self) -> DstTrainConfig {
        DstTrainConfig {
            hidden_dim: self.hidden_dim,
            bilinear: self.bilinear,
            epochs: self.epochs,
            lr: self.lr,
            optimizer: self.optimizer,
            momentum: self.momentum,
            clip_norm: self.clip_norm,
            negatives: self.negatives,
            unlabelled_negatives: self.unlabelled_negatives,
            mode: self.scoring,
            seed: self.seed,
        }
    }

    pub fn track(&self) -> TrackConfig {
        TrackConfig {
            threshold: self.threshold,
            mode: self.scoring,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(
            &path,
            r#"{"task": "dst", "epochs": 3, "train": "data/train.json", "seed": 7}"#,
        )
        .unwrap();
        let args = ConfigArgs {
            config: Some(path),
            seed: Some(9),
            clip_norm: Some(0.0),
            ..Default::default()
        };
        let cfg = ExperimentConfig::from_args(&args).unwrap();
        assert_eq!(cfg.task, Task::Dst);
        assert_eq!(cfg.epochs, 3);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.clip_norm, None);
        assert_eq!(cfg.train.unwrap(), dir.path().join("data/train.json"));
        assert_eq!(cfg.n_pairs.unwrap_or(0), 0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        fs::write(&path, r#"{"epoch": 3}"#).unwrap();
        let err = ExperimentConfig::load(&path).unwrap_err();
        assert!(err.to_string().contains("epoch"), "{err}");
    }

    #[test]
    fn pair_defaults_follow_the_task() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.n_pairs(), 20);
        cfg.task = Task::Dst;
        assert_eq!(cfg.n_pairs(), 90);
    }

    #[test]
    fn digest_ignores_out_dir_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn modes_parse_both_spellings() {
        assert_eq!("mlt-attention".parse::<Mode>().unwrap(), Mode::MltAttention);
        assert_eq!("mlt_ontology".parse::<Mode>().unwrap(), Mode::MltOntology);
        assert!("mlt".parse::<Mode>().is_err());
    }
}
