//! Self-describing JSON checkpoints for both tasks.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dst::{DstCheckpoint, DstModel};
use crate::error::{Error, Result};
use crate::nlu::{NluCheckpoint, NluModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Dst,
    Nlu,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Dst => "dst",
            Task::Nlu => "nlu",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dst" => Ok(Task::Dst),
            "nlu" => Ok(Task::Nlu),
            other => Err(Error::Config(format!("unknown task `{other}` (expected dst or nlu)"))),
        }
    }
}

/// A trained model of either task, tagged with `"task"` on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum Checkpoint {
    Dst(DstCheckpoint),
    Nlu(NluCheckpoint),
}

impl Checkpoint {
    pub fn task(&self) -> Task {
        match self {
            Checkpoint::Dst(_) => Task::Dst,
            Checkpoint::Nlu(_) => Task::Nlu,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::from(e).in_file(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }

    /// Fails unless the checkpoint holds a model of `task`.
    pub fn expect(&self, task: Task) -> Result<&Self> {
        if self.task() != task {
            return Err(Error::Config(format!(
                "checkpoint is a {} model, expected {task}",
                self.task()
            )));
        }
        Ok(self)
    }

    pub fn dst_model(&self) -> Result<DstModel> {
        match self.expect(Task::Dst)? {
            Checkpoint::Dst(c) => DstModel::from_checkpoint(c),
            Checkpoint::Nlu(_) => unreachable!(),
        }
    }

    pub fn nlu_model(&self) -> Result<NluModel> {
        match self.expect(Task::Nlu)? {
            Checkpoint::Nlu(c) => NluModel::from_checkpoint(c),
            Checkpoint::Dst(_) => unreachable!(),
        }
    }

    /// Embedding dimension the model was trained with.
    pub fn embed_dim(&self) -> usize {
        match self {
            Checkpoint::Dst(c) => c.dims.embed_dim,
            Checkpoint::Nlu(c) => c.dims.embed_dim,
        }
    }
}

impl From<&DstModel> for Checkpoint {
    fn from(m: &DstModel) -> Self {
        Checkpoint::Dst(m.to_checkpoint())
    }
}

impl From<&NluModel> for Checkpoint {
    fn from(m: &NluModel) -> Self {
        Checkpoint::Nlu(m.to_checkpoint())
    }
}
