use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-token attention weights of one utterance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub utterance_id: String,
    pub tokens: Vec<String>,
    pub scores: Vec<f64>,
}

impl AttentionRecord {
    /// Equal lengths, non-negative scores summing to 1 within 1e-6.
    pub fn validate(&self) -> Result<()> {
        if self.tokens.len() != self.scores.len() {
            return Err(Error::Data(format!(
                "`{}`: {} tokens but {} scores",
                self.utterance_id,
                self.tokens.len(),
                self.scores.len()
            )));
        }
        if self.scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Data(format!(
                "`{}`: negative or non-finite score",
                self.utterance_id
            )));
        }
        let total: f64 = self.scores.iter().sum();
        if !self.tokens.is_empty() && (total - 1.0).abs() > 1e-6 {
            return Err(Error::Data(format!("`{}`: scores sum to {total}", self.utterance_id)));
        }
        Ok(())
    }
}

/// One JSON object per line.
pub fn read_attention_dump<R: BufRead>(reader: R) -> Result<Vec<AttentionRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AttentionRecord = serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        rec.validate().map_err(|e| Error::parse(i + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_attention_dump<W: Write>(records: &[AttentionRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
