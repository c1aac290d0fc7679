use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// What [`EmbeddingTable::lookup`] returns for an unknown token.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OovPolicy {
    #[default]
    Zero,
    MeanOfVocab,
}

impl FromStr for OovPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(OovPolicy::Zero),
            "mean" | "mean-of-vocab" => Ok(OovPolicy::MeanOfVocab),
            other => Err(Error::Config(format!("unknown OOV policy `{other}`"))),
        }
    }
}

/// Token → vector map in a shared cross-lingual space. Immutable after load.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    vectors: Vec<f64>,
    index: HashMap<String, usize>,
    oov_policy: OovPolicy,
    oov_vector: Vec<f64>,
    duplicates: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            words: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
            oov_policy: OovPolicy::Zero,
            oov_vector: vec![0.0; dim],
            duplicates: 0,
        })
    }

    /// Build from `(token, vector)` pairs; duplicate tokens keep their first vector.
    pub fn from_entries<S: AsRef<str>>(dim: usize, entries: impl IntoIterator<Item = (S, Vec<f64>)>) -> Result<Self> {
        let mut table = EmbeddingTable::new(dim)?;
        for (word, vector) in entries {
            table.insert(word.as_ref(), vector)?;
        }
        Ok(table)
    }

    /// Add a vector. Returns `false` (and counts a duplicate) if the token already exists.
    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::dim("embedding", &[self.dim], &[vector.len()]));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector for `{token}`")));
        }
        let token = token.to_lowercase();
        if token.is_empty() {
            return Err(Error::Data("empty token".into()));
        }
        if self.index.contains_key(&token) {
            self.duplicates += 1;
            return Ok(false);
        }
        self.index.insert(token.clone(), self.words.len());
        self.words.push(token);
        self.vectors.extend_from_slice(&vector);
        if self.oov_policy == OovPolicy::MeanOfVocab {
            self.refresh_oov();
        }
        Ok(true)
    }

    pub fn with_oov_policy(mut self, policy: OovPolicy) -> Self {
        self.oov_policy = policy;
        self.refresh_oov();
        self
    }

    fn refresh_oov(&mut self) {
        self.oov_vector = vec![0.0; self.dim];
        if self.oov_policy == OovPolicy::MeanOfVocab && !self.words.is_empty() {
            for row in self.vectors.chunks_exact(self.dim) {
                for (o, v) in self.oov_vector.iter_mut().zip(row) {
                    *o += v;
                }
            }
            let n = self.words.len() as f64;
            for o in &mut self.oov_vector {
                *o /= n;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov_policy
    }

    /// Duplicate tokens skipped while loading.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(&token.to_lowercase())
    }

    /// Stored vector for `token`, if any.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        let i = *self
            .index
            .get(token)
            .or_else(|| self.index.get(&token.to_lowercase()))?;
        Some(&self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Stored vector, or the OOV vector. Never fails.
    pub fn lookup_slice(&self, token: &str) -> &[f64] {
        self.get(token).unwrap_or(&self.oov_vector)
    }

    pub fn lookup(&self, token: &str) -> Tensor {
        Tensor::vector(self.lookup_slice(token).to_vec())
    }

    /// Union of two tables in the same space; `self` wins on shared tokens.
    pub fn merged(&self, other: &EmbeddingTable) -> Result<EmbeddingTable> {
        if other.dim != self.dim {
            return Err(Error::dim("merge embeddings", &[self.dim], &[other.dim]));
        }
        let mut out = self.clone();
        for w in &other.words {
            if !out.index.contains_key(w) {
                out.insert(w, other.get(w).expect("own word").to_vec())?;
            }
        }
        out.duplicates = self.duplicates;
        out.refresh_oov();
        Ok(out)
    }

    /// Parse word2vec text: optional `count dim` header, then `token v1 … vd` per line.
    pub fn read<R: BufRead>(reader: R, expected_dim: Option<usize>) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        let mut header_count = None;
        let mut saw_line = false;

        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let line = line.trim_end_matches('\r');
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let rest: Vec<&str> = fields.collect();

            if !saw_line {
                saw_line = true;
                if rest.len() == 1 {
                    if let (Ok(count), Ok(dim)) = (token.parse::<usize>(), rest[0].parse::<usize>()) {
                        if dim == 0 {
                            return Err(Error::parse(lineno, "header declares dimension 0"));
                        }
                        if let Some(e) = expected_dim {
                            if e != dim {
                                return Err(Error::parse(lineno, format!("header dimension {dim}, expected {e}")));
                            }
                        }
                        header_count = Some(count);
                        table = Some(EmbeddingTable::new(dim)?);
                        continue;
                    }
                }
            }

            let mut vector = Vec::with_capacity(rest.len());
            for f in &rest {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(lineno, format!("`{f}` is not a number")))?;
                if !v.is_finite() {
                    return Err(Error::parse(lineno, format!("non-finite component `{f}`")));
                }
                vector.push(v);
            }
            if vector.is_empty() {
                return Err(Error::parse(lineno, format!("token `{token}` has no vector")));
            }
            let t = match &mut table {
                Some(t) => t,
                None => {
                    if let Some(e) = expected_dim {
                        if e != vector.len() {
                            return Err(Error::parse(
                                lineno,
                                format!("vector length {}, expected {e}", vector.len()),
                            ));
                        }
                    }
                    table.insert(EmbeddingTable::new(vector.len())?)
                }
            };
            if vector.len() != t.dim {
                return Err(Error::parse(
                    lineno,
                    format!("vector length {}, expected {}", vector.len(), t.dim),
                ));
            }
            t.insert(token, vector)?;
        }

        let table = table.ok_or_else(|| Error::parse(0, "empty embedding file"))?;
        if table.is_empty() {
            return Err(Error::parse(0, "embedding file has a header but no vectors"));
        }
        if table.duplicates > 0 {
            log::warn!("{} duplicate embedding tokens ignored", table.duplicates);
        }
        if let Some(count) = header_count {
            if count != table.len() + table.duplicates {
                log::warn!(
                    "header declares {count} vectors, read {}",
                    table.len() + table.duplicates
                );
            }
        }
        Ok(table)
    }

    pub fn parse_str(text: &str, expected_dim: Option<usize>) -> Result<Self> {
        Self::read(text.as_bytes(), expected_dim)
    }

    pub fn load(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::read(BufReader::new(file), expected_dim).map_err(|e| e.in_file(path))
    }

    /// Write in word2vec text format with a header. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {}", self.len(), self.dim)?;
        for (i, w) in self.words.iter().enumerate() {
            write!(out, "{w}")?;
            for v in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_with_header() {
        let t = EmbeddingTable::parse_str("2 3\na 1 0 0\nb 0 1 0", None).unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("b").unwrap(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn reads_without_header() {
        let t = EmbeddingTable::parse_str("Food 0.5 -1\ncheap 2 3\n", Some(2)).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup("FOOD").data(), &[0.5, -1.0]);
    }

    #[test]
    fn duplicate_keeps_first() {
        let t = EmbeddingTable::parse_str("a 1 2\nb 3 4\na 5 6\n", None).unwrap();
        assert_eq!(t.get("a").unwrap(), &[1.0, 2.0]);
        assert_eq!(t.duplicates(), 1);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn inconsistent_length_names_the_line() {
        let err = EmbeddingTable::parse_str("a 1 2\nb 3 4\nc 5\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = EmbeddingTable::parse_str("2 3\na 1 0 0\nb 0 1\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = EmbeddingTable::parse_str("a 1 x\n", None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn empty_and_dimension_errors() {
        assert!(EmbeddingTable::parse_str("", None).is_err());
        assert!(EmbeddingTable::parse_str("\n\n", None).is_err());
        assert!(EmbeddingTable::parse_str("1 2\n", None).is_err());
        assert!(EmbeddingTable::parse_str("a 1 2\n", Some(3)).is_err());
        assert!(EmbeddingTable::parse_str("a nan 2\n", None).is_err());
    }

    #[test]
    fn oov_policies() {
        let t = EmbeddingTable::parse_str("a 1 2\nb 3 -4\nc 0.5 0.25\n", None).unwrap();
        assert_eq!(t.lookup("zzz").data(), &[0.0, 0.0]);

        let t = t.with_oov_policy(OovPolicy::MeanOfVocab);
        let rows = [[1.0, 2.0], [3.0, -4.0], [0.5, 0.25]];
        let mut mean = [0.0; 2];
        for r in rows {
            mean[0] += r[0] / 3.0;
            mean[1] += r[1] / 3.0;
        }
        let got = t.lookup("zzz");
        for (g, m) in got.data().iter().zip(mean) {
            assert!((g - m).abs() < 1e-12);
        }
        // lookups are pure
        assert_eq!(t.lookup("a"), t.lookup("a"));
        assert_eq!(t.lookup("zzz"), got);
    }

    #[test]
    fn merged_prefers_self() {
        let a = EmbeddingTable::parse_str("x 1 1\ny 2 2\n", None).unwrap();
        let b = EmbeddingTable::parse_str("y 9 9\nz 3 3\n", None).unwrap();
        let m = a.merged(&b).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m.get("y").unwrap(), &[2.0, 2.0]);
        assert_eq!(m.get("z").unwrap(), &[3.0, 3.0]);
        let c = EmbeddingTable::parse_str("q 1\n", None).unwrap();
        assert!(a.merged(&c).is_err());
    }
}
