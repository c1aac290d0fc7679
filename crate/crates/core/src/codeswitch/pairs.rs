use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered `(source, target)` word pairs with unique sources.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairDictionary {
    pairs: Vec<(String, String)>,
    index: HashMap<String, usize>,
}

impl PairDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<S: AsRef<str>, T: AsRef<str>>(pairs: impl IntoIterator<Item = (S, T)>) -> Result<Self> {
        let mut d = PairDictionary::new();
        for (s, t) in pairs {
            d.push(s.as_ref(), t.as_ref())?;
        }
        Ok(d)
    }

    /// Append a pair. Both sides must be single non-empty tokens and the
    /// source must be new.
    pub fn push(&mut self, source: &str, target: &str) -> Result<()> {
        for w in [source, target] {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::Data(format!("`{w}` is not a single token")));
            }
        }
        if self.index.contains_key(source) {
            return Err(Error::Data(format!("duplicate source word `{source}`")));
        }
        self.index.insert(source.to_string(), self.pairs.len());
        self.pairs.push((source.to_string(), target.to_string()));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(s, _)| s.as_str())
    }

    pub fn contains(&self, source: &str) -> bool {
        self.index.contains_key(source)
    }

    pub fn get(&self, source: &str) -> Option<&str> {
        self.index.get(source).map(|&i| self.pairs[i].1.as_str())
    }

    /// One `source<TAB>target` per line.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut d = PairDictionary::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(s), Some(t), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(i + 1, "expected `source<TAB>target`"));
            };
            d.push(s, t).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        Ok(d)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (s, t) in &self.pairs {
            writeln!(out, "{s}\t{t}")?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("tokens are UTF-8")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::read(BufReader::new(file)).map_err(|e| e.in_file(path))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::from(e).in_file(path))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NotInLexicon,
    MultiWordTarget(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub word: String,
    pub reason: SkipReason,
}

/// A pair dictionary plus the words that could not be paired.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairingOutcome {
    pub dictionary: PairDictionary,
    pub skipped: Vec<Skipped>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tsv_round_trip() {
        let d = PairDictionary::from_pairs([("cheap", "economico"), ("food", "cibo")]).unwrap();
        let text = d.to_tsv();
        assert_eq!(text, "cheap\teconomico\nfood\tcibo\n");
        assert_eq!(PairDictionary::parse_str(&text).unwrap(), d);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(
            PairDictionary::parse_str("a b\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            PairDictionary::parse_str("a\tb\na\tc\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(PairDictionary::parse_str("a\tb\tc\n").is_err());
        assert!(PairDictionary::parse_str("\tb\n").is_err());
    }
}
