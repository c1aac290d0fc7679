use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Word-to-word translation dictionary. Each source token maps to its
/// targets in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BilingualLexicon {
    sources: Vec<String>,
    targets: HashMap<String, Vec<String>>,
}

impl BilingualLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: &str, target: &str) -> Result<()> {
        let (source, target) = (source.trim().to_lowercase(), target.trim().to_lowercase());
        if source.is_empty() || target.is_empty() {
            return Err(Error::Data("lexicon entries cannot be empty".into()));
        }
        match self.targets.get_mut(&source) {
            Some(list) => {
                if !list.contains(&target) {
                    list.push(target);
                }
            }
            None => {
                self.sources.push(source.clone());
                self.targets.insert(source, vec![target]);
            }
        }
        Ok(())
    }

    /// Number of distinct source tokens.
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn targets(&self, source: &str) -> Option<&[String]> {
        self.targets.get(source).map(Vec::as_slice)
    }

    pub fn first_target(&self, source: &str) -> Option<&str> {
        self.targets(source).and_then(|t| t.first()).map(String::as_str)
    }

    /// Source tokens in first-seen order.
    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    /// One `source target` pair per line; blank and `#` lines are skipped.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lex = BilingualLexicon::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::parse(
                    i + 1,
                    format!("expected `source target`, found {} fields", fields.len()),
                ));
            }
            lex.insert(fields[0], fields[1])?;
        }
        Ok(lex)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::read(BufReader::new(file)).map_err(|e| e.in_file(path))
    }
}
