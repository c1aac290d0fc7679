use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::codeswitch::{generate_cs, PairDictionary};
use crate::error::{Error, Result};

/// One utterance with BIO slot tags and an intent label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NluExample {
    pub tokens: Vec<String>,
    pub tags: Vec<String>,
    pub intent: String,
}

impl NluExample {
    pub fn new(tokens: Vec<String>, tags: Vec<String>, intent: impl Into<String>) -> Result<Self> {
        let ex = NluExample {
            tokens,
            tags,
            intent: intent.into(),
        };
        ex.validate()?;
        Ok(ex)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::Data("example has no tokens".into()));
        }
        if self.tokens.len() != self.tags.len() {
            return Err(Error::Data(format!(
                "{} tokens but {} tags in `{}`",
                self.tokens.len(),
                self.tags.len(),
                self.tokens.join(" ")
            )));
        }
        if let Some(bad) = self.tags.iter().find(|t| !is_bio_tag(t)) {
            return Err(Error::Data(format!("`{bad}` is not a BIO tag")));
        }
        Ok(())
    }

    /// Positions where an `I-x` tag does not continue an `x` chunk.
    pub fn bio_violations(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, tag) in self.tags.iter().enumerate() {
            if let Some(label) = tag.strip_prefix("I-") {
                let ok = i > 0 && {
                    let prev = &self.tags[i - 1];
                    prev.strip_prefix("B-") == Some(label) || prev.strip_prefix("I-") == Some(label)
                };
                if !ok {
                    out.push(i);
                }
            }
        }
        out
    }

    /// Code-switched copy. Tags and intent are untouched.
    pub fn code_switched(&self, dict: &PairDictionary) -> NluExample {
        NluExample {
            tokens: generate_cs(&self.tokens, dict),
            tags: self.tags.clone(),
            intent: self.intent.clone(),
        }
    }
}

pub fn is_bio_tag(tag: &str) -> bool {
    tag == "O"
        || tag
            .strip_prefix("B-")
            .or_else(|| tag.strip_prefix("I-"))
            .is_some_and(|l| !l.is_empty())
}

/// Tag and intent inventories, sorted, with `O` always first among tags.
pub fn label_sets(examples: &[NluExample]) -> (Vec<String>, Vec<String>) {
    let mut tags: BTreeSet<&str> = examples
        .iter()
        .flat_map(|e| e.tags.iter().map(String::as_str))
        .collect();
    tags.remove("O");
    let mut tag_list = vec!["O".to_string()];
    tag_list.extend(tags.into_iter().map(String::from));
    let intents: BTreeSet<&str> = examples.iter().map(|e| e.intent.as_str()).collect();
    (tag_list, intents.into_iter().map(String::from).collect())
}

/// Parse the block TSV format: `#intent=<label>`, then one `token<TAB>tag`
/// per line, blank line between utterances. Tokens are lower-cased.
pub fn read_nlu<R: BufRead>(reader: R) -> Result<Vec<NluExample>> {
    let mut out = Vec::new();
    let mut intent: Option<String> = None;
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    let mut block_start = 0;

    let mut flush =
        |intent: &mut Option<String>, tokens: &mut Vec<String>, tags: &mut Vec<String>, start: usize| -> Result<()> {
            if intent.is_none() && tokens.is_empty() {
                return Ok(());
            }
            let label = intent
                .take()
                .ok_or_else(|| Error::parse(start, "block has no `#intent=` header"))?;
            if tokens.is_empty() {
                return Err(Error::parse(start, "block has no tokens"));
            }
            let ex = NluExample::new(std::mem::take(tokens), std::mem::take(tags), label)
                .map_err(|e| Error::parse(start, e.to_string()))?;
            let bad = ex.bio_violations();
            if !bad.is_empty() {
                log::warn!("line {start}: I- tag without a matching B- at positions {bad:?}");
            }
            out.push(ex);
            Ok(())
        };

    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut intent, &mut tokens, &mut tags, block_start)?;
            continue;
        }
        if intent.is_none() && tokens.is_empty() {
            block_start = lineno;
        }
        if let Some(label) = line.strip_prefix("#intent=") {
            if intent.is_some() || !tokens.is_empty() {
                return Err(Error::parse(lineno, "intent header must open a block"));
            }
            let label = label.trim();
            if label.is_empty() {
                return Err(Error::parse(lineno, "empty intent label"));
            }
            intent = Some(label.to_string());
            continue;
        }
        let (token, tag) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(lineno, "expected `token<TAB>tag`"))?;
        let (token, tag) = (token.trim(), tag.trim());
        if token.is_empty() || tag.contains('\t') {
            return Err(Error::parse(lineno, "expected `token<TAB>tag`"));
        }
        if !is_bio_tag(tag) {
            return Err(Error::parse(lineno, format!("`{tag}` is not a BIO tag")));
        }
        tokens.push(token.to_lowercase());
        tags.push(tag.to_string());
    }
    flush(&mut intent, &mut tokens, &mut tags, block_start)?;
    Ok(out)
}

pub fn parse_nlu(text: &str) -> Result<Vec<NluExample>> {
    read_nlu(text.as_bytes())
}

pub fn load_nlu(path: impl AsRef<Path>) -> Result<Vec<NluExample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_nlu(BufReader::new(file)).map_err(|e| e.in_file(path))
}

pub fn write_nlu<W: Write>(examples: &[NluExample], mut out: W) -> Result<()> {
    for (i, ex) in examples.iter().enumerate() {
        if i > 0 {
            writeln!(out)?;
        }
        writeln!(out, "#intent={}", ex.intent)?;
        for (tok, tag) in ex.tokens.iter().zip(&ex.tags) {
            writeln!(out, "{tok}\t{tag}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "#intent=set_alarm\nSet\tO\nalarm\tO\nfor\tO\n7\tB-time\nam\tI-time\n\n#intent=weather\nrain\tB-weather_attribute\n";

    #[test]
    fn reads_blocks() {
        let exs = parse_nlu(SAMPLE).unwrap();
        assert_eq!(exs.len(), 2);
        assert_eq!(exs[0].tokens, ["set", "alarm", "for", "7", "am"]);
        assert_eq!(exs[0].tags[3], "B-time");
        assert_eq!(exs[1].intent, "weather");
    }

    #[test]
    fn round_trip() {
        let exs = parse_nlu(SAMPLE).unwrap();
        let mut buf = Vec::new();
        write_nlu(&exs, &mut buf).unwrap();
        assert_eq!(parse_nlu(std::str::from_utf8(&buf).unwrap()).unwrap(), exs);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_nlu("#intent=a\nword\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_nlu("word\tO\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_nlu("#intent=a\nword\tX-y\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_nlu("#intent=a\n\n").is_err());
    }

    #[test]
    fn orphan_inside_tags_are_accepted() {
        let exs = parse_nlu("#intent=a\nx\tI-time\ny\tO\n").unwrap();
        assert_eq!(exs[0].bio_violations(), [0]);
    }

    #[test]
    fn length_mismatch_names_example() {
        let err = NluExample::new(vec!["a".into(), "b".into()], vec!["O".into()], "x").unwrap_err();
        assert!(err.to_string().contains("a b"), "{err}");
    }

    #[test]
    fn code_switch_keeps_labels() {
        let ex = parse_nlu(SAMPLE).unwrap().remove(0);
        let d = PairDictionary::from_pairs([("alarm", "alarma")]).unwrap();
        let cs = ex.code_switched(&d);
        assert_eq!(cs.tokens[1], "alarma");
        assert_eq!(cs.tags, ex.tags);
        assert_eq!(cs.intent, ex.intent);
    }

    #[test]
    fn labels_put_outside_first() {
        let (tags, intents) = label_sets(&parse_nlu(SAMPLE).unwrap());
        assert_eq!(tags, ["O", "B-time", "B-weather_attribute", "I-time"]);
        assert_eq!(intents, ["set_alarm", "weather"]);
    }
}
