//! Keyword mining from model attention, and code-switched sentence generation.
//!
//! The pipeline is: dump per-token attention of a trained source-language
//! model ([`AttentionRecord`]), count the top-1 token of every utterance
//! ([`collect_top1`]), keep the most frequent ones ([`select_keywords`]), pair
//! them with translations ([`build_pairs`]) and rewrite training sentences
//! ([`generate_cs`]).

mod attention;
mod pairs;

pub use attention::{read_attention_dump, write_attention_dump, AttentionRecord};
pub use pairs::{PairDictionary, PairingOutcome, SkipReason, Skipped};

use std::collections::{BTreeMap, HashSet};

use crate::embeddings::BilingualLexicon;

/// Default number of word pairs for dialogue state tracking.
pub const DEFAULT_PAIRS_DST: usize = 90;
/// Default number of word pairs for intent detection and slot filling.
pub const DEFAULT_PAIRS_NLU: usize = 20;
/// Tokens selected fewer times than this are dropped as noise.
pub const DEFAULT_MIN_COUNT: usize = 2;

/// English function words that are never counted as keywords.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "any", "are", "as", "at", "be", "but", "by", "can", "could", "do", "does", "for",
    "from", "have", "how", "i", "i'd", "i'm", "if", "in", "is", "it", "it's", "me", "my", "of", "on", "or", "please",
    "so", "that", "the", "there", "this", "to", "want", "was", "what", "will", "with", "would", "you", "yes", "no",
    "okay", "ok", "thank", "thanks", "um", "uh", "like", "need", "looking", "some", "get", "up",
];

pub fn default_stopwords() -> HashSet<String> {
    STOPWORDS.iter().map(|s| s.to_string()).collect()
}

/// Top-1 attention counts over a set of utterances.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Top1Counts {
    pub counts: BTreeMap<String, usize>,
    /// Records skipped because they had no tokens or inconsistent scores.
    pub skipped: usize,
    /// Utterances whose top token was a stopword.
    pub stopword_hits: usize,
}

/// For every utterance, count the token with the highest attention score
/// (lowest index on ties) unless it is a stopword.
pub fn collect_top1(records: &[AttentionRecord], stopwords: &HashSet<String>) -> Top1Counts {
    let mut out = Top1Counts::default();
    for r in records {
        if r.tokens.is_empty() || r.tokens.len() != r.scores.len() {
            log::warn!("skipping attention record `{}`", r.utterance_id);
            out.skipped += 1;
            continue;
        }
        let best = crate::numeric::argmax(&r.scores);
        let token = &r.tokens[best];
        if stopwords.contains(token) {
            out.stopword_hits += 1;
            continue;
        }
        *out.counts.entry(token.clone()).or_insert(0) += 1;
    }
    out
}

/// Drop tokens counted fewer than `min_count` times, order by count
/// (descending) then token (ascending), and keep the first `n`.
pub fn select_keywords(counts: &BTreeMap<String, usize>, n: usize, min_count: usize) -> Vec<String> {
    let mut kept: Vec<(&String, usize)> = counts
        .iter()
        .filter(|(_, &c)| c >= min_count.max(1))
        .map(|(t, &c)| (t, c))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    kept.into_iter().take(n).map(|(t, _)| t.clone()).collect()
}

fn pair_with_lexicon<'a>(words: impl Iterator<Item = &'a str>, lexicon: &BilingualLexicon) -> PairingOutcome {
    let mut outcome = PairingOutcome::default();
    for word in words {
        if outcome.dictionary.contains(word) || outcome.skipped.iter().any(|s| s.word == word) {
            continue;
        }
        match lexicon.first_target(word) {
            None => outcome.skipped.push(Skipped {
                word: word.to_string(),
                reason: SkipReason::NotInLexicon,
            }),
            Some(t) if t.split_whitespace().count() != 1 => outcome.skipped.push(Skipped {
                word: word.to_string(),
                reason: SkipReason::MultiWordTarget(t.to_string()),
            }),
            Some(t) => {
                outcome
                    .dictionary
                    .push(word, t)
                    .expect("sources are deduplicated above");
            }
        }
    }
    outcome
}

/// Pair each keyword with its first lexicon translation, preserving keyword
/// order. Keywords without a usable translation are reported, not fatal.
pub fn build_pairs(keywords: &[String], lexicon: &BilingualLexicon) -> PairingOutcome {
    pair_with_lexicon(keywords.iter().map(String::as_str), lexicon)
}

/// Pair every distinct whitespace token of the ontology's slot names and
/// values that the lexicon covers, in ontology order.
pub fn ontology_pairs<S: AsRef<str>>(terms: &[S], lexicon: &BilingualLexicon) -> PairingOutcome {
    let lowered: Vec<String> = terms.iter().map(|t| t.as_ref().to_lowercase()).collect();
    let tokens = lowered.iter().flat_map(|t| t.split_whitespace());
    pair_with_lexicon(tokens, lexicon)
}

/// Replace every occurrence of every source word in `dict` by its target.
/// One word in, one word out.
pub fn generate_cs<S: AsRef<str>>(sentence: &[S], dict: &PairDictionary) -> Vec<String> {
    sentence
        .iter()
        .map(|w| {
            let w = w.as_ref();
            dict.get(w).unwrap_or(w).to_string()
        })
        .collect()
}
