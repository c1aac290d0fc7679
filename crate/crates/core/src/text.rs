//! Whitespace tokenisation shared by every data reader.

/// Lower-case, split on whitespace and strip surrounding punctuation.
/// Tokens that are pure punctuation are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| c.is_ascii_punctuation() && c != '\'')
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn lower(token: &str) -> String {
    token.to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_strips() {
        assert_eq!(
            tokenize("I want CHEAP food, please!"),
            ["i", "want", "cheap", "food", "please"]
        );
        assert_eq!(tokenize("  ?  "), Vec::<String>::new());
        assert_eq!(tokenize("don't"), ["don't"]);
    }
}
