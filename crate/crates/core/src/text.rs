//! Tokenization shared by text embeddings and property matching.

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// True when `needle` occurs as a contiguous token run inside `haystack`.
pub fn contains_phrase(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_lowercases() {
        assert_eq!(tokenize("Screen-Size: 55\"  TV"), vec!["screen", "size", "55", "tv"]);
        assert!(tokenize("  --  ").is_empty());
    }

    #[test]
    fn phrase_match_is_token_level() {
        let hay = tokenize("big screen size tv");
        assert!(contains_phrase(&hay, &tokenize("screen size")));
        assert!(!contains_phrase(&hay, &tokenize("size screen")));
        assert!(!contains_phrase(&tokenize("widescreen"), &tokenize("screen")));
    }
}
