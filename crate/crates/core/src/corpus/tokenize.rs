use std::sync::OnceLock;

use regex::Regex;

/// Splits text into tokens for counting and block construction.
pub trait Tokenizer: Send + Sync {
    /// Stable name recorded alongside token counts.
    fn id(&self) -> &str;

    fn tokenize(&self, text: &str) -> Vec<String>;

    /// Inverse of [`Tokenizer::tokenize`] up to normalization.
    fn detokenize(&self, tokens: &[String]) -> String {
        tokens.join(" ")
    }
}

/// Default tokenizer: runs of word characters, and every other
/// non-whitespace character as a token of its own.
///
/// Detokenization joins tokens with single spaces, so
/// `detokenize(tokenize(s))` is `s` with whitespace collapsed and a space
/// inserted at every word/punctuation boundary. Re-tokenizing that string
/// yields the same tokens.
#[derive(Debug, Default, Clone, Copy)]
pub struct WordPunctTokenizer;

fn word_punct_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\w+|[^\w\s]").expect("static regex"))
}

impl Tokenizer for WordPunctTokenizer {
    fn id(&self) -> &str {
        "word-punct-v1"
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        word_punct_re()
            .find_iter(text)
            .map(|m| m.as_str().to_string())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_and_simple() {
        let t = WordPunctTokenizer;
        assert!(t.tokenize("").is_empty());
        assert_eq!(t.tokenize("a b"), vec!["a", "b"]);
        assert_eq!(t.tokenize("Hi, there!"), vec!["Hi", ",", "there", "!"]);
    }

    proptest! {
        #[test]
        fn deterministic_and_stable_under_detokenize(s in "\\PC{0,80}") {
            let t = WordPunctTokenizer;
            let a = t.tokenize(&s);
            prop_assert_eq!(&a, &t.tokenize(&s));
            let normalized = t.detokenize(&a);
            prop_assert_eq!(t.tokenize(&normalized), a);
        }
    }
}
