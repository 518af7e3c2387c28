//! Wiki/HTML cleanup rules.
//!
//! Rules are applied in order and the whole pass is repeated until the text
//! stops changing, so cleaning is idempotent. Every rule either shortens the
//! text or is a same-length normalization that is stable on its own output.

use std::sync::OnceLock;

use regex::Regex;

struct Rule {
    re: Regex,
    replacement: &'static str,
}

fn rules() -> &'static [Rule] {
    static RULES: OnceLock<Vec<Rule>> = OnceLock::new();
    RULES.get_or_init(|| {
        let table: &[(&str, &str)] = &[
            // references and comments, including their content
            (r"(?is)<ref[^>]*/>", " "),
            (r"(?is)<ref[^>]*>.*?</ref\s*>", " "),
            (r"(?s)<!--.*?-->", " "),
            // tables and templates
            (r"(?s)\{\|.*?\|\}", " "),
            (r"\{\{[^{}]*\}\}", " "),
            // section headings become a title prefix
            (r"(?m)^[ \t]*=+[ \t]*([^=\n]*?)[ \t]*=+[ \t]*$", "${1}:"),
            (r"(?i)\[\[(?:file|image|category):[^\[\]]*\]\]", " "),
            (r"\[\[(?:[^\[\]|]*\|)?([^\[\]|]*)\]\]", "${1}"),
            (r"(?i)\[(?:https?|ftp)://[^\s\]]+\s+([^\]]*)\]", "${1}"),
            (r"(?i)\[(?:https?|ftp)://[^\s\]]*\]", " "),
            (r"</?[A-Za-z][^<>]*>", " "),
            (r"(?i)\b(?:https?|ftp)://[^\s<>\]]*", " "),
            (r"(?i)\bwww\.[^\s<>\]]+", " "),
            // footnote markers: [1], [a], [citation needed], [note 3]
            (r"(?i)\[(?:\d+|[a-z]|citation needed|note \d+)\]", ""),
            (r"'{2,}", ""),
            (r"&nbsp;", " "),
            (r"&quot;", "\""),
            (r"&(?:#39|apos);", "'"),
            (r"&lt;", "<"),
            (r"&gt;", ">"),
            (r"&ndash;", "\u{2013}"),
            (r"&mdash;", "\u{2014}"),
            (r"&amp;", "&"),
            (r"\(\s*[,;]?\s*\)", ""),
            (r"\s+", " "),
            (r" ([.,;:!?])", "${1}"),
        ];
        table
            .iter()
            .map(|(pat, replacement)| Rule {
                re: Regex::new(pat).expect("static regex"),
                replacement,
            })
            .collect()
    })
}

/// Removes heading lines entirely.
pub(crate) fn strip_headings(text: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^[ \t]*=+[^=\n]*=+[ \t]*$").expect("static regex"))
        .replace_all(text, " ")
        .into_owned()
}

fn one_pass(text: &str) -> String {
    let mut s = text.to_string();
    for rule in rules() {
        if rule.re.is_match(&s) {
            s = rule.re.replace_all(&s, rule.replacement).into_owned();
        }
    }
    s.trim().to_string()
}

/// Strips markup, URLs and reference markers and collapses whitespace.
pub fn clean_text(text: &str) -> String {
    let mut current = one_pass(text);
    // Each pass is length non-increasing, so this settles quickly.
    for _ in 0..64 {
        let next = one_pass(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_text_is_untouched() {
        assert_eq!(clean_text("Plain text."), "Plain text.");
    }

    #[test]
    fn tags_and_urls_removed() {
        assert_eq!(clean_text("<b>Bold</b> see https://x.y"), "Bold see");
        assert_eq!(clean_text("visit www.example.org today"), "visit today");
    }

    #[test]
    fn wiki_markup() {
        assert_eq!(
            clean_text("The [[Sun|sun]] is a '''star'''.<ref>Smith 2001</ref>[3]"),
            "The sun is a star."
        );
        assert_eq!(
            clean_text("Text {{cite web|url=x}} more [[Category:Stars]]"),
            "Text more"
        );
        assert_eq!(
            clean_text("See [https://nasa.gov NASA site] for data."),
            "See NASA site for data."
        );
        assert_eq!(clean_text("A{|\n| cell || cell\n|}B"), "A B");
    }

    #[test]
    fn heading_becomes_prefix() {
        assert_eq!(
            clean_text("== Early life ==\nBorn in   1901.\n\n"),
            "Early life: Born in 1901."
        );
    }

    #[test]
    fn entities_decoded() {
        assert_eq!(clean_text("Fish &amp; chips&nbsp;now"), "Fish & chips now");
        assert_eq!(clean_text("&lt;b&gt;x&lt;/b&gt;"), "x");
    }

    proptest! {
        #[test]
        fn idempotent(s in "[a-z <>/\\[\\]{}|=':.&;#0-9\n]{0,60}") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once);
        }

        #[test]
        fn idempotent_on_realistic_markup(
            words in proptest::collection::vec("[A-Za-z]{1,8}", 1..8),
            markup in proptest::collection::vec(prop_oneof![
                Just("<b>"), Just("</b>"), Just("[1]"), Just("http://a.b/c"),
                Just("[[x|y]]"), Just("{{t}}"), Just("&amp;"), Just("''"), Just("\n== H ==\n"),
            ], 0..8),
        ) {
            let mut s = String::new();
            for (i, w) in words.iter().enumerate() {
                s.push_str(w);
                s.push(' ');
                if let Some(m) = markup.get(i) {
                    s.push_str(m);
                }
            }
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once.clone());
            prop_assert!(!once.contains("http://"));
            prop_assert!(!once.contains("<b>"));
        }
    }
}
