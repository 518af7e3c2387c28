//! Knowledge-base ingestion: raw articles in, cleaned and filtered chunks out.

mod clean;
mod tokenize;

use std::collections::HashMap;
use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use clean::clean_text;

pub use tokenize::{Tokenizer, WordPunctTokenizer};

use crate::{Error, Result};

/// Default threshold for dropping small chunks.
pub const DEFAULT_MIN_TOKENS: usize = 64;

/// Evaluation task a chunk or question belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topic {
    Anatomy,
    Astronomy,
    CollegeBiology,
    CollegeChemistry,
    Prehistory,
    CurrentEvents,
}

impl Topic {
    pub const ALL: [Topic; 6] = [
        Topic::Anatomy,
        Topic::Astronomy,
        Topic::CollegeBiology,
        Topic::CollegeChemistry,
        Topic::Prehistory,
        Topic::CurrentEvents,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Topic::Anatomy => "anatomy",
            Topic::Astronomy => "astronomy",
            Topic::CollegeBiology => "college-biology",
            Topic::CollegeChemistry => "college-chemistry",
            Topic::Prehistory => "prehistory",
            Topic::CurrentEvents => "current-events",
        }
    }

    /// Human-readable name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Topic::Anatomy => "Anatomy",
            Topic::Astronomy => "Astronomy",
            Topic::CollegeBiology => "College biology",
            Topic::CollegeChemistry => "College chemistry",
            Topic::Prehistory => "Prehistory",
            Topic::CurrentEvents => "Current events",
        }
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Topic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Topic::ALL
            .into_iter()
            .find(|t| t.slug() == s)
            .ok_or_else(|| Error::invalid(format!("unknown topic `{s}`")))
    }
}

/// Article as fetched, before cleaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawArticle {
    pub source_id: String,
    pub title: String,
    pub sections: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<Topic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Origin {
    pub source_id: String,
    pub section: usize,
}

/// Cleaned unit of the knowledge base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub text: String,
    pub token_count: usize,
    pub origin: Origin,
    pub topic: Topic,
}

/// Turns raw articles into chunks.
#[derive(Clone)]
pub struct Cleaner {
    tokenizer: Arc<dyn Tokenizer>,
    default_topic: Topic,
}

impl Cleaner {
    pub fn new(tokenizer: Arc<dyn Tokenizer>, default_topic: Topic) -> Self {
        Self {
            tokenizer,
            default_topic,
        }
    }

    pub fn tokenizer(&self) -> &dyn Tokenizer {
        self.tokenizer.as_ref()
    }

    /// One chunk per section that is non-empty after cleaning, in section
    /// order. Chunk ids are `<source_id>#<section index>`.
    pub fn clean_article(&self, raw: &RawArticle) -> Vec<Chunk> {
        let topic = raw.topic.unwrap_or(self.default_topic);
        raw.sections
            .iter()
            .enumerate()
            .filter_map(|(section, body)| {
                // a section holding only a heading carries no content
                if clean_text(&clean::strip_headings(body)).is_empty() {
                    return None;
                }
                let text = clean_text(body);
                let token_count = self.tokenizer.tokenize(&text).len();
                Some(Chunk {
                    chunk_id: format!("{}#{}", raw.source_id, section),
                    text,
                    token_count,
                    origin: Origin {
                        source_id: raw.source_id.clone(),
                        section,
                    },
                    topic,
                })
            })
            .collect()
    }
}

/// Keeps chunks with at least `min_tokens` tokens, in order.
pub fn filter_small(chunks: Vec<Chunk>, min_tokens: NonZeroUsize) -> Vec<Chunk> {
    chunks
        .into_iter()
        .filter(|c| c.token_count >= min_tokens.get())
        .collect()
}

/// Resolves chunk ids to chunk text.
pub trait ChunkLookup: Send + Sync {
    fn chunk_text(&self, chunk_id: &str) -> Option<&str>;
}

impl ChunkLookup for HashMap<String, String> {
    fn chunk_text(&self, chunk_id: &str) -> Option<&str> {
        self.get(chunk_id).map(String::as_str)
    }
}

/// Ordered, id-unique collection of chunks.
#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    chunks: Vec<Chunk>,
    by_id: HashMap<String, usize>,
    tokenizer_id: String,
}

impl CorpusStore {
    pub fn new(tokenizer_id: impl Into<String>) -> Self {
        Self {
            tokenizer_id: tokenizer_id.into(),
            ..Self::default()
        }
    }

    pub fn from_chunks(tokenizer_id: impl Into<String>, chunks: Vec<Chunk>) -> Result<Self> {
        let mut store = Self::new(tokenizer_id);
        for c in chunks {
            store.push(c)?;
        }
        Ok(store)
    }

    pub fn push(&mut self, chunk: Chunk) -> Result<()> {
        if self.by_id.contains_key(&chunk.chunk_id) {
            return Err(Error::invalid(format!(
                "duplicate chunk id `{}`",
                chunk.chunk_id
            )));
        }
        self.by_id.insert(chunk.chunk_id.clone(), self.chunks.len());
        self.chunks.push(chunk);
        Ok(())
    }

    pub fn get(&self, chunk_id: &str) -> Option<&Chunk> {
        self.by_id.get(chunk_id).map(|&i| &self.chunks[i])
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn tokenizer_id(&self) -> &str {
        &self.tokenizer_id
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn into_chunks(self) -> Vec<Chunk> {
        self.chunks
    }
}

impl ChunkLookup for CorpusStore {
    fn chunk_text(&self, chunk_id: &str) -> Option<&str> {
        self.get(chunk_id).map(|c| c.text.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cleaner() -> Cleaner {
        Cleaner::new(Arc::new(WordPunctTokenizer), Topic::CurrentEvents)
    }

    fn article(sections: &[&str]) -> RawArticle {
        RawArticle {
            source_id: "a1".into(),
            title: "T".into(),
            sections: sections.iter().map(|s| s.to_string()).collect(),
            topic: None,
        }
    }

    fn chunk_with_tokens(id: &str, n: usize) -> Chunk {
        Chunk {
            chunk_id: id.into(),
            text: vec!["w"; n].join(" "),
            token_count: n,
            origin: Origin {
                source_id: "s".into(),
                section: 0,
            },
            topic: Topic::Anatomy,
        }
    }

    #[test]
    fn single_plain_section() {
        let chunks = cleaner().clean_article(&article(&["Plain text."]));
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, "Plain text.");
        assert_eq!(chunks[0].token_count, 3);
        assert_eq!(chunks[0].chunk_id, "a1#0");
    }

    #[test]
    fn markup_section() {
        let chunks = cleaner().clean_article(&article(&["<b>Bold</b> see https://x.y"]));
        assert_eq!(chunks[0].text, "Bold see");
    }

    #[test]
    fn empty_article() {
        assert!(cleaner().clean_article(&article(&[])).is_empty());
    }

    #[test]
    fn fixture_with_one_empty_section() {
        // Hand-cleaned: section 1 is only a reference and a URL.
        let raw = article(&[
            "== Overview ==\nThe '''wildfires''' began in [[Maui]].<ref>AP</ref>",
            "<ref name=x/> https://example.com/path [2]",
            "Recovery &amp; rebuilding took <i>years</i>.",
        ]);
        let chunks = cleaner().clean_article(&raw);
        let texts: Vec<_> = chunks.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(
            texts,
            vec![
                "Overview: The wildfires began in Maui.",
                "Recovery & rebuilding took years."
            ]
        );
        assert_eq!(chunks[1].origin.section, 2);
        assert_eq!(chunks[1].chunk_id, "a1#2");
    }

    #[test]
    fn article_topic_wins_over_default() {
        let mut raw = article(&["x"]);
        raw.topic = Some(Topic::Astronomy);
        assert_eq!(cleaner().clean_article(&raw)[0].topic, Topic::Astronomy);
    }

    #[test]
    fn filter_boundaries() {
        let min = NonZeroUsize::new(64).unwrap();
        assert!(filter_small(vec![chunk_with_tokens("a", 63)], min).is_empty());
        assert_eq!(filter_small(vec![chunk_with_tokens("a", 64)], min).len(), 1);
    }

    #[test]
    fn filter_mixed_matches_brute_count() {
        let sizes = [10, 64, 200, 63, 0, 65, 1, 64, 300, 12];
        let chunks: Vec<_> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| chunk_with_tokens(&format!("c{i}"), n))
            .collect();
        let mut expected = 0;
        for &n in &sizes {
            if n >= 64 {
                expected += 1;
            }
        }
        let kept = filter_small(chunks.clone(), NonZeroUsize::new(64).unwrap());
        assert_eq!(kept.len(), expected);
        let ids: Vec<_> = kept.iter().map(|c| c.chunk_id.as_str()).collect();
        assert_eq!(ids, vec!["c1", "c2", "c5", "c7", "c8"]);
        for k in &kept {
            let orig = chunks.iter().find(|c| c.chunk_id == k.chunk_id).unwrap();
            assert_eq!(orig, k);
        }
    }

    #[test]
    fn store_rejects_duplicates() {
        let mut s = CorpusStore::new("t");
        s.push(chunk_with_tokens("a", 1)).unwrap();
        assert!(s.push(chunk_with_tokens("a", 2)).is_err());
        assert_eq!(s.chunk_text("a"), Some("w"));
    }

    #[test]
    fn topic_roundtrip() {
        for t in Topic::ALL {
            assert_eq!(t.slug().parse::<Topic>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.slug()));
        }
    }
}
